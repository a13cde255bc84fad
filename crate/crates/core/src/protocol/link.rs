use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::message::{decode, encode, DecodeError, ErrorCode, Message, PROTOCOL_VERSION};

pub const DEFAULT_PORT: u16 = 7401;
pub const DEFAULT_DECISION_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("controller did not answer within {0:?}")]
    Timeout(Duration),
    #[error("controller disconnected")]
    Disconnected,
    #[error("controller gave no reply to {0}")]
    NoReply(&'static str),
    #[error("protocol version mismatch: engine speaks {engine}, controller sent {controller}")]
    Version { engine: u32, controller: u32 },
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("transport error: {0}")]
    Io(#[from] io::Error),
}

/// What came back for a request: a decoded message or a line that did not decode.
#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Message(Message),
    Garbled(DecodeError),
}

/// A routing policy that reacts to engine messages.
///
/// `Hello` must be answered with `Ready` and every `Arrival` with a
/// `Decision`; other messages are informational and expect `None`.
pub trait Controller {
    fn handle(&mut self, msg: &Message) -> Option<Message>;
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn handle(&mut self, msg: &Message) -> Option<Message> {
        (**self).handle(msg)
    }
}

/// Engine side of a controller session.
pub trait ControlLink: Send {
    /// Pushes a message that expects no reply.
    fn notify(&mut self, msg: &Message) -> Result<(), SessionError>;
    /// Sends a message and waits for the controller's answer.
    fn request(&mut self, msg: &Message) -> Result<Reply, SessionError>;
}

impl<L: ControlLink + ?Sized> ControlLink for Box<L> {
    fn notify(&mut self, msg: &Message) -> Result<(), SessionError> {
        (**self).notify(msg)
    }

    fn request(&mut self, msg: &Message) -> Result<Reply, SessionError> {
        (**self).request(msg)
    }
}

/// Runs a controller in-process, passing every message through the same
/// line encoding a TCP session uses.
pub struct InProcessLink<C> {
    controller: C,
}

impl<C> InProcessLink<C> {
    pub fn new(controller: C) -> Self {
        Self { controller }
    }

    pub fn into_inner(self) -> C {
        self.controller
    }
}

impl<C: Controller> InProcessLink<C> {
    fn deliver(&mut self, msg: &Message) -> Option<Reply> {
        let seen = match decode(&encode(msg)) {
            Ok(m) => m,
            Err(e) => return Some(Reply::Garbled(e)),
        };
        self.controller
            .handle(&seen)
            .map(|reply| match decode(&encode(&reply)) {
                Ok(m) => Reply::Message(m),
                Err(e) => Reply::Garbled(e),
            })
    }
}

impl<C: Controller + Send> ControlLink for InProcessLink<C> {
    fn notify(&mut self, msg: &Message) -> Result<(), SessionError> {
        self.deliver(msg);
        Ok(())
    }

    fn request(&mut self, msg: &Message) -> Result<Reply, SessionError> {
        self.deliver(msg)
            .ok_or(SessionError::NoReply(msg.type_name()))
    }
}

/// Newline-delimited JSON over a TCP stream accepted from a controller.
pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    timeout: Duration,
    peer: Option<SocketAddr>,
}

impl TcpLink {
    pub fn from_stream(stream: TcpStream, timeout: Duration) -> io::Result<Self> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        let peer = stream.peer_addr().ok();
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            timeout,
            peer,
        })
    }

    /// Waits up to `accept_timeout` for one controller to connect.
    pub fn accept(
        listener: &TcpListener,
        accept_timeout: Duration,
        decision_timeout: Duration,
    ) -> Result<Self, SessionError> {
        listener.set_nonblocking(true)?;
        let deadline = Instant::now() + accept_timeout;
        let stream = loop {
            match listener.accept() {
                Ok((stream, _)) => break stream,
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(SessionError::Timeout(accept_timeout));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        };
        stream.set_nonblocking(false)?;
        Ok(Self::from_stream(stream, decision_timeout)?)
    }

    pub fn peer(&self) -> Option<SocketAddr> {
        self.peer
    }

    fn write(&mut self, msg: &Message) -> Result<(), SessionError> {
        self.writer.write_all(&encode(msg)).map_err(map_io)?;
        self.writer.flush().map_err(map_io)
    }
}

fn map_io(e: io::Error) -> SessionError {
    match e.kind() {
        ErrorKind::BrokenPipe | ErrorKind::ConnectionReset | ErrorKind::ConnectionAborted => {
            SessionError::Disconnected
        }
        _ => SessionError::Io(e),
    }
}

impl ControlLink for TcpLink {
    fn notify(&mut self, msg: &Message) -> Result<(), SessionError> {
        self.write(msg)
    }

    fn request(&mut self, msg: &Message) -> Result<Reply, SessionError> {
        self.write(msg)?;
        let mut line = Vec::new();
        match self.reader.read_until(b'\n', &mut line) {
            Ok(0) => Err(SessionError::Disconnected),
            Ok(_) => Ok(match decode(&line) {
                Ok(m) => Reply::Message(m),
                Err(e) => Reply::Garbled(e),
            }),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                Err(SessionError::Timeout(self.timeout))
            }
            Err(e) => Err(map_io(e)),
        }
    }
}

/// Performs the opening exchange: `Hello` out, `Ready` with a matching version back.
pub fn handshake(link: &mut dyn ControlLink, hello: &Message) -> Result<(), SessionError> {
    match link.request(hello)? {
        Reply::Message(Message::Ready { protocol_version }) if protocol_version == PROTOCOL_VERSION => {
            Ok(())
        }
        Reply::Message(Message::Ready { protocol_version }) => {
            let _ = link.notify(&Message::error(
                ErrorCode::Version,
                format!("engine speaks protocol {PROTOCOL_VERSION}, got {protocol_version}"),
            ));
            Err(SessionError::Version {
                engine: PROTOCOL_VERSION,
                controller: protocol_version,
            })
        }
        Reply::Message(other) => {
            let _ = link.notify(&Message::error(
                ErrorCode::Unexpected,
                format!("expected ready, got {}", other.type_name()),
            ));
            Err(SessionError::Handshake(format!("expected ready, got {}", other.type_name())))
        }
        Reply::Garbled(e) => {
            let _ = link.notify(&Message::error(e.code, e.detail.clone()));
            Err(SessionError::Handshake(e.to_string()))
        }
    }
}

/// Controller side: answers engine messages on `stream` until `End` or EOF.
///
/// Returns the final `End` message if one arrived.
pub fn serve_controller<C: Controller>(
    stream: TcpStream,
    controller: &mut C,
) -> Result<Option<Message>, SessionError> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line).map_err(map_io)? == 0 {
            return Ok(None);
        }
        // An unsolicited reply would desynchronise the request/answer pairing.
        let Ok(msg) = decode(&line) else { continue };
        if let Some(reply) = controller.handle(&msg) {
            writer.write_all(&encode(&reply)).map_err(map_io)?;
            writer.flush().map_err(map_io)?;
        }
        if matches!(msg, Message::End { .. }) {
            return Ok(Some(msg));
        }
    }
}

/// Connects to an engine at `addr`, retrying until `patience` runs out, then serves.
pub fn connect_controller<C: Controller>(
    addr: impl ToSocketAddrs,
    controller: &mut C,
    patience: Duration,
) -> Result<Option<Message>, SessionError> {
    let deadline = Instant::now() + patience;
    let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
    let stream = loop {
        match addrs.iter().find_map(|a| TcpStream::connect(a).ok()) {
            Some(s) => break s,
            None if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(10)),
            None => return Err(SessionError::Timeout(patience)),
        }
    };
    serve_controller(stream, controller)
}
