//! Line protocol between the engine and a routing controller.
//!
//! Every message is one JSON object on one line. The engine listens; a
//! controller connects, receives `hello`, answers `ready`, then answers each
//! `arrival` with exactly one `decision`. See `docs/protocol.md` for the
//! full grammar.

mod link;
mod message;

pub use link::{
    connect_controller, handshake, serve_controller, ControlLink, Controller, InProcessLink,
    Reply, SessionError, TcpLink, DEFAULT_DECISION_TIMEOUT, DEFAULT_PORT,
};
pub use message::{
    decode, encode, Action, Arrival, Decision, DecodeError, ErrorCode, Message, PROTOCOL_VERSION,
};
