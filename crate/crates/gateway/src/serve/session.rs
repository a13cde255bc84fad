//! The simulation thread behind `/sim/*`.
//!
//! The engine is owned by one thread and driven by a command queue, so HTTP
//! handlers never touch simulation state directly.

use std::collections::VecDeque;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;
use skysim::engine::{ControllerSpec, Scenario, Simulation};
use skysim::telemetry::{Recorder, RunSummary, Tee, TelemetryFrame, TelemetrySink, TripEvent};
use skysim::SkywayNetwork;
use tokio::sync::broadcast;

#[derive(Debug, Clone)]
pub enum Command {
    Pause,
    Resume,
    Speed(f64),
    Fault { segment: String, available: bool },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    /// Waiting for the controller link.
    Connecting,
    Paused,
    Running,
    Finished,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStatus {
    pub state: RunState,
    pub time_s: f64,
    pub speed_multiplier: f64,
    pub error: Option<String>,
    pub summary: Option<RunSummary>,
}

impl RunStatus {
    pub fn is_active(&self) -> bool {
        matches!(self.state, RunState::Connecting | RunState::Paused | RunState::Running)
    }
}

/// Pushes telemetry to WebSocket subscribers as JSON text.
pub struct StreamSink(pub broadcast::Sender<String>);

impl TelemetrySink for StreamSink {
    fn frame(&mut self, frame: &TelemetryFrame) {
        let _ = self.0.send(json!({ "type": "frame", "data": frame }).to_string());
    }

    fn event(&mut self, event: &TripEvent) {
        let _ = self.0.send(json!({ "type": "event", "data": event }).to_string());
    }
}

pub struct RunHandle {
    pub commands: Sender<Command>,
    pub recorder: Arc<Mutex<Recorder>>,
    pub status: Arc<Mutex<RunStatus>>,
}

impl RunHandle {
    pub fn status(&self) -> RunStatus {
        self.status.lock().expect("status lock").clone()
    }

    pub fn is_active(&self) -> bool {
        self.status().is_active()
    }
}

pub struct Launch {
    pub network: SkywayNetwork,
    pub scenario: Scenario,
    pub controller: ControllerSpec,
    pub accept_timeout: Duration,
    pub decision_timeout: Duration,
}

/// Starts a paused run; nothing is simulated until `Resume`.
pub fn spawn(launch: Launch, stream: broadcast::Sender<String>) -> RunHandle {
    let (tx, rx) = mpsc::channel();
    let recorder = Arc::new(Mutex::new(Recorder::default()));
    let status = Arc::new(Mutex::new(RunStatus {
        state: RunState::Connecting,
        time_s: 0.0,
        speed_multiplier: 1.0,
        error: None,
        summary: None,
    }));
    let handle = RunHandle {
        commands: tx,
        recorder: recorder.clone(),
        status: status.clone(),
    };
    thread::spawn(move || {
        let outcome = drive(launch, rx, recorder, &status, &stream);
        let mut st = status.lock().expect("status lock");
        match outcome {
            Ok(summary) => {
                let _ = stream.send(json!({ "type": "end", "summary": summary }).to_string());
                st.state = RunState::Finished;
                st.summary = Some(summary);
            }
            Err(e) => {
                let _ = stream.send(json!({ "type": "error", "detail": e }).to_string());
                st.state = RunState::Failed;
                st.error = Some(e);
            }
        }
    });
    handle
}

fn set_state(status: &Mutex<RunStatus>, f: impl FnOnce(&mut RunStatus)) {
    f(&mut status.lock().expect("status lock"));
}

fn drive(
    launch: Launch,
    rx: Receiver<Command>,
    recorder: Arc<Mutex<Recorder>>,
    status: &Mutex<RunStatus>,
    stream: &broadcast::Sender<String>,
) -> Result<RunSummary, String> {
    let link = launch
        .controller
        .open(launch.accept_timeout, launch.decision_timeout)
        .map_err(|e| e.to_string())?;
    let sink = Tee(recorder, StreamSink(stream.clone()));
    let mut sim = Simulation::new(launch.network, launch.scenario, link, Box::new(sink))
        .map_err(|e| e.to_string())?;
    set_state(status, |s| s.state = RunState::Paused);

    let mut paused = true;
    let mut pending = VecDeque::new();
    loop {
        let cmd = match pending.pop_front() {
            Some(c) => Some(c),
            None if paused => Some(rx.recv().unwrap_or(Command::Stop)),
            None => rx.try_recv().ok(),
        };
        if let Some(cmd) = cmd {
            match cmd {
                Command::Pause => paused = true,
                Command::Resume => paused = false,
                Command::Speed(x) => {
                    sim.clock_mut().set_speed_multiplier(x);
                }
                Command::Fault { segment, available } => {
                    sim.inject_fault(&segment, available).map_err(|e| e.to_string())?;
                }
                Command::Stop => break,
            }
            let state = if paused { RunState::Paused } else { RunState::Running };
            let speed = sim.clock().speed_multiplier();
            set_state(status, |s| {
                s.state = state;
                s.speed_multiplier = speed;
            });
            continue;
        }

        let began = Instant::now();
        let more = sim.step().map_err(|e| e.to_string())?;
        let now = sim.clock().now_s();
        set_state(status, |s| s.time_s = now);
        if !more {
            break;
        }
        // Sleep off the rest of the step, waking early for commands.
        if let Some(rest) = sim.clock().wall_step().checked_sub(began.elapsed()) {
            match rx.recv_timeout(rest) {
                Ok(cmd) => pending.push_back(cmd),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
    }
    sim.finish().map_err(|e| e.to_string())
}
