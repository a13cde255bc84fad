//! HTTP and WebSocket service: edit the network while idle, steer and watch a run.

mod session;

use std::io;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use skysim::engine::{ControllerSpec, Scenario};
use skysim::model::{network_from_value, network_to_value, ModelError};
use skysim::telemetry::{export_events_csv, export_frames_csv};
use skysim::{Node, Point3, Segment, SimSettings, SkywayNetwork};
use tokio::net::TcpListener;
use tokio::sync::broadcast;

pub use session::{Command, RunState, RunStatus};
use session::{Launch, RunHandle};

pub const DEFAULT_HTTP_PORT: u16 = 7400;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub accept_timeout: Duration,
    pub decision_timeout: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            accept_timeout: Duration::from_secs(60),
            decision_timeout: Duration::from_secs(30),
        }
    }
}

struct Shared {
    network: Mutex<SkywayNetwork>,
    run: Mutex<Option<RunHandle>>,
    stream: broadcast::Sender<String>,
    options: ServeOptions,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(network: SkywayNetwork, options: ServeOptions) -> Self {
        let (stream, _) = broadcast::channel(1 << 16);
        Self(Arc::new(Shared {
            network: Mutex::new(network),
            run: Mutex::new(None),
            stream,
            options,
        }))
    }

    /// Applies `edit` to the network unless a run is active.
    fn edit<T>(&self, edit: impl FnOnce(&mut SkywayNetwork) -> Result<T, ApiError>) -> Result<T, ApiError> {
        // The run lock is held across the edit so a start cannot interleave.
        let run = self.0.run.lock().expect("run lock");
        if run.as_ref().is_some_and(RunHandle::is_active) {
            return Err(ApiError::conflict("network is read-only while a run is active"));
        }
        let mut net = self.0.network.lock().expect("network lock");
        edit(&mut net)
    }

    fn command(&self, cmd: Command) -> Result<Json<RunStatus>, ApiError> {
        let run = self.0.run.lock().expect("run lock");
        let handle = run
            .as_ref()
            .filter(|h| h.is_active())
            .ok_or_else(|| ApiError::conflict("no active run"))?;
        handle
            .commands
            .send(cmd)
            .map_err(|_| ApiError::conflict("run has ended"))?;
        Ok(Json(handle.status()))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    findings: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            findings: Vec::new(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::UnknownId(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        Self {
            status,
            message: e.to_string(),
            findings: e.findings(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "findings": self.findings });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/network", get(get_network).put(put_network))
        .route("/network/nodes", post(add_node))
        .route("/network/nodes/{id}", delete(remove_node).patch(patch_node))
        .route("/network/segments", post(add_segment))
        .route("/network/segments/{id}", delete(remove_segment).patch(patch_segment))
        .route("/settings", get(get_settings).patch(patch_settings))
        .route("/sim/start", post(start))
        .route("/sim/pause", post(pause))
        .route("/sim/resume", post(resume))
        .route("/sim/stop", post(stop))
        .route("/sim/speed", post(speed))
        .route("/sim/fault", post(fault))
        .route("/sim/status", get(status))
        .route("/sim/export/frames.csv", get(export_frames))
        .route("/sim/export/events.csv", get(export_events))
        .route("/sim/stream", get(stream))
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

fn parse<T: for<'de> Deserialize<'de>>(body: Value) -> ApiResult<T> {
    serde_json::from_value(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn get_network(State(s): State<AppState>) -> Json<Value> {
    Json(network_to_value(&s.0.network.lock().expect("network lock")))
}

async fn put_network(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<Json<Value>> {
    let fresh = network_from_value(body)?;
    s.edit(|net| {
        *net = fresh;
        Ok(Json(network_to_value(net)))
    })
}

async fn add_node(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<(StatusCode, Json<Node>)> {
    let node: Node = parse(body)?;
    s.edit(|net| {
        net.add_node(node.clone())?;
        Ok((StatusCode::CREATED, Json(node)))
    })
}

async fn remove_node(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    s.edit(|net| {
        let before = net.segment_count();
        let node = net.remove_node(&id)?;
        Ok(Json(json!({ "removed": node, "segments_removed": before - net.segment_count() })))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodePatch {
    position: Point3,
}

async fn patch_node(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> ApiResult<Json<Node>> {
    let patch: NodePatch = parse(body)?;
    s.edit(|net| {
        net.move_node(&id, patch.position)?;
        Ok(Json(net.node(&id).expect("just moved").clone()))
    })
}

async fn add_segment(
    State(s): State<AppState>,
    Json(body): Json<Value>,
) -> ApiResult<(StatusCode, Json<Segment>)> {
    let seg: Segment = parse(body)?;
    s.edit(|net| {
        net.add_segment(seg.clone())?;
        Ok((StatusCode::CREATED, Json(seg)))
    })
}

async fn remove_segment(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Segment>> {
    s.edit(|net| Ok(Json(net.remove_segment(&id)?)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentPatch {
    available: bool,
}

async fn patch_segment(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> ApiResult<Json<Segment>> {
    let patch: SegmentPatch = parse(body)?;
    s.edit(|net| {
        net.set_segment_availability(&id, patch.available)?;
        Ok(Json(net.segment(&id).expect("just updated").clone()))
    })
}

async fn get_settings(State(s): State<AppState>) -> Json<SimSettings> {
    Json(s.0.network.lock().expect("network lock").settings.clone())
}

/// JSON merge patch: objects merge recursively, `null` deletes, anything else replaces.
fn merge_patch(target: &mut Value, patch: Value) {
    match patch {
        Value::Object(fields) => {
            if !target.is_object() {
                *target = json!({});
            }
            let obj = target.as_object_mut().expect("made an object");
            for (k, v) in fields {
                if v.is_null() {
                    obj.remove(&k);
                } else {
                    merge_patch(obj.entry(k).or_insert(Value::Null), v);
                }
            }
        }
        other => *target = other,
    }
}

async fn patch_settings(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<Json<SimSettings>> {
    s.edit(|net| {
        let mut value = serde_json::to_value(&net.settings).expect("settings serialize");
        merge_patch(&mut value, body);
        let settings: SimSettings = parse(value)?;
        net.set_settings(settings)?;
        Ok(Json(net.settings.clone()))
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartBody {
    scenario: Value,
    #[serde(default)]
    controller: Option<String>,
}

async fn start(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<(StatusCode, Json<RunStatus>)> {
    let body: StartBody = parse(body)?;
    let scenario = Scenario::load(body.scenario.to_string().as_bytes())?;
    let controller: ControllerSpec = body
        .controller
        .as_deref()
        .unwrap_or("builtin:greedy")
        .parse()
        .map_err(ApiError::bad_request)?;

    let mut run = s.0.run.lock().expect("run lock");
    if run.as_ref().is_some_and(RunHandle::is_active) {
        return Err(ApiError::conflict("a run is already active"));
    }
    let network = s.0.network.lock().expect("network lock").clone();
    let findings = scenario.findings(&network);
    if !findings.is_empty() {
        return Err(ApiError {
            status: StatusCode::BAD_REQUEST,
            message: "scenario does not fit the network".into(),
            findings,
        });
    }
    let handle = session::spawn(
        Launch {
            network,
            scenario,
            controller,
            accept_timeout: s.0.options.accept_timeout,
            decision_timeout: s.0.options.decision_timeout,
        },
        s.0.stream.clone(),
    );
    let status = handle.status();
    *run = Some(handle);
    Ok((StatusCode::CREATED, Json(status)))
}

async fn pause(State(s): State<AppState>) -> ApiResult<Json<RunStatus>> {
    s.command(Command::Pause)
}

async fn resume(State(s): State<AppState>) -> ApiResult<Json<RunStatus>> {
    s.command(Command::Resume)
}

async fn stop(State(s): State<AppState>) -> ApiResult<Json<RunStatus>> {
    s.command(Command::Stop)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeedBody {
    multiplier: f64,
}

async fn speed(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<Json<RunStatus>> {
    let body: SpeedBody = parse(body)?;
    if !(body.multiplier.is_finite() && body.multiplier > 0.0) {
        return Err(ApiError::bad_request("multiplier must be a positive number"));
    }
    s.command(Command::Speed(body.multiplier))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FaultBody {
    segment: String,
    available: bool,
}

async fn fault(State(s): State<AppState>, Json(body): Json<Value>) -> ApiResult<Json<RunStatus>> {
    let body: FaultBody = parse(body)?;
    if s.0.network.lock().expect("network lock").segment(&body.segment).is_none() {
        return Err(ApiError::not_found(format!("unknown segment \"{}\"", body.segment)));
    }
    s.command(Command::Fault {
        segment: body.segment,
        available: body.available,
    })
}

async fn status(State(s): State<AppState>) -> Json<Value> {
    let run = s.0.run.lock().expect("run lock");
    match run.as_ref() {
        Some(h) => Json(serde_json::to_value(h.status()).expect("status serializes")),
        None => Json(json!({ "state": "idle" })),
    }
}

fn csv_export(s: &AppState, render: fn(&skysim::telemetry::Recorder) -> Vec<u8>) -> ApiResult<Response> {
    let run = s.0.run.lock().expect("run lock");
    let handle = run.as_ref().ok_or_else(|| ApiError::not_found("no run has been started"))?;
    let bytes = render(&handle.recorder.lock().expect("recorder lock"));
    Ok(([(header::CONTENT_TYPE, "text/csv")], bytes).into_response())
}

async fn export_frames(State(s): State<AppState>) -> ApiResult<Response> {
    csv_export(&s, |r| export_frames_csv(&r.frames))
}

async fn export_events(State(s): State<AppState>) -> ApiResult<Response> {
    csv_export(&s, |r| export_events_csv(&r.events))
}

async fn stream(State(s): State<AppState>, ws: WebSocketUpgrade) -> Response {
    let rx = s.0.stream.subscribe();
    ws.on_upgrade(move |socket| forward(socket, rx))
}

async fn forward(mut socket: WebSocket, mut rx: broadcast::Receiver<String>) {
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(text) => {
                    if socket.send(WsMessage::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    let note = json!({ "type": "lagged", "skipped": n }).to_string();
                    if socket.send(WsMessage::Text(note.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => return,
                _ => {}
            },
        }
    }
}
