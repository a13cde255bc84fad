use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::DeliveryRequest;
use crate::model::SimSettings;
use crate::telemetry::RunSummary;

pub const PROTOCOL_VERSION: u32 = 1;

/// One line of the controller conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        protocol_version: u32,
        network: Value,
        settings: SimSettings,
        requests: Vec<DeliveryRequest>,
    },
    Ready {
        protocol_version: u32,
    },
    Arrival(Arrival),
    Decision(Decision),
    Rejection {
        decision: Decision,
        reason: String,
    },
    Fault {
        time_s: f64,
        segment: String,
        available: bool,
    },
    End {
        time_s: f64,
        summary: RunSummary,
    },
    Error {
        code: String,
        detail: String,
    },
}

const MESSAGE_TYPES: &[&str] = &[
    "hello", "ready", "arrival", "decision", "rejection", "fault", "end", "error",
];

impl Message {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        Message::Error {
            code: code.as_str().to_string(),
            detail: detail.into(),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Ready { .. } => "ready",
            Message::Arrival(_) => "arrival",
            Message::Decision(_) => "decision",
            Message::Rejection { .. } => "rejection",
            Message::Fault { .. } => "fault",
            Message::End { .. } => "end",
            Message::Error { .. } => "error",
        }
    }
}

/// A drone or swarm has landed (or been released) at a node and needs a decision.
///
/// For swarms `drone_id` is the leader and `soc_wh` is the lowest member charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time_s: f64,
    pub drone_id: String,
    pub swarm_id: Option<String>,
    pub request_id: String,
    pub node_id: String,
    pub soc_wh: f64,
    pub payload_kg: f64,
    pub availability: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    #[serde(default)]
    pub drone_id: Option<String>,
    #[serde(default)]
    pub swarm_id: Option<String>,
    pub action: Action,
}

impl Decision {
    /// Decision addressed the same way as `arrival`.
    pub fn answering(arrival: &Arrival, action: Action) -> Self {
        Self {
            drone_id: Some(arrival.drone_id.clone()),
            swarm_id: arrival.swarm_id.clone(),
            action,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Traverse { segment: String },
    Charge { target_wh: f64 },
    Wait { duration_s: f64 },
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    /// Line is not valid JSON.
    Parse,
    /// Missing or unrecognised `"type"`.
    UnknownType,
    MissingField,
    /// Any other schema violation.
    Invalid,
    Version,
    UnknownDrone,
    /// Valid message of the wrong kind for this point in the exchange.
    Unexpected,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::Parse => "parse",
            ErrorCode::UnknownType => "unknown_type",
            ErrorCode::MissingField => "missing_field",
            ErrorCode::Invalid => "invalid",
            ErrorCode::Version => "version",
            ErrorCode::UnknownDrone => "unknown_drone",
            ErrorCode::Unexpected => "unexpected",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{code}: {detail}")]
pub struct DecodeError {
    pub code: ErrorCode,
    pub detail: String,
}

/// Single-line JSON terminated by `\n`.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut line = serde_json::to_vec(msg).expect("protocol messages are serializable");
    line.push(b'\n');
    line
}

/// Decodes one line; a trailing newline is accepted.
pub fn decode(line: &[u8]) -> Result<Message, DecodeError> {
    let value: Value = serde_json::from_slice(line).map_err(|e| DecodeError {
        code: ErrorCode::Parse,
        detail: e.to_string(),
    })?;
    let ty = value.get("type").and_then(Value::as_str);
    match ty {
        Some(t) if MESSAGE_TYPES.contains(&t) => {}
        Some(t) => {
            return Err(DecodeError {
                code: ErrorCode::UnknownType,
                detail: format!("unknown message type {t:?}"),
            })
        }
        None => {
            return Err(DecodeError {
                code: ErrorCode::UnknownType,
                detail: "message has no string \"type\"".into(),
            })
        }
    }
    serde_json::from_value(value).map_err(|e| {
        let detail = e.to_string();
        let code = if detail.starts_with("missing field") {
            ErrorCode::MissingField
        } else {
            ErrorCode::Invalid
        };
        DecodeError { code, detail }
    })
}
