//! Skyway network: rooftop nodes, waypoint segments, settings, and the
//! `skysim/1` JSON document format.

mod geometry;
pub(crate) mod json;
mod network;

use thiserror::Error;

pub use geometry::{polyline_legs, Direction, LegProfile, Point3};
pub use json::{canonical_json, load_network, network_from_value, network_to_value, save_network, FORMAT};
pub use network::{is_valid_id, Node, Segment, SimSettings, SkywayNetwork};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported format {0:?}, expected \"skysim/1\"")]
    Format(String),
    #[error("invalid network: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown id \"{0}\"")]
    UnknownId(String),
    #[error("duplicate id \"{0}\"")]
    DuplicateId(String),
    #[error("segment \"{0}\" connects a node to itself")]
    SelfLoop(String),
}

impl ModelError {
    /// Individual findings; single-cause errors yield one entry.
    pub fn findings(&self) -> Vec<String> {
        match self {
            ModelError::Invalid(f) => f.clone(),
            other => vec![other.to_string()],
        }
    }
}
