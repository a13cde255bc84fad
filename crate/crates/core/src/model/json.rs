use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::network::{Node, Segment, SimSettings, SkywayNetwork};
use super::ModelError;

pub const FORMAT: &str = "skysim/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDocument {
    format: String,
    nodes: Vec<Node>,
    segments: Vec<Segment>,
    settings: SimSettings,
}

/// Parses JSON text into `T`, reporting schema errors with the offending path.
pub(crate) fn from_json_bytes<T: DeserializeOwned>(document: &[u8]) -> Result<T, ModelError> {
    let value: Value =
        serde_json::from_slice(document).map_err(|e| ModelError::Parse(e.to_string()))?;
    from_json_value(value)
}

pub(crate) fn from_json_value<T: DeserializeOwned>(value: Value) -> Result<T, ModelError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ModelError::Schema {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

/// Parses and validates a network document.
pub fn load_network(document: &[u8]) -> Result<SkywayNetwork, ModelError> {
    from_document(from_json_bytes(document)?)
}

/// Same as [`load_network`] for an already-parsed JSON value.
pub fn network_from_value(value: Value) -> Result<SkywayNetwork, ModelError> {
    from_document(from_json_value(value)?)
}

fn from_document(doc: NetworkDocument) -> Result<SkywayNetwork, ModelError> {
    if doc.format != FORMAT {
        return Err(ModelError::Format(doc.format));
    }
    SkywayNetwork::from_parts(doc.nodes, doc.segments, doc.settings)
}

/// Document as a JSON value with nodes and segments in id order.
pub fn network_to_value(net: &SkywayNetwork) -> Value {
    let doc = NetworkDocument {
        format: FORMAT.to_string(),
        nodes: net.nodes().cloned().collect(),
        segments: net.segments().cloned().collect(),
        settings: net.settings.clone(),
    };
    serde_json::to_value(doc).expect("network document is always representable")
}

/// Canonical bytes: sorted keys, id-ordered lists, shortest round-trip floats.
pub fn save_network(net: &SkywayNetwork) -> Vec<u8> {
    canonical_json(&network_to_value(net))
}

/// Pretty-printed JSON with object keys sorted at every level, newline-terminated.
pub fn canonical_json(value: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&sort_keys(value)).expect("serializable");
    out.push(b'\n');
    out
}

fn sort_keys(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let mut sorted = Map::new();
            for k in keys {
                sorted.insert(k.clone(), sort_keys(&map[k]));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
      "format": "skysim/1",
      "nodes": [
        {"id": "n1", "position": [0, 0, 10], "pad_count": 1, "charge_power_w": 200.0},
        {"id": "n2", "position": [100, 0, 10], "pad_count": 2, "charge_power_w": 150.0}
      ],
      "segments": [{"id": "s1", "from": "n1", "to": "n2", "waypoints": [], "available": true}],
      "settings": {
        "dt_s": 0.1, "reserve_fraction": 0.1, "hover_takeoff_s": 5, "hover_landing_s": 10,
        "drone": {
          "mass_frame_kg": 1.5, "mass_battery_kg": 0.5, "payload_capacity_kg": 2.0,
          "rotor_count": 4, "rotor_disc_area_m2": 0.0707, "drag_coefficient": 1.0,
          "frontal_area_m2": 0.05, "induced_power_factor": 1.15, "powertrain_efficiency": 0.7,
          "avionics_power_w": 10.0, "cruise_speed_mps": 10.0, "vertical_speed_mps": 3.0,
          "battery_capacity_wh": 100.0, "charge_efficiency": 0.95
        },
        "environment": {"gravity_mps2": 9.81, "air_density_kgpm3": 1.225}
      }
    }"#;

    #[test]
    fn minimal_document_loads() {
        let net = load_network(MINIMAL.as_bytes()).unwrap();
        assert_eq!(net.node_count(), 2);
        assert_eq!(net.segment_count(), 1);
    }

    #[test]
    fn dangling_endpoint_names_the_node() {
        let doc = MINIMAL.replace(r#""to": "n2""#, r#""to": "X""#);
        let err = load_network(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, ModelError::Invalid(_)));
        assert!(err.to_string().contains("\"X\""), "{err}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let err = load_network(b"{\"format\": ").unwrap_err();
        assert!(matches!(err, ModelError::Parse(_)));
    }

    #[test]
    fn schema_errors_name_the_path() {
        let doc = MINIMAL.replace(r#""pad_count": 2"#, r#""pad_count": "two""#);
        match load_network(doc.as_bytes()).unwrap_err() {
            ModelError::Schema { path, .. } => assert_eq!(path, "nodes[1].pad_count"),
            other => panic!("unexpected {other:?}"),
        }
        let doc = MINIMAL.replace(r#""available": true"#, r#""available": true, "colour": "red""#);
        match load_network(doc.as_bytes()).unwrap_err() {
            ModelError::Schema { message, .. } => assert!(message.contains("colour")),
            other => panic!("unexpected {other:?}"),
        }
        let doc = MINIMAL.replace(r#""gravity_mps2": 9.81, "#, "");
        match load_network(doc.as_bytes()).unwrap_err() {
            ModelError::Schema { path, message } => {
                assert_eq!(path, "settings.environment");
                assert!(message.contains("gravity_mps2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_format_tag() {
        let doc = MINIMAL.replace("skysim/1", "skysim/0");
        assert!(matches!(load_network(doc.as_bytes()), Err(ModelError::Format(_))));
    }

    #[test]
    fn empty_network_saves_default_settings() {
        let bytes = save_network(&SkywayNetwork::default());
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["nodes"], Value::Array(vec![]));
        assert_eq!(v["segments"], Value::Array(vec![]));
        assert_eq!(v["settings"]["dt_s"], 0.1);
        assert_eq!(load_network(&bytes).unwrap(), SkywayNetwork::default());
    }

    #[test]
    fn save_is_canonical() {
        let net = load_network(MINIMAL.as_bytes()).unwrap();
        let a = save_network(&net);
        assert_eq!(a, save_network(&net.clone()));
        let text = String::from_utf8(a.clone()).unwrap();
        // keys sorted: "format" precedes "nodes", "available" precedes "from"
        assert!(text.find("\"format\"").unwrap() < text.find("\"nodes\"").unwrap());
        assert!(text.find("\"available\"").unwrap() < text.find("\"from\"").unwrap());
        assert_eq!(load_network(&a).unwrap(), net);
    }
}
