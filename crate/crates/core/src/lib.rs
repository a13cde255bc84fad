//! Deterministic skyway-network simulator for Drone-as-a-Service delivery.
//!
//! Rooftop nodes with charging pads are connected by waypoint segments. Drones
//! and swarms fly those segments under a climb-aware multirotor power model,
//! and at every node a controller (in-process or across a TCP line protocol)
//! decides whether to traverse, charge, wait, or complete. Every run emits
//! per-frame telemetry and trip milestones as CSV.
//!
//! The `examples/` directory has one runnable program per capability:
//!
//! ```bash
//! cargo run -p skysim --example power_model
//! cargo run -p skysim --example ring_fault_recovery
//! ```

pub mod composer;
pub mod energy;
pub mod engine;
pub mod model;
pub mod protocol;
pub mod synth;
pub mod telemetry;

pub use composer::{compose_min_energy, ComposedPath, CompositionQuery, GreedyController};
pub use energy::{BatteryState, DroneSpec, EnvironmentParams, FlightPoint};
pub use engine::{run, run_builtin, ControllerSpec, DeliveryRequest, FaultEvent, RunResult, Scenario, Simulation};
pub use model::{load_network, save_network, Direction, Node, Point3, Segment, SimSettings, SkywayNetwork};
