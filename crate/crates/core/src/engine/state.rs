use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::energy::BatteryState;
use crate::model::{Direction, Point3};

/// What a drone is doing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    /// Landed, not waiting on anything the engine tracks (release, hold, or
    /// charged and waiting for swarm mates).
    IdleAtNode,
    Takeoff { remaining_s: f64 },
    Cruising { leg: usize, progress_m: f64 },
    Landing { remaining_s: f64 },
    Charging { target_wh: f64 },
    WaitingForPad { target_wh: f64 },
    WaitingForDecision,
    Done,
    Failed(String),
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::IdleAtNode => "IdleAtNode",
            Phase::Takeoff { .. } => "Takeoff",
            Phase::Cruising { .. } => "Cruising",
            Phase::Landing { .. } => "Landing",
            Phase::Charging { .. } => "Charging",
            Phase::WaitingForPad { .. } => "WaitingForPad",
            Phase::WaitingForDecision => "WaitingForDecision",
            Phase::Done => "Done",
            Phase::Failed(_) => "Failed",
        }
    }

    pub fn is_airborne(&self) -> bool {
        matches!(
            self,
            Phase::Takeoff { .. } | Phase::Cruising { .. } | Phase::Landing { .. }
        )
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Done | Phase::Failed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Location {
    Node(String),
    Segment { id: String, direction: Direction },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneState {
    pub id: String,
    pub request_id: String,
    pub swarm_id: Option<String>,
    pub phase: Phase,
    pub position: Point3,
    pub location: Location,
    pub battery: BatteryState,
    pub payload_kg: f64,
}

/// Fixed-step simulation clock. Time is always `tick * dt`, never accumulated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    tick: u64,
    dt: f64,
    speed_multiplier: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Self {
        Self {
            tick: 0,
            dt,
            speed_multiplier: 1.0,
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn now_s(&self) -> f64 {
        self.time_of(self.tick)
    }

    pub fn time_of(&self, tick: u64) -> f64 {
        tick as f64 * self.dt
    }

    pub(crate) fn advance(&mut self) {
        self.tick += 1;
    }

    /// Number of whole steps needed to cover `seconds`, rounding up.
    pub fn ticks_for(&self, seconds: f64) -> u64 {
        let steps = (seconds / self.dt - 1e-9).ceil();
        if steps > 0.0 {
            steps as u64
        } else {
            0
        }
    }

    pub fn speed_multiplier(&self) -> f64 {
        self.speed_multiplier
    }

    /// Wall-clock pacing only; simulated trajectories do not depend on it.
    pub fn set_speed_multiplier(&mut self, multiplier: f64) -> bool {
        if multiplier.is_finite() && multiplier > 0.0 {
            self.speed_multiplier = multiplier;
            true
        } else {
            false
        }
    }

    /// Wall-clock time one step should take at the current multiplier.
    pub fn wall_step(&self) -> Duration {
        Duration::from_secs_f64(self.dt / self.speed_multiplier)
    }
}
