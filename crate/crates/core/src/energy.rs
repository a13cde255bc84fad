//! Multirotor power model and battery bookkeeping.
//!
//! Thrust balances weight plus parasite drag at the flight path angle, the
//! induced velocity comes from Glauert's momentum equation
//! `v_i * sqrt(v^2 + v_i^2) = T / (2 rho A)`, and electric power is
//!
//! ```text
//! P = max(0, k_i T v_i + m g v sin(theta) + D v) / eta + P_av
//! ```
//!
//! Profile power of the blades is folded into `k_i`. Descent never
//! regenerates: the mechanical term is clamped at zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LegProfile;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Physical description of one drone, as edited in the settings panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneSpec {
    pub mass_frame_kg: f64,
    pub mass_battery_kg: f64,
    pub payload_capacity_kg: f64,
    pub rotor_count: u32,
    /// Per rotor.
    pub rotor_disc_area_m2: f64,
    pub drag_coefficient: f64,
    pub frontal_area_m2: f64,
    pub induced_power_factor: f64,
    pub powertrain_efficiency: f64,
    pub avionics_power_w: f64,
    pub cruise_speed_mps: f64,
    pub vertical_speed_mps: f64,
    pub battery_capacity_wh: f64,
    pub charge_efficiency: f64,
}

impl Default for DroneSpec {
    fn default() -> Self {
        Self {
            mass_frame_kg: 1.5,
            mass_battery_kg: 0.5,
            payload_capacity_kg: 2.0,
            rotor_count: 4,
            rotor_disc_area_m2: 0.0707,
            drag_coefficient: 1.0,
            frontal_area_m2: 0.05,
            induced_power_factor: 1.15,
            powertrain_efficiency: 0.7,
            avionics_power_w: 10.0,
            cruise_speed_mps: 10.0,
            vertical_speed_mps: 3.0,
            battery_capacity_wh: 100.0,
            charge_efficiency: 0.95,
        }
    }
}

impl DroneSpec {
    pub fn empty_mass(&self) -> f64 {
        self.mass_frame_kg + self.mass_battery_kg
    }

    pub fn total_disc_area(&self) -> f64 {
        self.rotor_count as f64 * self.rotor_disc_area_m2
    }

    /// Range and positivity violations, one message per field.
    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, rule: &str| {
            if !ok {
                out.push(format!("settings.drone.{field} must be {rule}"));
            }
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let unit = |x: f64| x.is_finite() && x > 0.0 && x <= 1.0;
        check(pos(self.mass_frame_kg), "mass_frame_kg", "> 0");
        check(nonneg(self.mass_battery_kg), "mass_battery_kg", ">= 0");
        check(nonneg(self.payload_capacity_kg), "payload_capacity_kg", ">= 0");
        check(self.rotor_count >= 1, "rotor_count", ">= 1");
        check(pos(self.rotor_disc_area_m2), "rotor_disc_area_m2", "> 0");
        check(nonneg(self.drag_coefficient), "drag_coefficient", ">= 0");
        check(nonneg(self.frontal_area_m2), "frontal_area_m2", ">= 0");
        check(
            self.induced_power_factor.is_finite() && self.induced_power_factor >= 1.0,
            "induced_power_factor",
            ">= 1",
        );
        check(unit(self.powertrain_efficiency), "powertrain_efficiency", "in (0, 1]");
        check(nonneg(self.avionics_power_w), "avionics_power_w", ">= 0");
        check(pos(self.cruise_speed_mps), "cruise_speed_mps", "> 0");
        check(pos(self.vertical_speed_mps), "vertical_speed_mps", "> 0");
        check(pos(self.battery_capacity_wh), "battery_capacity_wh", "> 0");
        check(unit(self.charge_efficiency), "charge_efficiency", "in (0, 1]");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentParams {
    pub gravity_mps2: f64,
    pub air_density_kgpm3: f64,
}

impl Default for EnvironmentParams {
    fn default() -> Self {
        Self {
            gravity_mps2: 9.81,
            air_density_kgpm3: 1.225,
        }
    }
}

impl EnvironmentParams {
    pub fn findings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.gravity_mps2.is_finite() && self.gravity_mps2 > 0.0) {
            out.push("settings.environment.gravity_mps2 must be > 0".to_string());
        }
        if !(self.air_density_kgpm3.is_finite() && self.air_density_kgpm3 > 0.0) {
            out.push("settings.environment.air_density_kgpm3 must be > 0".to_string());
        }
        out
    }
}

/// Operating point at which power is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightPoint {
    pub airspeed: f64,
    /// Flight path angle, radians in [-pi/2, pi/2]; positive is climbing.
    pub climb_angle: f64,
    pub total_mass: f64,
}

impl FlightPoint {
    pub fn hover(total_mass: f64) -> Self {
        Self {
            airspeed: 0.0,
            climb_angle: 0.0,
            total_mass,
        }
    }
}

/// Induced velocity through the rotor discs.
///
/// Solves `x * sqrt(v^2 + x^2) = T / (2 rho A)` for `x >= 0`. The left side is
/// strictly increasing in `x` and the hover value `sqrt(T / (2 rho A))` always
/// brackets the root from above, so bisection on `[0, v_h]` cannot miss it.
pub fn solve_induced_velocity(
    thrust: f64,
    airspeed: f64,
    air_density: f64,
    disc_area: f64,
) -> Result<f64, EnergyError> {
    for (value, name) in [
        (thrust, "thrust"),
        (airspeed, "airspeed"),
        (air_density, "air density"),
        (disc_area, "disc area"),
    ] {
        if !value.is_finite() {
            return Err(EnergyError::NonFinite(name));
        }
    }
    if thrust < 0.0 || airspeed < 0.0 || air_density <= 0.0 || disc_area <= 0.0 {
        return Err(EnergyError::InvalidInput(format!(
            "T={thrust}, v={airspeed}, rho={air_density}, A={disc_area}"
        )));
    }

    let target = thrust / (2.0 * air_density * disc_area);
    if !target.is_finite() {
        return Err(EnergyError::NonFinite("disc loading"));
    }
    let hover = target.sqrt();
    if target == 0.0 || airspeed == 0.0 {
        return Ok(hover);
    }

    let v2 = airspeed * airspeed;
    let f = |x: f64| x * (v2 + x * x).sqrt() - target;

    let (mut lo, mut hi) = (0.0_f64, hover);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Newton polish from the bracket midpoint, kept only if it stays inside.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let s = (v2 + x * x).sqrt();
        let slope = s + x * x / s;
        let next = x - f(x) / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        x = next;
    }
    if f(lo).abs() < f(x).abs() {
        x = lo;
    }
    if f(hi).abs() < f(x).abs() {
        x = hi;
    }
    Ok(x)
}

/// Electric power drawn from the battery at the given operating point, in watts.
pub fn electric_power(
    spec: &DroneSpec,
    env: &EnvironmentParams,
    pt: &FlightPoint,
) -> Result<f64, EnergyError> {
    if !(pt.airspeed.is_finite() && pt.climb_angle.is_finite() && pt.total_mass.is_finite()) {
        return Err(EnergyError::NonFinite("flight point"));
    }
    if pt.airspeed < 0.0 {
        return Err(EnergyError::InvalidInput(format!("airspeed {} < 0", pt.airspeed)));
    }
    if pt.total_mass < spec.empty_mass() {
        return Err(EnergyError::InvalidInput(format!(
            "total mass {} below empty mass {}",
            pt.total_mass,
            spec.empty_mass()
        )));
    }

    let rho = env.air_density_kgpm3;
    let v = pt.airspeed;
    let weight = pt.total_mass * env.gravity_mps2;
    let (sin, cos) = pt.climb_angle.sin_cos();

    let drag = 0.5 * rho * spec.drag_coefficient * spec.frontal_area_m2 * v * v;
    let thrust = (weight + drag * sin).hypot(drag * cos);
    let induced = solve_induced_velocity(thrust, v, rho, spec.total_disc_area())?;

    let mechanical =
        (spec.induced_power_factor * thrust * induced + weight * v * sin + drag * v).max(0.0);
    let power = mechanical / spec.powertrain_efficiency + spec.avionics_power_w;
    if !power.is_finite() {
        return Err(EnergyError::NonFinite("power"));
    }
    Ok(power)
}

/// Hover power at the given payload.
pub fn hover_power(
    spec: &DroneSpec,
    env: &EnvironmentParams,
    payload_kg: f64,
) -> Result<f64, EnergyError> {
    electric_power(spec, env, &FlightPoint::hover(spec.empty_mass() + payload_kg))
}

/// Energy (Wh) and duration (s) of one constant-speed leg.
pub fn leg_energy(
    spec: &DroneSpec,
    env: &EnvironmentParams,
    leg: &LegProfile,
    speed: f64,
    payload_kg: f64,
) -> Result<(f64, f64), EnergyError> {
    if !(leg.length > 0.0 && speed > 0.0) {
        return Err(EnergyError::InvalidInput(format!(
            "leg length {} and speed {} must be positive",
            leg.length, speed
        )));
    }
    let power = electric_power(
        spec,
        env,
        &FlightPoint {
            airspeed: speed,
            climb_angle: leg.climb_angle,
            total_mass: spec.empty_mass() + payload_kg,
        },
    )?;
    let duration = leg.length / speed;
    Ok((power * duration / SECONDS_PER_HOUR, duration))
}

/// Hover time charged to every segment flight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HoverTimes {
    pub takeoff_s: f64,
    pub landing_s: f64,
}

/// Total energy (Wh) of flying a polyline at cruise speed, including the
/// takeoff and landing hovers.
pub fn segment_energy(
    spec: &DroneSpec,
    env: &EnvironmentParams,
    legs: &[LegProfile],
    payload_kg: f64,
    hover: HoverTimes,
) -> Result<f64, EnergyError> {
    let mut total = 0.0;
    for leg in legs {
        total += leg_energy(spec, env, leg, spec.cruise_speed_mps, payload_kg)?.0;
    }
    let hover_s = hover.takeoff_s + hover.landing_s;
    if hover_s > 0.0 {
        total += hover_power(spec, env, payload_kg)? * hover_s / SECONDS_PER_HOUR;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("battery depleted: {available_wh} Wh available, {required_wh} Wh required")]
pub struct Depleted {
    pub available_wh: f64,
    pub required_wh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub soc_wh: f64,
    pub capacity_wh: f64,
    pub cumulative_consumed_wh: f64,
}

impl BatteryState {
    pub fn full(capacity_wh: f64) -> Self {
        Self {
            soc_wh: capacity_wh,
            capacity_wh,
            cumulative_consumed_wh: 0.0,
        }
    }

    pub fn soc_pct(&self) -> f64 {
        100.0 * self.soc_wh / self.capacity_wh
    }

    /// Linear charging at `pad_power_w` with efficiency `efficiency`, saturating at capacity.
    pub fn charge(&self, pad_power_w: f64, efficiency: f64, duration_s: f64) -> Self {
        let added = pad_power_w * efficiency * duration_s / SECONDS_PER_HOUR;
        Self {
            soc_wh: (self.soc_wh + added).min(self.capacity_wh),
            ..*self
        }
    }

    /// Draws `power_w` for `dt_s`. Running dry exactly is allowed; going below zero is not.
    pub fn discharge(&self, power_w: f64, dt_s: f64) -> Result<Self, Depleted> {
        let used = power_w * dt_s / SECONDS_PER_HOUR;
        let soc = self.soc_wh - used;
        if soc < 0.0 {
            return Err(Depleted {
                available_wh: self.soc_wh,
                required_wh: used,
            });
        }
        Ok(Self {
            soc_wh: soc,
            capacity_wh: self.capacity_wh,
            cumulative_consumed_wh: self.cumulative_consumed_wh + used,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_spec() -> DroneSpec {
        DroneSpec {
            mass_frame_kg: 4.0,
            mass_battery_kg: 1.0,
            rotor_count: 4,
            rotor_disc_area_m2: 0.125,
            induced_power_factor: 1.15,
            powertrain_efficiency: 0.7,
            avionics_power_w: 10.0,
            ..DroneSpec::default()
        }
    }

    #[test]
    fn zero_thrust_gives_zero_induced_velocity() {
        assert_eq!(solve_induced_velocity(0.0, 7.0, 1.225, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn hover_limit_is_closed_form() {
        let vi = solve_induced_velocity(100.0, 0.0, 1.225, 0.5).unwrap();
        assert!((vi - 9.035079029052512).abs() < 1e-12);
    }

    #[test]
    fn forward_flight_matches_frozen_bisection_value() {
        // 200-step high-precision bisection of x*sqrt(100+x^2) = 100/1.225
        let vi = solve_induced_velocity(100.0, 10.0, 1.225, 0.5).unwrap();
        assert!((vi - 6.76226361863567).abs() < 1e-9);
    }

    #[test]
    fn solver_rejects_non_finite() {
        assert!(matches!(
            solve_induced_velocity(f64::NAN, 0.0, 1.225, 0.5),
            Err(EnergyError::NonFinite(_))
        ));
        assert!(solve_induced_velocity(1.0, f64::INFINITY, 1.225, 0.5).is_err());
    }

    #[test]
    fn hover_golden_value() {
        let p = electric_power(&golden_spec(), &EnvironmentParams::default(), &FlightPoint::hover(5.0))
            .unwrap();
        assert!((p - 519.906178).abs() < 1e-5, "{p}");
    }

    #[test]
    fn drag_free_level_flight() {
        let spec = DroneSpec {
            drag_coefficient: 0.0,
            ..golden_spec()
        };
        let env = EnvironmentParams::default();
        let pt = FlightPoint {
            airspeed: 12.0,
            climb_angle: 0.0,
            total_mass: 5.0,
        };
        let t = 5.0 * env.gravity_mps2;
        let vi = solve_induced_velocity(t, 12.0, env.air_density_kgpm3, spec.total_disc_area()).unwrap();
        let expected = spec.induced_power_factor * t * vi / spec.powertrain_efficiency + spec.avionics_power_w;
        assert_eq!(electric_power(&spec, &env, &pt).unwrap(), expected);
    }

    #[test]
    fn fast_steep_descent_clamps_to_avionics() {
        let spec = golden_spec();
        let pt = FlightPoint {
            airspeed: 30.0,
            climb_angle: -std::f64::consts::FRAC_PI_2,
            total_mass: 5.0,
        };
        let p = electric_power(&spec, &EnvironmentParams::default(), &pt).unwrap();
        assert_eq!(p, spec.avionics_power_w);
    }

    #[test]
    fn mass_below_empty_is_rejected() {
        let r = electric_power(&golden_spec(), &EnvironmentParams::default(), &FlightPoint::hover(1.0));
        assert!(matches!(r, Err(EnergyError::InvalidInput(_))));
    }

    #[test]
    fn one_minute_leg_is_power_over_sixty() {
        let spec = golden_spec();
        let env = EnvironmentParams::default();
        let leg = LegProfile {
            length: 10.0 * 60.0,
            climb_angle: 0.0,
        };
        let (e, d) = leg_energy(&spec, &env, &leg, 10.0, 0.0).unwrap();
        let p = electric_power(
            &spec,
            &env,
            &FlightPoint {
                airspeed: 10.0,
                climb_angle: 0.0,
                total_mass: 5.0,
            },
        )
        .unwrap();
        assert_eq!(d, 60.0);
        assert!((e - p / 60.0).abs() < 1e-12);
    }

    #[test]
    fn split_leg_is_additive() {
        let spec = DroneSpec::default();
        let env = EnvironmentParams::default();
        let whole = LegProfile {
            length: 100.0,
            climb_angle: 0.0,
        };
        let half = LegProfile {
            length: 50.0,
            ..whole
        };
        let (e, d) = leg_energy(&spec, &env, &whole, 10.0, 0.5).unwrap();
        let (eh, dh) = leg_energy(&spec, &env, &half, 10.0, 0.5).unwrap();
        assert_eq!(e, eh + eh);
        assert_eq!(d, dh + dh);
    }

    #[test]
    fn zero_hover_single_leg_equals_leg_energy() {
        let spec = DroneSpec::default();
        let env = EnvironmentParams::default();
        let leg = LegProfile {
            length: 250.0,
            climb_angle: 0.1,
        };
        let seg = segment_energy(&spec, &env, &[leg], 1.0, HoverTimes::default()).unwrap();
        let (e, _) = leg_energy(&spec, &env, &leg, spec.cruise_speed_mps, 1.0).unwrap();
        assert_eq!(seg, e);
    }

    #[test]
    fn heavier_payload_costs_more() {
        let spec = DroneSpec::default();
        let env = EnvironmentParams::default();
        let legs = [
            LegProfile { length: 80.0, climb_angle: 0.3 },
            LegProfile { length: 120.0, climb_angle: 0.0 },
        ];
        let hover = HoverTimes { takeoff_s: 5.0, landing_s: 10.0 };
        let light = segment_energy(&spec, &env, &legs, 0.0, hover).unwrap();
        let heavy = segment_energy(&spec, &env, &legs, 2.0, hover).unwrap();
        assert!(heavy > light);
    }

    #[test]
    fn round_trip_costs_at_least_level_flight() {
        let spec = DroneSpec::default();
        let env = EnvironmentParams::default();
        let up = LegProfile { length: 50.0, climb_angle: (30.0f64).atan2(40.0) };
        let down = LegProfile { length: 50.0, climb_angle: -up.climb_angle };
        let level = LegProfile { length: 50.0, climb_angle: 0.0 };
        let none = HoverTimes::default();
        let there = segment_energy(&spec, &env, &[up], 1.0, none).unwrap();
        let back = segment_energy(&spec, &env, &[down], 1.0, none).unwrap();
        let flat = segment_energy(&spec, &env, &[level], 1.0, none).unwrap();
        assert!(there + back >= 2.0 * flat);
    }

    #[test]
    fn charge_cases() {
        let empty = BatteryState { soc_wh: 0.0, capacity_wh: 100.0, cumulative_consumed_wh: 3.0 };
        assert_eq!(empty.charge(200.0, 0.95, 0.0), empty);
        let charged = empty.charge(200.0, 0.95, 1800.0);
        assert!((charged.soc_wh - 95.0).abs() < 1e-12);
        assert_eq!(charged.cumulative_consumed_wh, 3.0);
        let full = BatteryState::full(100.0);
        assert_eq!(full.charge(200.0, 0.95, 60.0), full);
    }

    #[test]
    fn discharge_cases() {
        let b = BatteryState::full(1.0);
        assert_eq!(b.discharge(0.0, 10.0).unwrap(), b);
        let drained = b.discharge(3600.0, 1.0).unwrap();
        assert_eq!(drained.soc_wh, 0.0);
        assert_eq!(drained.cumulative_consumed_wh, 1.0);
        assert!(drained.discharge(1.0, 1.0).is_err());
    }
}
