//! Electric power across airspeed and climb angle, plus the hover figure for a 5 kg craft.
//!
//! `cargo run -p skysim --example power_model`

use skysim::energy::{electric_power, hover_power, DroneSpec, EnvironmentParams, FlightPoint};

fn main() {
    let spec = DroneSpec::default();
    let env = EnvironmentParams::default();
    let mass = spec.empty_mass() + 1.0;

    println!("power (W) for {mass} kg; rows are airspeed, columns climb angle in degrees");
    let angles = [-30.0, -10.0, 0.0, 10.0, 30.0, 60.0];
    print!("{:>8}", "v m/s");
    for a in angles {
        print!("{a:>9}");
    }
    println!();
    for v in [0.0, 5.0, 10.0, 15.0, 20.0] {
        print!("{v:>8}");
        for a in angles {
            let pt = FlightPoint { airspeed: v, climb_angle: f64::to_radians(a), total_mass: mass };
            print!("{:>9.1}", electric_power(&spec, &env, &pt).unwrap());
        }
        println!();
    }

    let big = DroneSpec {
        mass_frame_kg: 4.0,
        mass_battery_kg: 1.0,
        rotor_disc_area_m2: 0.125,
        ..DroneSpec::default()
    };
    println!("\nhover, 5 kg on 0.5 m^2 of disc: {:.3} W", hover_power(&big, &env, 0.0).unwrap());
}
