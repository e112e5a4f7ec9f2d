//! Drives the single-track model with constant steering and checks the path
//! against the analytic turning circle.
//!
//! cargo run --example kinematics_circle

use scene_arbiter::sim::{step_single_track, turn_radius, ControlInput, KinematicState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (wheelbase, steering, speed, dt) = (2.7, 0.25, 10.0, 0.1);
    let r = turn_radius(wheelbase, steering).expect("non-zero steering");
    let mut s = KinematicState::new(0.0, 0.0, 0.0, speed, wheelbase);
    let center = (0.0, r);
    let period = 2.0 * std::f64::consts::PI * r / speed;
    println!("R = {r:.4} m, period = {period:.3} s");

    let mut worst: f64 = 0.0;
    for n in 1..=1000 {
        s = step_single_track(&s, ControlInput::new(steering, 0.0), dt)?;
        let err = ((s.x - center.0).hypot(s.y - center.1) - r).abs();
        worst = worst.max(err);
        if n % 100 == 0 {
            println!(
                "t = {:>5.1} s  x = {:>8.3}  y = {:>8.3}  heading = {:>7.4}",
                n as f64 * dt,
                s.x,
                s.y,
                s.heading
            );
        }
    }
    println!("largest distance from the circle: {worst:.2e} m");
    Ok(())
}
