//! Simulates every behavior hypothesis of the three-car scene from
//! kinematics alone and prints the resulting impact times next to the
//! fixture's pinned values.
//!
//! cargo run --example threat_simulation

use scene_arbiter::scenario::episode::inputs_of;
use scene_arbiter::scenario::{arbitrate_tick, parse_scenario, run_episode, Mode, RunOptions};
use scene_arbiter::threat::ObjectBehavior;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let golden = parse_scenario(include_str!("../scenarios/three_car.json"))?;
    let mut sim = RunOptions {
        ticks: Some(1),
        seed: None,
    }
    .apply(&golden);
    sim.mode = Mode::ClosedLoop;
    let trace = run_episode(&sim)?;
    let out = arbitrate_tick(&sim, &inputs_of(&trace.ticks[0]))?;

    let fmt = |t: Option<f64>| t.map_or("∞".to_string(), |s| format!("{s:.1}"));
    println!(
        "{:<6} {:<16} {:>8} {:>8} {:>6}",
        "object", "behavior", "pinned", "sim", "p"
    );
    for p in &golden.participants {
        let pinned = p.pinned.as_ref().expect("fixture pins every row");
        for k in ObjectBehavior::ALL {
            let e = out.threats.entry(&p.id, k).expect("row per significant car");
            println!(
                "{:<6} {:<16} {:>8} {:>8} {:>6.3}",
                p.id.as_str(),
                k.to_string(),
                fmt(pinned.impact_times[k.index()].seconds()),
                fmt(e.impact.seconds()),
                e.probability
            );
        }
    }
    println!("\n{}", out.result.description);
    Ok(())
}
