//! Runs the pedestrian-crossing scenario closed loop and writes the trace,
//! per-tick grids and plot table.
//!
//! cargo run --example closed_loop_episode [-- OUT_DIR]

use std::path::PathBuf;

use scene_arbiter::scenario::{emit_outputs, parse_scenario, run_episode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = parse_scenario(include_str!("../scenarios/pedestrian_crossing.json"))?;
    let trace = run_episode(&scenario)?;

    let mut last = None;
    for r in &trace.ticks {
        if last != Some(r.result.selected) {
            println!(
                "t = {:>4.1} s  ego x = {:>6.2} v = {:>5.2}  -> {}",
                r.clock, r.ego.x, r.ego.speed, r.result.selected
            );
            last = Some(r.result.selected);
        }
    }

    let out: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "out/pedestrian_crossing".into())
        .into();
    let files = emit_outputs(&trace, &out)?;
    println!(
        "wrote {} and {} grid images under {}",
        files.trace.display(),
        files.grids.len(),
        out.display()
    );
    Ok(())
}
