//! Seeded background traffic: the same scenario under several seeds, run
//! in parallel.
//!
//! cargo run --example sampled_batch

use scene_arbiter::arbiter::EgoBehavior;
use scene_arbiter::scenario::{parse_scenario, run_batch, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = parse_scenario(include_str!("../scenarios/sampled_traffic.json"))?;
    let runs: Vec<_> = (1..=6)
        .map(|seed| {
            RunOptions {
                seed: Some(seed),
                ticks: None,
            }
            .apply(&base)
        })
        .collect();

    for (s, trace) in runs.iter().zip(run_batch(&runs)) {
        let trace = trace?;
        let braking = trace
            .ticks
            .iter()
            .filter(|r| r.result.selected == EgoBehavior::ReduceSpeed)
            .count();
        let peak = trace
            .ticks
            .iter()
            .flat_map(|r| r.threats.entries().map(|e| e.threat))
            .fold(0.0, f64::max);
        let end = trace.ticks.last().expect("non-empty episode");
        println!(
            "seed {:>2}: {:>3} ticks, {:>3} braking, peak Θ {:.3}, final speed {:>5.2} m/s  [{}]",
            s.seed,
            trace.ticks.len(),
            braking,
            peak,
            end.ego.speed,
            &trace.header.config_hash[..12]
        );
    }
    Ok(())
}
