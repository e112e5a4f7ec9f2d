//! Round-trips an episode through its JSONL trace, re-arbitrates every tick
//! and prints one recorded explanation.
//!
//! cargo run --example trace_replay

use scene_arbiter::scenario::{explain, parse_scenario, replay, run_episode, TraceLog};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = parse_scenario(include_str!("../scenarios/three_car_closed_loop.json"))?;
    let text = run_episode(&scenario)?.to_jsonl();
    println!("trace: {} lines, {} bytes", text.lines().count(), text.len());

    let trace = TraceLog::from_jsonl(&text)?;
    println!("config hash {}", trace.header.config_hash);
    let report = replay(&trace)?;
    println!(
        "replayed {} ticks, {} mismatches",
        report.ticks,
        report.mismatches.len()
    );

    println!("\ntick 30:\n{}", explain(&trace, 30).unwrap_or("(no such tick)"));
    Ok(())
}
