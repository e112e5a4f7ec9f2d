//! The three-car highway scene with its pinned threat table: prints the
//! matrix, the decision and its explanation.
//!
//! cargo run --example golden_worked_example

use scene_arbiter::scenario::{parse_scenario, run_episode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = include_str!("../scenarios/three_car.json");
    let scenario = parse_scenario(text)?;
    let trace = run_episode(&scenario)?;
    let tick = &trace.ticks[0];

    println!(
        "{:<6} {:<16} {:>5} {:>6} {:>8} {:>6}  counter",
        "object", "behavior", "λ", "p", "τ [s]", "Θ"
    );
    for e in tick.threats.entries() {
        let tau = e.impact.seconds().map_or("∞".to_string(), |t| format!("{t:.1}"));
        let mark = if e.threat > scenario.arbiter.accept_threshold {
            "*"
        } else {
            " "
        };
        println!(
            "{:<6} {:<16} {:>5.2} {:>6.2} {:>8} {:>6.3}{mark} {}",
            e.object.as_str(),
            e.behavior.to_string(),
            e.significance,
            e.probability,
            tau,
            e.threat,
            e.counter
        );
    }
    println!("\nselected: {}", tick.result.selected);
    println!("candidates tried: {:?}\n", tick.result.candidates_tried);
    println!("{}", tick.description);
    Ok(())
}
