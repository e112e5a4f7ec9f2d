use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scene_arbiter::scenario::{
    emit_outputs, explain, parse_scenario, replay, run_episode, RunError, RunOptions, TraceLog,
};

/// Scene-network behavior arbitration: run, check and inspect scenarios.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trace, grid snapshots and plot data.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ticks: Option<u32>,
    },
    /// Parse and validate a scenario file.
    Validate { scenario: PathBuf },
    /// Re-arbitrate every tick of a trace and compare with the recorded results.
    Replay { trace: PathBuf },
    /// Print the recorded explanation for one tick.
    Explain {
        trace: PathBuf,
        #[arg(long)]
        tick: u64,
    },
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn execute(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Run {
            scenario,
            out,
            seed,
            ticks,
        } => {
            let s = RunOptions { seed, ticks }.apply(&parse_scenario(&read(&scenario)?)?);
            s.validate()?;
            let trace = run_episode(&s)?;
            let files = emit_outputs(&trace, &out)?;
            let last = trace
                .ticks
                .last()
                .map(|r| r.result.selected.to_string())
                .unwrap_or_default();
            println!(
                "{}: {} ticks, last decision {last}; wrote {} and {} grids",
                s.name,
                trace.ticks.len(),
                files.trace.display(),
                files.grids.len()
            );
        }
        Command::Validate { scenario } => {
            let s = parse_scenario(&read(&scenario)?)?;
            println!(
                "{}: ok ({} participants, hash {})",
                s.name,
                s.participants.len(),
                s.config_hash()
            );
        }
        Command::Replay { trace } => {
            let t = TraceLog::from_jsonl(&read(&trace)?)?;
            let report = replay(&t)?;
            if !report.is_clean() {
                return Err(RunError::ReplayMismatch(report.mismatches));
            }
            println!("{} ticks reproduced", report.ticks);
        }
        Command::Explain { trace, tick } => {
            let t = TraceLog::from_jsonl(&read(&trace)?)?;
            let text = explain(&t, tick).ok_or(RunError::MissingTick(tick))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_schema() { 2 } else { 3 })
        }
    }
}
