//! Scenario files, episode execution, traces and on-disk outputs.

pub mod episode;
pub mod format;
pub mod output;
pub mod trace;

use std::path::PathBuf;
use std::thread;

use thiserror::Error;

use crate::scene::SceneError;
use crate::sim::SimError;
use crate::threat::ThreatError;

pub use episode::{arbitrate_tick, lane_at, run_episode, ParticipantState, TickInputs, TickOutcome};
pub use format::{parse_scenario, Mode, MotionSpec, ParticipantSpec, Scenario, ScenarioError};
pub use output::{emit_outputs, plot_table, OutputFiles};
pub use trace::{explain, replay, ReplayReport, TickRecord, TraceHeader, TraceLog};

/// Failure inside one tick of the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Threat(#[from] ThreatError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("tick {tick}: {source}")]
    Tick { tick: u64, source: PipelineError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("trace line {line}: {reason}")]
    Trace { line: usize, reason: String },
    #[error("trace has no record for tick {0}")]
    MissingTick(u64),
    #[error("replay diverged at ticks {0:?}")]
    ReplayMismatch(Vec<u64>),
}

impl RunError {
    pub(crate) fn trace(line: usize, reason: impl Into<String>) -> Self {
        RunError::Trace {
            line,
            reason: reason.into(),
        }
    }

    /// Whether the failure comes from malformed input rather than execution.
    pub fn is_schema(&self) -> bool {
        matches!(self, RunError::Scenario(_) | RunError::Trace { .. })
    }
}

/// Command-line style overrides applied before a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub ticks: Option<u32>,
}

impl RunOptions {
    pub fn apply(&self, s: &Scenario) -> Scenario {
        let mut s = s.clone();
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(ticks) = self.ticks {
            s.ticks = ticks;
        }
        s
    }
}

/// Runs independent scenarios in parallel, one thread each.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<Result<TraceLog, RunError>> {
    thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|s| scope.spawn(move || run_episode(s))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("episode thread panicked"))
            .collect()
    })
}
