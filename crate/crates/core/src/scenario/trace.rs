//! Episode traces: a header line followed by one JSON record per tick.

use serde::{Deserialize, Serialize};

use crate::arbiter::ArbitrationResult;
use crate::sim::KinematicState;
use crate::threat::ThreatMatrix;

use super::episode::{arbitrate_tick, inputs_of, ParticipantState};
use super::format::Scenario;
use super::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub name: String,
    /// Hash of `scenario` as run, seed and tick overrides included.
    pub config_hash: String,
    pub seed: u64,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickRecord {
    pub tick: u64,
    pub clock: f64,
    pub ego: KinematicState,
    pub ego_lane: Option<u32>,
    pub ego_offset: f64,
    pub participants: Vec<ParticipantState>,
    pub threats: ThreatMatrix,
    pub result: ArbitrationResult,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceLog {
    pub header: TraceHeader,
    pub ticks: Vec<TickRecord>,
}

impl TraceLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.ticks {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses a trace and checks its invariants: the header hash matches
    /// the embedded scenario and ticks strictly increase.
    pub fn from_jsonl(text: &str) -> Result<Self, RunError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| RunError::trace(1, "empty trace"))?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| RunError::trace(1, e.to_string()))?;
        header
            .scenario
            .validate()
            .map_err(|e| RunError::trace(1, e.to_string()))?;
        if header.seed != header.scenario.seed || header.name != header.scenario.name {
            return Err(RunError::trace(1, "header disagrees with the embedded scenario"));
        }
        if header.scenario.config_hash() != header.config_hash {
            return Err(RunError::trace(1, "config hash does not match the embedded scenario"));
        }
        let mut ticks: Vec<TickRecord> = Vec::new();
        for (i, line) in lines {
            let r: TickRecord = serde_json::from_str(line).map_err(|e| RunError::trace(i + 1, e.to_string()))?;
            if ticks.last().is_some_and(|prev| prev.tick >= r.tick) {
                return Err(RunError::trace(
                    i + 1,
                    format!("tick {} is not after the previous one", r.tick),
                ));
            }
            ticks.push(r);
        }
        Ok(Self { header, ticks })
    }

    pub fn record(&self, tick: u64) -> Option<&TickRecord> {
        self.ticks.iter().find(|r| r.tick == tick)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayReport {
    pub ticks: usize,
    /// Ticks whose re-arbitrated result differs from the recorded one.
    pub mismatches: Vec<u64>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Re-runs arbitration on every recorded tick's inputs and compares the
/// threat matrix, result and description with what was recorded.
pub fn replay(trace: &TraceLog) -> Result<ReplayReport, RunError> {
    let s = &trace.header.scenario;
    let mut report = ReplayReport::default();
    for r in &trace.ticks {
        let out = arbitrate_tick(s, &inputs_of(r)).map_err(|source| RunError::Tick { tick: r.tick, source })?;
        report.ticks += 1;
        if out.result != r.result || out.threats != r.threats || out.result.description.render() != r.description {
            report.mismatches.push(r.tick);
        }
    }
    Ok(report)
}

/// The recorded decision explanation for `tick`.
pub fn explain(trace: &TraceLog, tick: u64) -> Option<&str> {
    trace.record(tick).map(|r| r.description.as_str())
}
