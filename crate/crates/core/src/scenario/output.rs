//! Writing an episode to disk: trace, grid snapshots and plot data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::sim::render_grid;

use super::episode::world_at;
use super::trace::TraceLog;
use super::RunError;

pub const TRACE_FILE: &str = "trace.jsonl";
pub const PLOT_FILE: &str = "plot.tsv";
pub const GRID_DIR: &str = "grids";

/// Files written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputFiles {
    pub trace: PathBuf,
    pub grids: Vec<PathBuf>,
    pub plot: PathBuf,
}

pub fn grid_file_name(tick: u64) -> String {
    format!("tick_{tick:06}.pgm")
}

/// Tab-separated plot data: one row per tick with the largest threat level,
/// the selected behavior and each participant's largest threat level.
pub fn plot_table(trace: &TraceLog) -> String {
    let ids: Vec<_> = trace.header.scenario.participants.iter().map(|p| &p.id).collect();
    let mut out = String::from("tick\tclock\ttheta_max\tselected");
    for id in &ids {
        let _ = write!(out, "\t{id}");
    }
    out.push('\n');
    for r in &trace.ticks {
        let theta_max = r.threats.entries().map(|e| e.threat).fold(0.0, f64::max);
        let _ = write!(
            out,
            "{}\t{:.1}\t{:.6}\t{}",
            r.tick, r.clock, theta_max, r.result.selected
        );
        for id in &ids {
            let theta = r
                .threats
                .row(id)
                .map(|row| row.entries.iter().map(|e| e.threat).fold(0.0, f64::max))
                .unwrap_or(0.0);
            let _ = write!(out, "\t{theta:.6}");
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `trace.jsonl`, `grids/tick_NNNNNN.pgm` per tick and `plot.tsv`
/// under `out_dir`. Contents depend only on the trace.
pub fn emit_outputs(trace: &TraceLog, out_dir: &Path) -> Result<OutputFiles, RunError> {
    let grid_dir = out_dir.join(GRID_DIR);
    fs::create_dir_all(&grid_dir).map_err(|source| RunError::Io {
        path: grid_dir.clone(),
        source,
    })?;
    let mut files = OutputFiles {
        trace: out_dir.join(TRACE_FILE),
        plot: out_dir.join(PLOT_FILE),
        grids: Vec::with_capacity(trace.ticks.len()),
    };
    write(&files.trace, trace.to_jsonl().as_bytes())?;
    let s = &trace.header.scenario;
    for r in &trace.ticks {
        let grid = render_grid(&world_at(s, r), &s.grid);
        let path = grid_dir.join(grid_file_name(r.tick));
        write(&path, &grid.to_pgm())?;
        files.grids.push(path);
    }
    write(&files.plot, plot_table(trace).as_bytes())?;
    Ok(files)
}
