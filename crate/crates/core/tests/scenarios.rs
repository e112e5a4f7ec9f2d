//! End-to-end behavior of the bundled scenarios, outputs and CLI.

use std::path::{Path, PathBuf};
use std::process::Command;

use scene_arbiter::arbiter::EgoBehavior;
use scene_arbiter::scenario::episode::inputs_of;
use scene_arbiter::scenario::{
    arbitrate_tick, emit_outputs, parse_scenario, run_batch, run_episode, Mode, RunError, RunOptions, Scenario,
    TraceLog,
};
use scene_arbiter::threat::{ImpactTime, ObjectBehavior};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

fn load(name: &str) -> Scenario {
    parse_scenario(&std::fs::read_to_string(scenario_path(name)).unwrap()).unwrap()
}

#[test]
fn fixture_kinematics_reproduce_pinned_impact_times() {
    let golden = load("three_car");
    let mut sim = golden.clone();
    sim.mode = Mode::ClosedLoop;
    let trace = run_episode(
        &RunOptions {
            ticks: Some(1),
            seed: None,
        }
        .apply(&sim),
    )
    .unwrap();
    let out = arbitrate_tick(&sim, &inputs_of(&trace.ticks[0])).unwrap();
    for p in &golden.participants {
        let pinned = p.pinned.as_ref().unwrap();
        for k in ObjectBehavior::ALL {
            let want = pinned.impact_times[k.index()];
            let got = out.threats.entry(&p.id, k).unwrap().impact;
            match (want, got) {
                (ImpactTime::At(w), ImpactTime::At(g)) => {
                    assert!((w - g).abs() <= 1.0, "{}/{k}: pinned {w}, simulated {g}", p.id)
                }
                (ImpactTime::Never, ImpactTime::Never) => {}
                _ => panic!("{}/{k}: pinned {want:?}, simulated {got:?}", p.id),
            }
        }
    }
    assert_eq!(out.result.selected, EgoBehavior::ReduceSpeed);
}

#[test]
fn ego_only_keeps_lane_every_tick() {
    let trace = run_episode(&load("ego_only")).unwrap();
    assert_eq!(trace.ticks.len(), 100);
    assert!(trace.ticks.iter().all(|r| r.result.selected == EgoBehavior::KeepLane));
    let last = trace.ticks.last().unwrap();
    assert!((last.ego.x - 99.0 * 0.1 * 25.0).abs() < 1e-9);
    assert_eq!(last.ego.y, 0.0);
}

#[test]
fn one_tick_golden_run_writes_one_of_each() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&run_episode(&load("three_car")).unwrap(), dir.path()).unwrap();
    assert_eq!(files.grids.len(), 1);
    let top: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(top.len(), 3, "{top:?}");
    assert_eq!(std::fs::read_dir(dir.path().join("grids")).unwrap().count(), 1);
    let pgm = std::fs::read(&files.grids[0]).unwrap();
    assert!(pgm.starts_with(b"P5\n100 100\n255\n"));
}

#[test]
fn plot_table_has_one_row_per_tick() {
    let trace = run_episode(&load("three_car_closed_loop")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_outputs(&trace, dir.path()).unwrap();
    let plot = std::fs::read_to_string(files.plot).unwrap();
    let lines: Vec<_> = plot.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0], "tick\tclock\ttheta_max\tselected\tCar1\tCar2\tCar3");
    assert!(lines[1].starts_with("0\t0.0\t0.360000\tReduceSpeed\t"));
}

#[test]
fn trace_round_trips_and_checks_invariants() {
    let trace = run_episode(&load("pedestrian_crossing")).unwrap();
    let text = trace.to_jsonl();
    assert_eq!(TraceLog::from_jsonl(&text).unwrap(), trace);

    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(1, 2);
    let err = TraceLog::from_jsonl(&lines.join("\n")).unwrap_err();
    assert!(matches!(err, RunError::Trace { line: 3, .. }), "{err}");

    let tampered = text.replacen("\"seed\":0", "\"seed\":1", 1);
    assert!(matches!(
        TraceLog::from_jsonl(&tampered),
        Err(RunError::Trace { line: 1, .. })
    ));
    let tampered = text.replacen("\"ticks\":80", "\"ticks\":81", 1);
    assert_ne!(tampered, text);
    assert!(matches!(
        TraceLog::from_jsonl(&tampered),
        Err(RunError::Trace { line: 1, .. })
    ));
}

#[test]
fn seed_changes_sampled_traffic_only_through_seed() {
    let s = load("sampled_traffic");
    let a = run_episode(&s).unwrap();
    let b = run_episode(
        &RunOptions {
            seed: Some(7),
            ticks: None,
        }
        .apply(&s),
    )
    .unwrap();
    assert_ne!(a.header.config_hash, b.header.config_hash);
    assert_ne!(a.ticks[50].participants, b.ticks[50].participants);
    assert_eq!(a.ticks[0].participants, b.ticks[0].participants);
}

#[test]
fn batch_matches_sequential_runs() {
    let scenarios: Vec<_> = ["three_car", "ego_only", "sampled_traffic"].map(load).into();
    let batch = run_batch(&scenarios);
    for (s, t) in scenarios.iter().zip(batch) {
        assert_eq!(t.unwrap().to_jsonl(), run_episode(s).unwrap().to_jsonl());
    }
}

#[test]
fn golden_fixture_holds_the_world_still() {
    let s = RunOptions {
        ticks: Some(3),
        seed: None,
    }
    .apply(&load("three_car"));
    let trace = run_episode(&s).unwrap();
    assert_eq!(trace.ticks.len(), 3);
    assert!(trace
        .ticks
        .windows(2)
        .all(|w| w[0].participants == w[1].participants && w[0].result == w[1].result));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_scene-arbiter"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn cli_surface_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let golden = scenario_path("three_car");
    let r = cli(&["run", golden.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));

    let trace = out.join("trace.jsonl");
    let r = cli(&["explain", trace.to_str().unwrap(), "--tick", "0"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("Selected ReduceSpeed"));

    assert_eq!(cli(&["replay", trace.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(cli(&["validate", golden.to_str().unwrap()]).status.code(), Some(0));

    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(&golden)
        .unwrap()
        .replacen("\"ticks\"", "\"tick_count\"", 1);
    std::fs::write(&bad, text).unwrap();
    assert_eq!(cli(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));

    assert_eq!(
        cli(&["explain", trace.to_str().unwrap(), "--tick", "9"]).status.code(),
        Some(3)
    );
    assert_eq!(cli(&["run", "/nonexistent/scenario.json"]).status.code(), Some(3));
}
