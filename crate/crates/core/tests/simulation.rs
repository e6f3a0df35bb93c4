//! Closed-loop episodes, event logs, replay and batches.

use std::io::Cursor;

use covswitch::sim::log::{Event, Termination};
use covswitch::sim::scenarios::{scenario_config, EMPTY_ROOM, RISKY_POCKET};
use covswitch::sim::{parse_log, read_log, replay, run_batch, run_episode, EpisodeOutput};
use covswitch::world::CaveParams;
use covswitch::{Error, GeneratorParams, PlannerKind, RunConfig, RunRecord, Scope};

fn cave(planner: PlannerKind, seed: u64, budget: usize) -> RunConfig {
    RunConfig::new(planner, GeneratorParams::Cave(CaveParams::new(40, 40, 0.4)), seed, budget)
}

fn strip_time(mut r: RunRecord) -> RunRecord {
    r.wall_time_s = 0.0;
    r
}

fn cycles(out: &EpisodeOutput) -> impl Iterator<Item = &covswitch::sim::log::CycleEvent> {
    out.events.iter().filter_map(|e| match e {
        Event::Cycle(c) => Some(c.as_ref()),
        _ => None,
    })
}

#[test]
fn episodes_are_deterministic_for_every_planner() {
    for planner in PlannerKind::ALL {
        let cfg = cave(planner, 4, 150);
        let a = run_episode(&cfg).unwrap();
        let b = run_episode(&cfg).unwrap();
        assert_eq!(a.ndjson(), b.ndjson(), "{planner}");
        assert_eq!(strip_time(a.record), strip_time(b.record), "{planner}");
    }
}

#[test]
fn different_seeds_give_different_worlds() {
    let a = run_episode(&cave(PlannerKind::Hcp, 1, 60)).unwrap();
    let b = run_episode(&cave(PlannerKind::Hcp, 2, 60)).unwrap();
    assert_ne!(a.record.world_seed, b.record.world_seed);
    assert_ne!(a.ndjson(), b.ndjson());
}

#[test]
fn coverage_never_decreases() {
    for planner in PlannerKind::ALL {
        let out = run_episode(&cave(planner, 9, 200)).unwrap();
        let r = &out.record;
        assert!(r.intervals.windows(2).all(|w| w[0].covered_m2 <= w[1].covered_m2));
        let counts: Vec<usize> = cycles(&out).map(|c| c.covered_cells).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.steps <= 200);
        assert!(r.coverage_fraction <= 1.0);
    }
}

#[test]
fn log_layout() {
    let out = run_episode(&cave(PlannerKind::Mldm, 3, 80)).unwrap();
    let text = out.ndjson();
    let lines: Vec<&str> = text.lines().collect();
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["type"], "header");
    assert_eq!(first["format"], "covswitch-events");
    assert_eq!(first["version"], 1);
    let last: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
    assert_eq!(last["type"], "end");
    for c in cycles(&out) {
        let d = c.decision.as_ref().expect("switching planner logs decisions");
        assert_eq!(c.chosen, Some(d.chosen));
    }
}

#[test]
fn empty_room_is_fully_covered() {
    let out = run_episode(&scenario_config(EMPTY_ROOM, PlannerKind::Mldm)).unwrap();
    assert_eq!(out.record.termination, Termination::Coverage);
    assert!(out.record.coverage_fraction >= 0.99);
    // Coverage rises within the first ten steps.
    let early: Vec<usize> = cycles(&out)
        .flat_map(|c| c.steps.iter())
        .take(10)
        .map(|s| s.newly_covered)
        .collect();
    assert!(early.iter().any(|&n| n > 0));
}

#[test]
fn switching_planner_never_prefers_a_risky_policy_with_an_alternative() {
    let out = run_episode(&scenario_config(RISKY_POCKET, PlannerKind::Mldm)).unwrap();
    let j_max = out.record.j_max;
    let mut overrides = 0;
    for c in cycles(&out) {
        let (Some(d), Some(chosen)) = (&c.decision, c.chosen) else { continue };
        let both = c.local.is_some() && c.global.is_some();
        let risk = |s: Scope| d.scored(s).map(|s| s.candidate.risk);
        if both && risk(d.argmax).unwrap() > j_max {
            // The argmax was too risky, so the other policy runs.
            assert!(d.overridden);
            assert_ne!(chosen, d.argmax);
            overrides += 1;
        }
        if both && risk(chosen).unwrap() > j_max {
            assert!(d.overridden, "cycle {}: risky policy chosen on merit", c.cycle);
        }
    }
    assert!(overrides > 0);
}

#[test]
fn hcp_logs_no_decisions() {
    let out = run_episode(&cave(PlannerKind::Hcp, 5, 100)).unwrap();
    assert!(cycles(&out).all(|c| c.decision.is_none()));
    assert_eq!(out.record.decisions.overrides, 0);
}

#[test]
fn replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for planner in [PlannerKind::Mldm, PlannerKind::Nbv] {
        let mut out = run_episode(&cave(planner, 6, 120)).unwrap();
        out.write(dir.path()).unwrap();
        let record = RunRecord::from_json(&std::fs::read_to_string(dir.path().join("runrecord.json")).unwrap()).unwrap();
        assert_eq!(record.event_log.as_deref(), Some("events.ndjson"));
        let log = read_log(&dir.path().join("events.ndjson")).unwrap();
        let report = replay(&log).unwrap();
        assert!(report.ok(), "{:?}", report.mismatches);
        assert!(report.complete);
        assert_eq!(report.frames.len(), out.record.cycles);
        assert!(report.warnings.is_empty());
    }
}

#[test]
fn truncated_log_replays_its_prefix() {
    let out = run_episode(&cave(PlannerKind::Mldm, 7, 120)).unwrap();
    let text = out.ndjson();
    let lines: Vec<&str> = text.lines().collect();
    let keep = lines.len() / 2;
    let mut cut = lines[..keep].join("\n");
    cut.push('\n');
    cut.push_str(&lines[keep][..lines[keep].len() / 2]);
    let log = parse_log(Cursor::new(cut)).unwrap();
    assert_eq!(log.truncated_at, Some(keep + 1));
    let report = replay(&log).unwrap();
    assert!(report.ok());
    assert!(!report.complete);
    assert_eq!(report.warnings.len(), 2, "{:?}", report.warnings);
}

#[test]
fn log_header_is_validated() {
    let out = run_episode(&cave(PlannerKind::Hcp, 7, 30)).unwrap();
    let text = out.ndjson();
    let bumped = text.replacen("\"version\":1", "\"version\":2", 1);
    assert!(matches!(parse_log(Cursor::new(bumped)), Err(Error::Version { .. })));
    let foreign = text.replacen("covswitch-events", "other-format", 1);
    assert!(matches!(parse_log(Cursor::new(foreign)), Err(Error::Malformed { .. })));
    assert!(parse_log(Cursor::new("")).is_err());
}

#[test]
fn replay_catches_tampering() {
    let out = run_episode(&cave(PlannerKind::Mldm, 8, 100)).unwrap();
    let mut log = parse_log(Cursor::new(out.ndjson())).unwrap();
    let c = log.cycles.iter_mut().find(|c| c.decision.is_some()).unwrap();
    let d = c.decision.as_mut().unwrap();
    if let Some(s) = d.local.as_mut().or(d.global.as_mut()) {
        s.score += 1.0;
    }
    c.covered_cells += 1;
    let report = replay(&log).unwrap();
    assert!(report.mismatches.len() >= 2, "{:?}", report.mismatches);
}

#[test]
fn batch_summary_matches_records() {
    let configs = vec![cave(PlannerKind::Hcp, 20, 90), cave(PlannerKind::Nbv, 20, 90)];
    let batch = run_batch(&configs, 2, 2).unwrap();
    assert_eq!(batch.entries.len(), 4);
    assert_eq!(batch.failures(), 0);
    for (i, row) in batch.summary.iter().enumerate() {
        let finals: Vec<f64> = batch
            .entries
            .iter()
            .filter(|e| e.config_index == i)
            .map(|e| e.outcome.as_ref().unwrap().final_coverage_m2)
            .collect();
        assert_eq!(finals.len(), 2);
        let mean = (finals[0] + finals[1]) / 2.0;
        assert!((row.coverage_mean_m2 - mean).abs() < 1e-12);
        assert_eq!(row.coverage_min_m2, finals[0].min(finals[1]));
        assert_eq!(row.coverage_max_m2, finals[0].max(finals[1]));
        assert_eq!(row.budget_minutes, 1.5);
    }
    // Repetitions are independent of scheduling.
    let serial = run_batch(&configs, 2, 1).unwrap();
    assert_eq!(serial.summary, batch.summary);

    let dir = tempfile::tempdir().unwrap();
    batch.write(dir.path()).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "label");
    assert!(headers.iter().any(|h| h == "rate_mean_m2_per_min"));
    assert_eq!(rdr.records().count(), 2);
    assert!(dir.path().join("intervals.csv").exists());
    let runs = std::fs::read_dir(dir.path().join("runs")).unwrap().count();
    assert_eq!(runs, 4);
}

#[test]
fn batch_rejects_zero_reps() {
    assert!(matches!(
        run_batch(&[cave(PlannerKind::Hcp, 1, 10)], 0, 1),
        Err(Error::Config(_))
    ));
}
