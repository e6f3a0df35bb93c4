//! Batch experiments: many episodes in parallel, aggregated into summary
//! tables.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::episode::{run_episode, RunRecord};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BatchEntry {
    pub config_index: usize,
    pub rep: usize,
    pub config: RunConfig,
    pub outcome: std::result::Result<RunRecord, String>,
}

/// One row per config: final coverage statistics and the coverage rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub planner: String,
    pub world: String,
    pub reps: usize,
    pub failures: usize,
    pub budget_minutes: f64,
    pub coverage_mean_m2: f64,
    pub coverage_min_m2: f64,
    pub coverage_max_m2: f64,
    pub rate_mean_m2_per_min: f64,
}

/// Coverage statistics at one metrics interval for one config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub label: String,
    pub step: usize,
    pub minutes: f64,
    pub coverage_mean_m2: f64,
    pub coverage_min_m2: f64,
    pub coverage_max_m2: f64,
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    pub entries: Vec<BatchEntry>,
    pub summary: Vec<SummaryRow>,
    pub intervals: Vec<IntervalRow>,
}

/// Config for repetition `rep`: the seed advances by `rep`, and so does the
/// world seed unless it was pinned.
pub fn rep_config(cfg: &RunConfig, rep: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.seed = cfg.seed.wrapping_add(rep as u64);
    c
}

/// Run every (config, repetition) pair on up to `parallelism` threads.
/// Failed episodes are recorded and the batch carries on.
pub fn run_batch(configs: &[RunConfig], reps: usize, parallelism: usize) -> Result<BatchResult> {
    if reps == 0 || parallelism == 0 {
        return Err(Error::Config("reps and parallelism must be positive".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..reps).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidState(e.to_string()))?;
    let entries: Vec<BatchEntry> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, r)| {
                let config = rep_config(&configs[i], r);
                let outcome = run_episode(&config).map(|o| o.record).map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!("{} rep {r} failed: {e}", config.label());
                }
                BatchEntry {
                    config_index: i,
                    rep: r,
                    config,
                    outcome,
                }
            })
            .collect()
    });
    let (summary, intervals) = summarize(configs, &entries);
    Ok(BatchResult {
        entries,
        summary,
        intervals,
    })
}

fn stats(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

/// Aggregate entries per config. Records that ended early hold their final
/// coverage for later intervals.
pub fn summarize(configs: &[RunConfig], entries: &[BatchEntry]) -> (Vec<SummaryRow>, Vec<IntervalRow>) {
    let mut summary = Vec::new();
    let mut intervals = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let mine: Vec<&BatchEntry> = entries.iter().filter(|e| e.config_index == i).collect();
        let records: Vec<&RunRecord> = mine.iter().filter_map(|e| e.outcome.as_ref().ok()).collect();
        let finals: Vec<f64> = records.iter().map(|r| r.final_coverage_m2).collect();
        let rates: Vec<f64> = records.iter().map(|r| r.rate(cfg.steps_per_minute)).collect();
        let (mean, min, max) = stats(&finals);
        let label = cfg.label();
        summary.push(SummaryRow {
            label: label.clone(),
            planner: cfg.planner.to_string(),
            world: cfg.world.kind().to_string(),
            reps: mine.len(),
            failures: mine.len() - records.len(),
            budget_minutes: cfg.step_budget as f64 / cfg.steps_per_minute as f64,
            coverage_mean_m2: mean,
            coverage_min_m2: min,
            coverage_max_m2: max,
            rate_mean_m2_per_min: stats(&rates).0,
        });
        let mut step = 0;
        loop {
            let at: Vec<f64> = records.iter().map(|r| r.coverage_at(step)).collect();
            let (mean, min, max) = stats(&at);
            intervals.push(IntervalRow {
                label: label.clone(),
                step,
                minutes: step as f64 / cfg.steps_per_minute as f64,
                coverage_mean_m2: mean,
                coverage_min_m2: min,
                coverage_max_m2: max,
            });
            if step >= cfg.step_budget {
                break;
            }
            step = (step + cfg.metrics_interval).min(cfg.step_budget);
        }
    }
    (summary, intervals)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidState(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidState(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

impl BatchResult {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.outcome.is_err()).count()
    }

    /// Write `summary.csv`, `intervals.csv` and one `runrecord.json` per
    /// episode under `runs/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("summary.csv"), &self.summary)?;
        write_csv(&dir.join("intervals.csv"), &self.intervals)?;
        for e in &self.entries {
            let sub = dir
                .join("runs")
                .join(format!("{:03}-{}-rep{}", e.config_index, sanitize(&e.config.label()), e.rep));
            std::fs::create_dir_all(&sub)?;
            match &e.outcome {
                Ok(r) => std::fs::write(sub.join("runrecord.json"), r.to_json()?)?,
                Err(msg) => std::fs::write(sub.join("error.txt"), msg)?,
            }
        }
        Ok(())
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
