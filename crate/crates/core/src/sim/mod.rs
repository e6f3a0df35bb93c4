//! Closed-loop simulation: episodes, batches, logs, replay and the scripted
//! scenarios.

pub mod batch;
pub mod config;
pub mod episode;
pub mod log;
pub mod replay;
pub mod scenarios;

pub use batch::{run_batch, BatchEntry, BatchResult, IntervalRow, SummaryRow};
pub use config::{load_batch, LocalConfig, PlannerKind, RunConfig, SwitchSettings};
pub use episode::{run_episode, run_episode_on, EpisodeOutput, RunRecord};
pub use log::{Event, Termination};
pub use replay::{parse_log, read_log, replay, ReplayReport};
pub use scenarios::{handmade_world, scenario_regressions, ScenarioOutcome};
