//! Event log records. A log is newline-delimited JSON: one header line, then
//! one line per event.

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::grid::{Cell, Pose};
use crate::mldm::SwitchDecision;
use crate::motion::PathPair;
use crate::planners::Policy;
use crate::roadmap::Scope;
use crate::world::WorldDocument;

pub const LOG_FORMAT: &str = "covswitch-events";
pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: RunConfig,
    pub world: WorldDocument,
    pub j_max: f64,
    pub reachable_free_cells: usize,
}

/// A candidate policy as evaluated in one cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub policy: Policy,
    pub discrepancy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub pose: Pose,
    pub collided: bool,
    pub newly_covered: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleEvent {
    pub cycle: usize,
    pub step: usize,
    pub pose: Pose,
    /// Global goal being pursued when the cycle started, if not yet reached.
    pub active_global_goal: Option<Cell>,
    pub local: Option<CandidateRecord>,
    pub global: Option<CandidateRecord>,
    /// Present for the switching planner only.
    pub decision: Option<SwitchDecision>,
    pub chosen: Option<Scope>,
    pub path: Option<PathPair>,
    pub steps: Vec<StepRecord>,
    /// Covered cells after the cycle's steps.
    pub covered_cells: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub cycles: usize,
    pub local: usize,
    pub global: usize,
    pub overrides: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub step: usize,
    pub minutes: f64,
    pub covered_m2: f64,
    pub distance_m: f64,
    pub collisions: usize,
    pub decisions: DecisionSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Step budget used up.
    Budget,
    /// Coverage target reached.
    Coverage,
    /// No planner produced a policy.
    NoPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndEvent {
    pub step: usize,
    pub termination: Termination,
    pub covered_cells: usize,
    pub covered_m2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Header(Box<LogHeader>),
    Cycle(Box<CycleEvent>),
    Metrics(IntervalMetrics),
    End(EndEvent),
}

/// Serialize events as NDJSON.
pub fn to_ndjson(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}
