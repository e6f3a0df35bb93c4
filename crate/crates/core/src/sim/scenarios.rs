//! Hand-built worlds and the scripted switching regressions run on them.

use serde::{Deserialize, Serialize};

use super::config::{PlannerKind, RunConfig};
use super::episode::run_episode;
use super::log::{CycleEvent, Event};
use crate::error::{Error, Result};
use crate::mldm::OverrideReason;
use crate::roadmap::Scope;
use crate::world::{GeneratorParams, WorldModel, DEFAULT_CELL_SIZE};

/// Robot en route to a far frontier passes an unexplored side room.
pub const EN_ROUTE_ROOM: &str = "en_route_room";
/// Robot starts in a cluttered high-risk pocket next to a clean corridor.
pub const RISKY_POCKET: &str = "risky_pocket";
/// A 10 x 10 m empty room.
pub const EMPTY_ROOM: &str = "empty_room";

pub const HANDMADE: [&str; 3] = [EN_ROUTE_ROOM, RISKY_POCKET, EMPTY_ROOM];

/// ASCII canvas with `(x, y)` measured from the bottom-left corner.
struct Canvas {
    w: usize,
    h: usize,
    rows: Vec<Vec<char>>,
}

impl Canvas {
    fn new(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            rows: vec![vec!['#'; w]; h],
        }
    }

    fn put(&mut self, x: usize, y: usize, ch: char) {
        if x < self.w && y < self.h {
            self.rows[self.h - 1 - y][x] = ch;
        }
    }

    /// Fill the inclusive rectangle.
    fn rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, ch: char) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.put(x, y, ch);
            }
        }
    }

    fn build(self, name: &str) -> Result<WorldModel> {
        let rows: Vec<String> = self.rows.into_iter().map(|r| r.into_iter().collect()).collect();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        Ok(WorldModel::from_ascii(&refs, DEFAULT_CELL_SIZE)?.with_params(GeneratorParams::Handmade {
            name: name.to_string(),
        }))
    }
}

fn en_route_room() -> Result<WorldModel> {
    let mut c = Canvas::new(82, 34);
    // West room the robot explores first.
    c.rect(1, 6, 24, 27, '.');
    // Corridor east.
    c.rect(25, 15, 80, 17, '.');
    // Side room behind a narrow door, out of sensor reach from the spawn.
    c.rect(52, 18, 53, 18, '.');
    c.rect(44, 19, 66, 32, '.');
    // Hall at the far end.
    c.rect(68, 2, 80, 14, '.');
    c.put(26, 16, 'S');
    c.build(EN_ROUTE_ROOM)
}

fn risky_pocket() -> Result<WorldModel> {
    let mut c = Canvas::new(90, 40);
    // Cluttered pocket on rough ground. The staggered posts leave no long
    // straight run through it.
    c.rect(1, 12, 18, 27, 'r');
    for y in 12..=27 {
        for x in 1..=16 {
            if (x + 2 * y) % 5 == 0 {
                c.put(x, y, '#');
            }
        }
    }
    // Clean corridor to a large clean hall.
    c.rect(19, 18, 50, 20, '.');
    c.rect(51, 1, 88, 38, '.');
    c.put(17, 19, 'S');
    c.build(RISKY_POCKET)
}

fn empty_room() -> Result<WorldModel> {
    let mut c = Canvas::new(22, 22);
    c.rect(1, 1, 20, 20, '.');
    c.put(10, 10, 'S');
    c.build(EMPTY_ROOM)
}

/// Build a named hand-made world.
pub fn handmade_world(name: &str) -> Result<WorldModel> {
    match name {
        EN_ROUTE_ROOM => en_route_room(),
        RISKY_POCKET => risky_pocket(),
        EMPTY_ROOM => empty_room(),
        other => Err(Error::Config(format!(
            "unknown handmade world {other:?}; expected one of {HANDMADE:?}"
        ))),
    }
}

/// Episode config used by the scripted scenarios.
pub fn scenario_config(world: &str, planner: PlannerKind) -> RunConfig {
    let mut cfg = RunConfig::new(
        planner,
        GeneratorParams::Handmade {
            name: world.to_string(),
        },
        1,
        600,
    );
    cfg.name = Some(format!("{world}-{planner}"));
    cfg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    pub planner: PlannerKind,
    pub passed: bool,
    pub detail: String,
}

fn cycles(events: &[Event]) -> impl Iterator<Item = &CycleEvent> {
    events.iter().filter_map(|e| match e {
        Event::Cycle(c) => Some(c.as_ref()),
        _ => None,
    })
}

/// Cycles that chose the local policy while a global goal was still active.
pub fn global_to_local_switches(events: &[Event]) -> usize {
    cycles(events)
        .filter(|c| c.chosen == Some(Scope::Local) && c.active_global_goal.is_some())
        .count()
}

/// Decisions whose risk override fired.
pub fn risk_overrides(events: &[Event]) -> usize {
    cycles(events)
        .filter_map(|c| c.decision.as_ref())
        .filter(|d| d.overridden && d.reason == Some(OverrideReason::JExceeded))
        .count()
}

/// Cycles that executed a local policy whose risk exceeded `j_max`.
pub fn risky_local_executions(events: &[Event], j_max: f64) -> usize {
    cycles(events)
        .filter(|c| c.chosen == Some(Scope::Local))
        .filter(|c| c.local.as_ref().is_some_and(|l| l.policy.risk > j_max))
        .count()
}

/// Run both scripted scenarios under the switching planner and under HCP.
pub fn scenario_regressions() -> Result<Vec<ScenarioOutcome>> {
    let mut out = Vec::new();
    for planner in [PlannerKind::Mldm, PlannerKind::Hcp] {
        let run = run_episode(&scenario_config(EN_ROUTE_ROOM, planner))?;
        let n = global_to_local_switches(&run.events);
        let passed = match planner {
            PlannerKind::Mldm => n >= 1,
            _ => n == 0,
        };
        out.push(ScenarioOutcome {
            scenario: EN_ROUTE_ROOM.into(),
            planner,
            passed,
            detail: format!("{n} local choices while a global goal was active"),
        });
    }
    for planner in [PlannerKind::Mldm, PlannerKind::Hcp] {
        let run = run_episode(&scenario_config(RISKY_POCKET, planner))?;
        let overrides = risk_overrides(&run.events);
        let risky = risky_local_executions(&run.events, run.record.j_max);
        let passed = match planner {
            PlannerKind::Mldm => overrides >= 1,
            _ => overrides == 0 && risky >= 1,
        };
        out.push(ScenarioOutcome {
            scenario: RISKY_POCKET.into(),
            planner,
            passed,
            detail: format!(
                "{overrides} risk overrides, {risky} local policies above j_max = {:.4}",
                run.record.j_max
            ),
        });
    }
    Ok(out)
}
