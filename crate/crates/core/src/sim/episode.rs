//! The closed planning loop for one episode.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{PlannerKind, RunConfig};
use super::log::{
    to_ndjson, CandidateRecord, CycleEvent, DecisionSummary, EndEvent, Event, IntervalMetrics, LogHeader,
    StepRecord, Termination, LOG_FORMAT, LOG_VERSION,
};
use crate::error::{Error, Result};
use crate::grid::{seed_from, Cell, Point, Pose};
use crate::mldm::{SwitchDecision, Switcher};
use crate::motion::{astar, execute_step, PathPair};
use crate::planners::{plan_global, plan_hfe, plan_local, plan_nbv, Policy};
use crate::risk::{straight_path_risk_quantile, RiskCache, RiskField};
use crate::roadmap::{build_local_irm, GlobalIrm, Scope};
use crate::world::{sense, BeliefGrid, WorldDocument, WorldModel};

const RISK_STREAM: u64 = 0x7269_736b;
const PLANNER_STREAM: u64 = 0x706c_616e;

/// Outcome of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub label: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub world_seed: u64,
    pub world_kind: String,
    pub reachable_free_m2: f64,
    pub j_max: f64,
    pub intervals: Vec<IntervalMetrics>,
    pub final_coverage_m2: f64,
    /// Covered free cells over reachable free cells.
    pub coverage_fraction: f64,
    pub steps: usize,
    pub cycles: usize,
    pub distance_m: f64,
    pub collisions: usize,
    pub termination: Termination,
    pub decisions: DecisionSummary,
    /// Not part of the deterministic outcome.
    pub wall_time_s: f64,
    pub event_log: Option<String>,
}

impl RunRecord {
    pub fn elapsed_minutes(&self, steps_per_minute: usize) -> f64 {
        self.steps as f64 / steps_per_minute as f64
    }

    /// Coverage rate in square metres per simulated minute.
    pub fn rate(&self, steps_per_minute: usize) -> f64 {
        let m = self.elapsed_minutes(steps_per_minute);
        if m > 0.0 {
            self.final_coverage_m2 / m
        } else {
            0.0
        }
    }

    /// Coverage at `step`, holding the final value after termination.
    pub fn coverage_at(&self, step: usize) -> f64 {
        self.intervals
            .iter()
            .take_while(|m| m.step <= step)
            .last()
            .map_or(0.0, |m| m.covered_m2)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeOutput {
    pub record: RunRecord,
    pub events: Vec<Event>,
}

impl EpisodeOutput {
    pub fn ndjson(&self) -> String {
        to_ndjson(&self.events)
    }

    /// Write `runrecord.json` and `events.ndjson` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let log = dir.join("events.ndjson");
        std::fs::write(&log, self.ndjson())?;
        self.record.event_log = Some("events.ndjson".into());
        std::fs::write(dir.join("runrecord.json"), self.record.to_json()?)?;
        Ok(())
    }
}

/// Everything a cycle produced before execution.
struct Plan {
    local: Option<CandidateRecord>,
    global: Option<CandidateRecord>,
    decision: Option<SwitchDecision>,
    chosen: Scope,
    path: PathPair,
}

struct Episode<'a> {
    cfg: &'a RunConfig,
    world: WorldModel,
    belief: BeliefGrid,
    cache: RiskCache,
    girm: GlobalIrm,
    switcher: Switcher,
    rng: ChaCha8Rng,
    pose: Pose,
    steps: usize,
    cycles: usize,
    distance: f64,
    collisions: usize,
    summary: DecisionSummary,
    target_cells: usize,
    /// Global goal being pursued, with the policy that chose it.
    active_goal: Option<(Cell, Policy)>,
    events: Vec<Event>,
    intervals: Vec<IntervalMetrics>,
}

/// Run one episode to termination.
pub fn run_episode(cfg: &RunConfig) -> Result<EpisodeOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let world = cfg.world.generate(cfg.world_seed())?;
    run_episode_in(cfg, world, started)
}

/// Run one episode on a prebuilt world.
pub fn run_episode_on(cfg: &RunConfig, world: WorldModel) -> Result<EpisodeOutput> {
    cfg.validate()?;
    run_episode_in(cfg, world, Instant::now())
}

fn run_episode_in(cfg: &RunConfig, world: WorldModel, started: Instant) -> Result<EpisodeOutput> {
    let field = Arc::new(RiskField::from_world(
        &world,
        cfg.risk,
        seed_from(&[cfg.world_seed(), RISK_STREAM]),
    )?);
    let mut cache = RiskCache::new(field);
    let j_max = match cfg.switch.j_max {
        Some(j) => j,
        None => straight_path_risk_quantile(
            &mut cache,
            &world,
            cfg.local.horizon,
            cfg.switch.j_quantile,
            cfg.switch.eps_j,
        ),
    };
    let switcher = Switcher::new(cfg.switch.resolve(j_max)).map_err(|e| Error::Config(e.to_string()))?;
    let reachable = world.reachable_free_count();
    let spawn = world.spawn();
    let pose = Pose::at_cell(spawn, world.cell_size());
    let mut belief = BeliefGrid::for_world(&world);
    sense(&world, &mut belief, &pose, &cfg.sensor)?;

    let header = LogHeader {
        format: LOG_FORMAT.into(),
        version: LOG_VERSION,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        world: WorldDocument::from(&world),
        j_max,
        reachable_free_cells: reachable,
    };
    let mut ep = Episode {
        cfg,
        girm: GlobalIrm::new(cfg.global, spawn),
        belief,
        cache,
        switcher,
        rng: ChaCha8Rng::seed_from_u64(seed_from(&[cfg.seed, PLANNER_STREAM])),
        pose,
        steps: 0,
        cycles: 0,
        distance: 0.0,
        collisions: 0,
        summary: DecisionSummary::default(),
        target_cells: ((cfg.coverage_target * reachable as f64) - 1e-9).ceil() as usize,
        active_goal: None,
        events: vec![Event::Header(Box::new(header))],
        intervals: Vec::new(),
        world,
    };
    ep.push_metrics();

    let termination = loop {
        if ep.covered_enough() {
            break Termination::Coverage;
        }
        if ep.steps >= cfg.step_budget {
            break Termination::Budget;
        }
        match ep.cycle()? {
            true => {}
            false => break Termination::NoPolicy,
        }
    };
    if ep.intervals.last().is_none_or(|m| m.step != ep.steps) {
        ep.push_metrics();
    }
    let covered = ep.belief.covered_free_count();
    let area = ep.world.cell_area();
    ep.events.push(Event::End(EndEvent {
        step: ep.steps,
        termination,
        covered_cells: ep.belief.covered_count(),
        covered_m2: covered as f64 * area,
    }));
    let record = RunRecord {
        config_hash: cfg.hash(),
        label: cfg.label(),
        planner: cfg.planner,
        seed: cfg.seed,
        world_seed: cfg.world_seed(),
        world_kind: cfg.world.kind().to_string(),
        reachable_free_m2: reachable as f64 * area,
        j_max,
        final_coverage_m2: covered as f64 * area,
        coverage_fraction: if reachable > 0 {
            covered as f64 / reachable as f64
        } else {
            1.0
        },
        steps: ep.steps,
        cycles: ep.cycles,
        distance_m: ep.distance,
        collisions: ep.collisions,
        termination,
        decisions: ep.summary,
        intervals: ep.intervals,
        wall_time_s: started.elapsed().as_secs_f64(),
        event_log: None,
    };
    log::debug!(
        "{}: {:?} after {} steps, {:.1} m2 covered",
        record.label,
        termination,
        record.steps,
        record.final_coverage_m2
    );
    Ok(EpisodeOutput {
        record,
        events: ep.events,
    })
}

fn centers(cells: &[Cell], cs: f64) -> Vec<Point> {
    cells.iter().map(|c| Point::center_of(*c, cs)).collect()
}

impl Episode<'_> {
    fn covered_enough(&self) -> bool {
        self.belief.covered_free_count() >= self.target_cells
    }

    fn robot(&self) -> Cell {
        self.pose.cell(self.world.cell_size())
    }

    fn push_metrics(&mut self) {
        self.intervals.push(IntervalMetrics {
            step: self.steps,
            minutes: self.steps as f64 / self.cfg.steps_per_minute as f64,
            covered_m2: self.belief.covered_free_count() as f64 * self.world.cell_area(),
            distance_m: self.distance,
            collisions: self.collisions,
            decisions: self.summary,
        });
        self.events.push(Event::Metrics(*self.intervals.last().expect("just pushed")));
    }

    /// Reference path for `policy` from the robot's cell.
    fn reference(&self, policy: &Policy) -> Vec<Point> {
        let cs = self.world.cell_size();
        match policy.scope {
            Scope::Local => centers(&policy.cells, cs),
            Scope::Global => {
                match astar(&self.belief, self.cache.field(), self.robot(), policy.goal(), self.cfg.risk_weight) {
                    Some(p) => p.waypoints(cs),
                    None => {
                        let mut cells = vec![self.robot()];
                        cells.extend_from_slice(&policy.cells[1..]);
                        centers(&cells, cs)
                    }
                }
            }
        }
    }

    fn evaluate(&self, mut policy: Policy) -> Result<(CandidateRecord, PathPair)> {
        policy.created_at = self.cycles as u64;
        let pair = PathPair::plan(self.reference(&policy), &self.cfg.kinodynamic, &self.belief)?;
        Ok((
            CandidateRecord {
                policy,
                discrepancy: pair.discrepancy,
            },
            pair,
        ))
    }

    fn local_candidate(&mut self) -> Result<Option<(CandidateRecord, PathPair)>> {
        let robot = self.robot();
        let graph = build_local_irm(
            &self.belief,
            &mut self.cache,
            robot,
            self.cfg.local.radius,
            self.cfg.local.horizon,
            &self.cfg.sensor,
        )?;
        match plan_local(&graph, &self.cfg.reward, self.cfg.local.horizon, self.cfg.local.budget) {
            Some(p) => Ok(Some(self.evaluate(p)?)),
            None => Ok(None),
        }
    }

    fn global_candidate(&mut self, greedy: bool) -> Result<Option<(CandidateRecord, PathPair)>> {
        let robot = self.robot();
        self.girm.update(&self.belief, robot, &mut self.cache);
        let graph = self.girm.graph();
        let policy = if greedy {
            plan_hfe(graph, &self.cfg.reward, graph.robot)
        } else {
            plan_global(graph, &self.cfg.reward, graph.robot, self.cfg.global.horizon)
        };
        match policy {
            Some(p) => Ok(Some(self.evaluate(p)?)),
            None => Ok(None),
        }
    }

    /// True while `goal` is farther than the commit radius and still borders
    /// unknown space.
    fn goal_open(&self, goal: Cell) -> bool {
        let cs = self.world.cell_size();
        if self.pose.point().dist(Point::center_of(goal, cs)) <= self.cfg.commit_radius {
            return false;
        }
        (-2..=2).any(|dy| {
            (-2..=2).any(|dx| {
                let c = goal.offset(dx, dy);
                self.belief.is_free(c) && self.belief.unknown_neighbors(c) > 0
            })
        })
    }

    fn plan(&mut self) -> Result<Option<Plan>> {
        match self.cfg.planner {
            PlannerKind::Mldm => {
                let local = self.local_candidate()?;
                let global = self.global_candidate(false)?;
                self.switcher.record(Scope::Local, local.is_some());
                self.switcher.record(Scope::Global, global.is_some());
                let factors = |c: &Option<(CandidateRecord, PathPair)>| {
                    c.as_ref()
                        .map(|(r, _)| (r.policy.utility, r.policy.risk, r.discrepancy))
                };
                let decision = match self.switcher.decide(factors(&local), factors(&global)) {
                    Ok(d) => d,
                    Err(Error::NoPolicy) => return Ok(None),
                    Err(e) => return Err(e),
                };
                let chosen = decision.chosen;
                let (l, g) = (local.map(|(r, p)| (r, Some(p))), global.map(|(r, p)| (r, Some(p))));
                let (mut l, mut g) = (l, g);
                let path = match chosen {
                    Scope::Local => l.as_mut().and_then(|x| x.1.take()),
                    Scope::Global => g.as_mut().and_then(|x| x.1.take()),
                }
                .expect("chosen candidate exists");
                Ok(Some(Plan {
                    local: l.map(|x| x.0),
                    global: g.map(|x| x.0),
                    decision: Some(decision),
                    chosen,
                    path,
                }))
            }
            PlannerKind::Hcp => {
                if let Some((_, policy)) = self.active_goal.clone() {
                    let (rec, path) = self.evaluate(policy)?;
                    return Ok(Some(Plan {
                        local: None,
                        global: Some(rec),
                        decision: None,
                        chosen: Scope::Global,
                        path,
                    }));
                }
                if let Some((rec, path)) = self.local_candidate()? {
                    return Ok(Some(Plan {
                        local: Some(rec),
                        global: None,
                        decision: None,
                        chosen: Scope::Local,
                        path,
                    }));
                }
                Ok(self.global_candidate(false)?.map(|(rec, path)| Plan {
                    local: None,
                    global: Some(rec),
                    decision: None,
                    chosen: Scope::Global,
                    path,
                }))
            }
            PlannerKind::Hfe => Ok(self.global_candidate(true)?.map(|(rec, path)| Plan {
                local: None,
                global: Some(rec),
                decision: None,
                chosen: Scope::Global,
                path,
            })),
            PlannerKind::Nbv => {
                let robot = self.robot();
                let policy = plan_nbv(
                    &self.belief,
                    &mut self.cache,
                    robot,
                    &self.cfg.nbv,
                    &self.cfg.reward,
                    &self.cfg.sensor,
                    &mut self.rng,
                );
                match policy {
                    Some(p) => {
                        let (rec, path) = self.evaluate(p)?;
                        Ok(Some(Plan {
                            local: Some(rec),
                            global: None,
                            decision: None,
                            chosen: Scope::Local,
                            path,
                        }))
                    }
                    None => Ok(None),
                }
            }
        }
    }

    /// One plan-execute cycle. Returns false when no policy was found.
    fn cycle(&mut self) -> Result<bool> {
        if let Some((goal, _)) = &self.active_goal {
            if !self.goal_open(*goal) {
                self.active_goal = None;
            }
        }
        let active_before = self.active_goal.as_ref().map(|(g, _)| *g);
        let start_pose = self.pose;
        let start_step = self.steps;
        let Some(plan) = self.plan()? else {
            return Ok(false);
        };
        self.summary.cycles += 1;
        match plan.chosen {
            Scope::Local => self.summary.local += 1,
            Scope::Global => self.summary.global += 1,
        }
        if plan.decision.as_ref().is_some_and(|d| d.overridden) {
            self.summary.overrides += 1;
        }
        self.active_goal = match plan.chosen {
            Scope::Local => None,
            Scope::Global => {
                let policy = plan.global.as_ref().expect("global plan").policy.clone();
                Some((policy.goal(), policy))
            }
        };
        let steps = self.execute(&plan.path)?;
        self.events.push(Event::Cycle(Box::new(CycleEvent {
            cycle: self.cycles,
            step: start_step,
            pose: start_pose,
            active_global_goal: active_before,
            local: plan.local,
            global: plan.global,
            decision: plan.decision,
            chosen: Some(plan.chosen),
            path: Some(plan.path),
            steps,
            covered_cells: self.belief.covered_count(),
        })));
        self.cycles += 1;
        Ok(true)
    }

    fn after_step(&mut self) {
        if self.steps % self.cfg.metrics_interval == 0 {
            self.push_metrics();
        }
    }

    fn execute(&mut self, path: &PathPair) -> Result<Vec<StepRecord>> {
        let limit = self.cfg.replan_interval.min(self.cfg.step_budget - self.steps);
        let mut out = Vec::new();
        for &p in path.executed.iter().skip(1) {
            if out.len() >= limit || self.covered_enough() {
                break;
            }
            if p.dist(self.pose.point()) < 1e-9 {
                break;
            }
            let o = execute_step(&self.world, &mut self.belief, &self.pose, p, &self.cfg.sensor)?;
            self.steps += 1;
            out.push(StepRecord {
                step: self.steps,
                pose: o.pose,
                collided: o.collided,
                newly_covered: o.newly_covered,
            });
            if o.collided {
                self.collisions += 1;
                self.after_step();
                break;
            }
            self.pose = o.pose;
            self.distance += o.distance;
            let cell = self.robot();
            self.girm.observe_pose(&self.belief, &self.cache, cell);
            self.after_step();
        }
        if out.is_empty() {
            // Nothing executable: spend a step in place so the budget still runs down.
            self.steps += 1;
            out.push(StepRecord {
                step: self.steps,
                pose: self.pose,
                collided: false,
                newly_covered: 0,
            });
            self.after_step();
        }
        Ok(out)
    }
}
