//! Policy execution: risk-weighted A* reference paths, a turn-rate limited
//! smoother that produces the executed path, and their discrepancy.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap_angle, Cell, Grid, LineIter, Point, Pose};
use crate::risk::RiskField;
use crate::world::{sense, BeliefGrid, SensorSpec, WorldModel};

/// Path costs are accumulated in fixed point (micro-units) so that equal-cost
/// paths compare equal regardless of summation order.
pub const COST_SCALE: f64 = 1e6;

/// A cell path through believed-free space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    /// `length + risk_weight * sum(mean cell cost)` over entered cells.
    pub cost: f64,
    /// Metres.
    pub length: f64,
}

impl GridPath {
    pub fn waypoints(&self, cell_size: f64) -> Vec<Point> {
        self.cells
            .iter()
            .map(|c| Point::center_of(*c, cell_size))
            .collect()
    }
}

/// Cost in fixed-point units of moving between 8-adjacent cells, or `None`
/// if the move is not allowed in `belief`. Diagonal moves need both
/// orthogonal cells free (no corner cutting).
pub fn transition_cost(
    belief: &BeliefGrid,
    risk: &RiskField,
    from: Cell,
    to: Cell,
    risk_weight: f64,
) -> Option<u64> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    if dx.abs() > 1 || dy.abs() > 1 || (dx == 0 && dy == 0) || !belief.is_free(to) {
        return None;
    }
    if dx != 0 && dy != 0 && !(belief.is_free(from.offset(dx, 0)) && belief.is_free(from.offset(0, dy))) {
        return None;
    }
    let step = if dx != 0 && dy != 0 {
        belief.cell_size() * std::f64::consts::SQRT_2
    } else {
        belief.cell_size()
    };
    Some(((step + risk_weight * risk.mean_cost(to)) * COST_SCALE).round() as u64)
}

fn heuristic(a: Cell, b: Cell, cell_size: f64) -> u64 {
    // Slightly deflated so rounding in transition costs keeps it admissible.
    (a.dist(b) * cell_size * COST_SCALE * 0.999).floor() as u64
}

fn step_length(a: Cell, b: Cell, cell_size: f64) -> f64 {
    if a.x != b.x && a.y != b.y {
        cell_size * std::f64::consts::SQRT_2
    } else {
        cell_size
    }
}

/// Minimum-cost 8-connected path from `start` to `goal` over believed-free
/// cells. Ties on f are broken by larger g, then by lower cell index.
pub fn astar(
    belief: &BeliefGrid,
    risk: &RiskField,
    start: Cell,
    goal: Cell,
    risk_weight: f64,
) -> Option<GridPath> {
    if !belief.is_free(start) || !belief.is_free(goal) {
        return None;
    }
    let cs = belief.cell_size();
    if start == goal {
        return Some(GridPath {
            cells: vec![start],
            cost: 0.0,
            length: 0.0,
        });
    }
    let grid = belief.cells();
    let n = grid.len();
    let mut g = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let si = grid.index(start)?;
    let gi = grid.index(goal)?;
    g[si] = 0;
    let mut open = BinaryHeap::new();
    open.push(Reverse((heuristic(start, goal, cs), Reverse(0u64), si)));
    while let Some(Reverse((_, Reverse(gc), idx))) = open.pop() {
        if gc > g[idx] {
            continue;
        }
        if idx == gi {
            let mut cells = vec![goal];
            let mut cur = idx;
            while cur != si {
                cur = parent[cur];
                cells.push(grid.cell_at(cur));
            }
            cells.reverse();
            let length = cells.windows(2).map(|w| step_length(w[0], w[1], cs)).sum();
            return Some(GridPath {
                cells,
                cost: gc as f64 / COST_SCALE,
                length,
            });
        }
        let c = grid.cell_at(idx);
        for nb in c.neighbors8() {
            let Some(step) = transition_cost(belief, risk, c, nb, risk_weight) else {
                continue;
            };
            let ni = grid.index(nb).expect("free cells are in bounds");
            let ng = gc + step;
            if ng < g[ni] {
                g[ni] = ng;
                parent[ni] = idx;
                open.push(Reverse((ng + heuristic(nb, goal, cs), Reverse(ng), ni)));
            }
        }
    }
    None
}

/// Multi-source shortest-path tree over believed-free cells (length only).
#[derive(Clone, Debug)]
pub struct DistanceField {
    dist: Grid<u64>,
    parent: Grid<Option<Cell>>,
    source: Grid<Option<usize>>,
    cell_size: f64,
}

impl DistanceField {
    /// `sources[i]` is labelled `i`; ties go to the lower label.
    pub fn build(belief: &BeliefGrid, sources: &[Cell]) -> Self {
        let (w, h) = (belief.width(), belief.height());
        let cs = belief.cell_size();
        let mut dist = Grid::filled(w, h, u64::MAX);
        let mut parent = Grid::filled(w, h, None);
        let mut source = Grid::filled(w, h, None);
        let mut open = BinaryHeap::new();
        for (i, s) in sources.iter().enumerate() {
            if belief.is_free(*s) && dist[*s] == u64::MAX {
                dist.set(*s, 0);
                source.set(*s, Some(i));
                open.push(Reverse((0u64, i, *s)));
            }
        }
        while let Some(Reverse((d, label, c))) = open.pop() {
            if d > dist[c] || source[c] != Some(label) {
                continue;
            }
            for nb in c.neighbors8() {
                let (dx, dy) = (nb.x - c.x, nb.y - c.y);
                if !belief.is_free(nb) {
                    continue;
                }
                if dx != 0 && dy != 0 && !(belief.is_free(c.offset(dx, 0)) && belief.is_free(c.offset(0, dy))) {
                    continue;
                }
                let nd = d + (step_length(c, nb, cs) * COST_SCALE).round() as u64;
                let better = nd < dist[nb] || (nd == dist[nb] && source[nb].is_some_and(|s| label < s));
                if better {
                    dist.set(nb, nd);
                    parent.set(nb, Some(c));
                    source.set(nb, Some(label));
                    open.push(Reverse((nd, label, nb)));
                }
            }
        }
        Self {
            dist,
            parent,
            source,
            cell_size: cs,
        }
    }

    pub fn source_of(&self, c: Cell) -> Option<usize> {
        self.source.get(c).copied().flatten()
    }

    /// Metres to the nearest source.
    pub fn distance(&self, c: Cell) -> Option<f64> {
        match self.dist.get(c) {
            Some(&d) if d != u64::MAX => Some(d as f64 / COST_SCALE),
            _ => None,
        }
    }

    /// Cells from `c` back to its source, `c` first.
    pub fn path_to_source(&self, c: Cell) -> Option<Vec<Cell>> {
        self.distance(c)?;
        let mut out = vec![c];
        let mut cur = c;
        while let Some(p) = self.parent.get(cur).copied().flatten() {
            out.push(p);
            cur = p;
        }
        Some(out)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
}

/// Turn-rate limits of the platform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinodynamicSpec {
    /// Radians per step.
    pub max_turn_rate: f64,
    /// Metres.
    pub step_length: f64,
    /// Relaxation passes over the deviating part of the executed path.
    pub smoothing_iterations: usize,
}

impl Default for KinodynamicSpec {
    fn default() -> Self {
        Self {
            max_turn_rate: std::f64::consts::FRAC_PI_2,
            step_length: 0.5,
            smoothing_iterations: 1,
        }
    }
}

impl KinodynamicSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_turn_rate > 0.0) {
            return Err(Error::param("max_turn_rate must be positive"));
        }
        if !(self.step_length > 0.0) {
            return Err(Error::param("step_length must be positive"));
        }
        Ok(())
    }
}

fn blocked(belief: &BeliefGrid, from: Point, to: Point) -> bool {
    let cs = belief.cell_size();
    let (a, b) = (from.cell(cs), to.cell(cs));
    !belief.in_bounds(b) || LineIter::new(a, b).any(|c| belief.is_obstacle(c))
}

/// Follow `reference` under the turn-rate limit.
///
/// The reference is densified to sub-steps of at most `step_length`. Each
/// sub-step turns toward the next reference point; if the required turn is
/// within the limit the executed point snaps back onto the reference,
/// otherwise the heading turns by the limit and the robot advances along
/// it. A move that would enter a believed obstacle ends the path, and the
/// last pose is repeated. The output has one point per reference waypoint.
pub fn smooth_kinodynamic(
    reference: &[Point],
    spec: &KinodynamicSpec,
    belief: &BeliefGrid,
) -> Vec<Point> {
    if reference.len() < 2 {
        return reference.to_vec();
    }
    let mut dense = vec![reference[0]];
    let mut anchor = vec![0usize];
    for w in reference.windows(2) {
        let len = w[0].dist(w[1]);
        let n = ((len / spec.step_length) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            dense.push(if k == n {
                w[1]
            } else {
                Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y))
            });
        }
        anchor.push(dense.len() - 1);
    }

    let mut exec = Vec::with_capacity(dense.len());
    exec.push(dense[0]);
    let mut heading = dense
        .iter()
        .skip(1)
        .find(|p| p.dist(dense[0]) > 1e-12)
        .map_or(0.0, |p| dense[0].heading_to(*p));
    let mut deviated = vec![false; dense.len()];
    let mut stopped = false;
    for j in 1..dense.len() {
        let prev = exec[j - 1];
        if stopped {
            exec.push(prev);
            continue;
        }
        let target = dense[j];
        let gap = prev.dist(target);
        let next = if gap < 1e-12 {
            target
        } else {
            let desired = prev.heading_to(target);
            let turn = wrap_angle(desired - heading);
            if turn.abs() <= spec.max_turn_rate + 1e-12 {
                heading = desired;
                target
            } else {
                heading = wrap_angle(heading + spec.max_turn_rate.copysign(turn));
                let step = dense[j - 1].dist(target);
                deviated[j] = true;
                Point::new(prev.x + step * heading.cos(), prev.y + step * heading.sin())
            }
        };
        if blocked(belief, prev, next) {
            stopped = true;
            exec.push(prev);
            deviated[j] = false;
        } else {
            exec.push(next);
        }
    }

    for _ in 0..spec.smoothing_iterations {
        for j in 1..exec.len() - 1 {
            if !deviated[j] {
                continue;
            }
            let mid = Point::new(
                0.5 * (exec[j - 1].x + exec[j + 1].x),
                0.5 * (exec[j - 1].y + exec[j + 1].y),
            );
            let cand = Point::new(0.5 * (exec[j].x + mid.x), 0.5 * (exec[j].y + mid.y));
            if !blocked(belief, exec[j - 1], cand) && !blocked(belief, cand, exec[j + 1]) {
                exec[j] = cand;
            }
        }
    }

    anchor.iter().map(|&i| exec[i]).collect()
}

/// Summed Euclidean distance between paired waypoints, in metres.
pub fn discrepancy(reference: &[Point], executed: &[Point]) -> Result<f64> {
    if reference.len() != executed.len() {
        return Err(Error::LengthMismatch {
            reference: reference.len(),
            executed: executed.len(),
        });
    }
    Ok(reference.iter().zip(executed).map(|(a, b)| a.dist(*b)).sum())
}

/// Reference path, executed path and their discrepancy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub reference: Vec<Point>,
    pub executed: Vec<Point>,
    pub discrepancy: f64,
}

impl PathPair {
    pub fn new(reference: Vec<Point>, executed: Vec<Point>) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::param("path pair needs at least one waypoint"));
        }
        let discrepancy = discrepancy(&reference, &executed)?;
        Ok(Self {
            reference,
            executed,
            discrepancy,
        })
    }

    /// Smooth `reference` and pair it with the result.
    pub fn plan(reference: Vec<Point>, spec: &KinodynamicSpec, belief: &BeliefGrid) -> Result<Self> {
        let executed = smooth_kinodynamic(&reference, spec, belief);
        Self::new(reference, executed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub pose: Pose,
    pub collided: bool,
    /// Metres moved this step.
    pub distance: f64,
    pub newly_covered: usize,
}

/// Move toward `next` and sense. A move whose cell line crosses a
/// ground-truth obstacle leaves the robot where it was and reports a
/// collision.
pub fn execute_step(
    world: &WorldModel,
    belief: &mut BeliefGrid,
    pose: &Pose,
    next: Point,
    sensor: &SensorSpec,
) -> Result<StepOutcome> {
    let cs = world.cell_size();
    let from = pose.cell(cs);
    let to = next.cell(cs);
    if LineIter::new(from, to).any(|c| world.is_obstacle(c)) {
        return Ok(StepOutcome {
            pose: *pose,
            collided: true,
            distance: 0.0,
            newly_covered: 0,
        });
    }
    let distance = pose.point().dist(next);
    let heading = if distance > 1e-12 {
        pose.point().heading_to(next)
    } else {
        pose.heading
    };
    let new_pose = Pose::new(next.x, next.y, heading);
    let newly_covered = sense(world, belief, &new_pose, sensor)?;
    Ok(StepOutcome {
        pose: new_pose,
        collided: false,
        distance,
        newly_covered,
    })
}
