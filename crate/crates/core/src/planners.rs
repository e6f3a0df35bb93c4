//! Coverage policies over the information roadmaps, plus the NBV and HFE
//! baselines.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Cell;
use crate::motion::astar;
use crate::risk::RiskCache;
use crate::roadmap::{info_gain, NodeKind, RoadmapGraph, RoadmapNode, Scope};
use crate::world::{BeliefGrid, SensorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardModel {
    pub gamma_local: f64,
    pub gamma_global: f64,
    /// Reward per square metre of information gain.
    pub coverage_weight: f64,
    /// Penalty per metre travelled.
    pub distance_cost: f64,
}

impl Default for RewardModel {
    fn default() -> Self {
        Self {
            gamma_local: 0.95,
            gamma_global: 0.9,
            coverage_weight: 1.0,
            distance_cost: 0.05,
        }
    }
}

impl RewardModel {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("gamma_local", self.gamma_local), ("gamma_global", self.gamma_global)] {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::param(format!("{name} must be in (0, 1], got {g}")));
            }
        }
        if !(self.coverage_weight >= 0.0 && self.distance_cost >= 0.0) {
            return Err(Error::param("coverage_weight and distance_cost must be nonnegative"));
        }
        Ok(())
    }

    pub fn gamma(&self, scope: Scope) -> f64 {
        match scope {
            Scope::Local => self.gamma_local,
            Scope::Global => self.gamma_global,
        }
    }

    /// Scale both reward terms by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            coverage_weight: self.coverage_weight * k,
            distance_cost: self.distance_cost * k,
            ..*self
        }
    }
}

/// A coverage policy: a node sequence over a roadmap with its utility and
/// accumulated risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub scope: Scope,
    /// Roadmap node ids, robot first. Empty for baselines that plan on the grid.
    pub nodes: Vec<usize>,
    /// Roadmap edge ids joining consecutive nodes.
    pub edges: Vec<usize>,
    /// Cells of the nodes (or the grid path for grid planners).
    pub cells: Vec<Cell>,
    pub step_rewards: Vec<f64>,
    /// Discount applied to `step_rewards` when summing them.
    pub discount: f64,
    pub utility: f64,
    pub risk: f64,
    pub created_at: u64,
}

impl Policy {
    pub fn goal(&self) -> Cell {
        *self.cells.last().expect("policies are non-empty")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Reward for stepping into `node` over an edge of `edge_length` metres.
/// A node's gain counts once: it is zeroed if already in `visited`, and the
/// node is added to `visited`.
pub fn step_reward(
    node: &RoadmapNode,
    visited: &mut Vec<usize>,
    reward: &RewardModel,
    edge_length: f64,
) -> f64 {
    let gain = if visited.contains(&node.id) {
        0.0
    } else {
        visited.push(node.id);
        node.info_gain
    };
    reward.coverage_weight * gain - reward.distance_cost * edge_length
}

/// Discounted sum `sum_t gamma^t r_t` with the first step undiscounted.
pub fn utility(step_rewards: &[f64], gamma: f64) -> f64 {
    let mut u = 0.0;
    let mut d = 1.0;
    for r in step_rewards {
        u += d * r;
        d *= gamma;
    }
    u
}

/// Per-step rewards of walking `nodes` (robot first) over `graph`, with
/// gain zeroing for revisits. The robot's own node counts as visited.
pub fn walk_rewards(graph: &RoadmapGraph, nodes: &[usize], reward: &RewardModel) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut visited = vec![nodes[0]];
    let mut edges = Vec::with_capacity(nodes.len().saturating_sub(1));
    let mut rewards = Vec::with_capacity(nodes.len().saturating_sub(1));
    for w in nodes.windows(2) {
        let e = graph
            .edge_between(w[0], w[1])
            .ok_or_else(|| Error::InvalidState(format!("no edge between {} and {}", w[0], w[1])))?;
        edges.push(e);
        rewards.push(step_reward(&graph.nodes[w[1]], &mut visited, reward, graph.edges[e].length));
    }
    Ok((edges, rewards))
}

fn edge_risk_sum(graph: &RoadmapGraph, edges: &[usize]) -> f64 {
    edges.iter().map(|&e| graph.edges[e].risk).sum()
}

struct SearchNode {
    node: usize,
    parent: usize,
    edge: usize,
    depth: usize,
    utility: f64,
    collected: f64,
}

#[derive(PartialEq)]
struct Frontier {
    bound: f64,
    seq: usize,
    idx: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const ROOT: usize = usize::MAX;

fn path_nodes(arena: &[SearchNode], mut idx: usize) -> Vec<usize> {
    let mut out = Vec::new();
    loop {
        out.push(arena[idx].node);
        if arena[idx].parent == ROOT {
            break;
        }
        idx = arena[idx].parent;
    }
    out.reverse();
    out
}

fn on_path(arena: &[SearchNode], mut idx: usize, node: usize) -> bool {
    loop {
        if arena[idx].node == node {
            return true;
        }
        if arena[idx].parent == ROOT {
            return false;
        }
        idx = arena[idx].parent;
    }
}

/// Best discounted-utility walk of at most `horizon` steps from the robot
/// node, by best-first branch and bound over walks (revisits allowed, gain
/// counted once). Stops after `budget` expansions. Returns `None` when no
/// walk has positive utility. Equal utilities go to the lexicographically
/// smallest node sequence.
pub fn plan_local(
    graph: &RoadmapGraph,
    reward: &RewardModel,
    horizon: usize,
    budget: usize,
) -> Option<Policy> {
    if graph.nodes.is_empty() || horizon == 0 {
        return None;
    }
    let gamma = reward.gamma_local;
    let w = reward.coverage_weight;
    let c = reward.distance_cost;
    let robot = graph.robot;
    let gmax = graph.nodes.iter().map(|n| n.info_gain).fold(0.0, f64::max);
    let total_gain: f64 = graph.nodes.iter().map(|n| n.info_gain).sum::<f64>() - graph.nodes[robot].info_gain;
    if total_gain <= 0.0 {
        return None;
    }
    let lmin = graph.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
    let per_step = (w * gmax - c * lmin).max(0.0);
    // tail[d] = sum_{t=d}^{horizon-1} gamma^t * per_step
    let mut tail = vec![0.0; horizon + 1];
    for d in (0..horizon).rev() {
        tail[d] = tail[d + 1] + gamma.powi(d as i32) * per_step;
    }
    let bound = |n: &SearchNode| -> f64 {
        let remaining = (w * (total_gain - n.collected)).max(0.0) * gamma.powi(n.depth as i32);
        n.utility + tail[n.depth].min(remaining)
    };

    let mut arena = vec![SearchNode {
        node: robot,
        parent: ROOT,
        edge: usize::MAX,
        depth: 0,
        utility: 0.0,
        collected: 0.0,
    }];
    let mut open = BinaryHeap::new();
    let mut seq = 0usize;
    open.push(Frontier {
        bound: bound(&arena[0]),
        seq,
        idx: 0,
    });
    let mut best: Option<(f64, usize)> = None;
    let mut expansions = 0usize;
    while let Some(top) = open.pop() {
        if let Some((bu, _)) = best {
            if top.bound < bu {
                break;
            }
        }
        if expansions >= budget {
            break;
        }
        expansions += 1;
        let parent = top.idx;
        let (depth, pu, pc, pnode) = {
            let p = &arena[parent];
            (p.depth, p.utility, p.collected, p.node)
        };
        if depth >= horizon {
            continue;
        }
        let disc = gamma.powi(depth as i32);
        for &(nb, e) in graph.neighbors(pnode) {
            let fresh = !on_path(&arena, parent, nb);
            let gain = if fresh { graph.nodes[nb].info_gain } else { 0.0 };
            let r = w * gain - c * graph.edges[e].length;
            let child = SearchNode {
                node: nb,
                parent,
                edge: e,
                depth: depth + 1,
                utility: pu + disc * r,
                collected: pc + gain,
            };
            let idx = arena.len();
            let child_bound = bound(&child);
            let cu = child.utility;
            arena.push(child);
            let improves = match best {
                None => true,
                Some((bu, bi)) => cu > bu || (cu == bu && path_nodes(&arena, idx) < path_nodes(&arena, bi)),
            };
            if improves {
                best = Some((cu, idx));
            }
            if depth + 1 < horizon {
                seq += 1;
                open.push(Frontier {
                    bound: child_bound,
                    seq,
                    idx,
                });
            }
        }
    }

    let (bu, bi) = best?;
    if bu <= 0.0 {
        return None;
    }
    let nodes = path_nodes(&arena, bi);
    let mut edges = Vec::with_capacity(nodes.len() - 1);
    let mut cur = bi;
    while arena[cur].parent != ROOT {
        edges.push(arena[cur].edge);
        cur = arena[cur].parent;
    }
    edges.reverse();
    let mut visited = vec![robot];
    let step_rewards: Vec<f64> = nodes[1..]
        .iter()
        .zip(&edges)
        .map(|(&n, &e)| step_reward(&graph.nodes[n], &mut visited, reward, graph.edges[e].length))
        .collect();
    Some(Policy {
        scope: Scope::Local,
        cells: nodes.iter().map(|&n| graph.nodes[n].cell).collect(),
        risk: edge_risk_sum(graph, &edges),
        nodes,
        edges,
        utility: bu,
        step_rewards,
        discount: gamma,
        created_at: 0,
    })
}

/// Shortest (by length) paths from `source`. Returns per-node distance and
/// predecessor edge. Ties go to the lower predecessor id.
pub fn graph_dijkstra(graph: &RoadmapGraph, source: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = graph.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    // Graphs here are small; a linear scan keeps the tie-break explicit.
    for _ in 0..n {
        let Some(u) = (0..n)
            .filter(|&i| !done[i] && dist[i].is_finite())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        else {
            break;
        };
        done[u] = true;
        for &(v, e) in graph.neighbors(u) {
            let nd = dist[u] + graph.edges[e].length;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(e);
            }
        }
    }
    (dist, pred)
}

/// Minimum hop counts from `source`.
pub fn graph_hops(graph: &RoadmapGraph, source: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; graph.nodes.len()];
    hops[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let h = hops[u].expect("queued nodes have hops");
        for &(v, _) in graph.neighbors(u) {
            if hops[v].is_none() {
                hops[v] = Some(h + 1);
                queue.push_back(v);
            }
        }
    }
    hops
}

fn path_to(graph: &RoadmapGraph, source: usize, target: usize, pred: &[Option<usize>]) -> (Vec<usize>, Vec<usize>) {
    let mut nodes = vec![target];
    let mut edges = Vec::new();
    let mut cur = target;
    while cur != source {
        let e = pred[cur].expect("reachable node has a predecessor");
        edges.push(e);
        let edge = &graph.edges[e];
        cur = if edge.to == cur { edge.from } else { edge.to };
        nodes.push(cur);
    }
    nodes.reverse();
    edges.reverse();
    (nodes, edges)
}

fn frontier_policy(
    graph: &RoadmapGraph,
    reward: &RewardModel,
    robot: usize,
    target: usize,
    pred: &[Option<usize>],
    utility: f64,
    terminal: f64,
) -> Policy {
    let (nodes, edges) = path_to(graph, robot, target, pred);
    let mut step_rewards: Vec<f64> = edges
        .iter()
        .map(|&e| -reward.distance_cost * graph.edges[e].length)
        .collect();
    match step_rewards.last_mut() {
        Some(last) => *last += terminal,
        None => step_rewards.push(terminal),
    }
    Policy {
        scope: Scope::Global,
        cells: nodes.iter().map(|&n| graph.nodes[n].cell).collect(),
        risk: edge_risk_sum(graph, &edges),
        nodes,
        edges,
        step_rewards,
        discount: 1.0,
        utility,
        created_at: 0,
    }
}

/// Frontier value used by the global planner.
pub fn global_frontier_utility(reward: &RewardModel, hops: usize, gain: f64, distance: f64) -> f64 {
    reward.gamma_global.powi(hops as i32) * reward.coverage_weight * gain - reward.distance_cost * distance
}

/// Pick the frontier maximising `gamma_g^hops * w * gain - c * distance`
/// and return the shortest path to it. Hop counts beyond `horizon` are
/// clamped to it, so distant frontiers stay eligible.
pub fn plan_global(
    graph: &RoadmapGraph,
    reward: &RewardModel,
    robot: usize,
    horizon: usize,
) -> Option<Policy> {
    let (dist, pred) = graph_dijkstra(graph, robot);
    let hops = graph_hops(graph, robot);
    let mut best: Option<(f64, usize, usize)> = None;
    for f in graph.frontiers() {
        let (Some(h), true) = (hops[f.id], dist[f.id].is_finite()) else {
            continue;
        };
        if f.id == robot {
            continue;
        }
        let h = h.min(horizon);
        let u = global_frontier_utility(reward, h, f.info_gain, dist[f.id]);
        if best.is_none_or(|(bu, _, _)| u > bu) {
            best = Some((u, f.id, h));
        }
    }
    let (u, target, h) = best?;
    let terminal = reward.gamma_global.powi(h as i32) * reward.coverage_weight * graph.nodes[target].info_gain;
    Some(frontier_policy(graph, reward, robot, target, &pred, u, terminal))
}

/// One-step look-ahead frontier choice: maximise `w * gain - c * distance`.
pub fn plan_hfe(graph: &RoadmapGraph, reward: &RewardModel, robot: usize) -> Option<Policy> {
    let (dist, pred) = graph_dijkstra(graph, robot);
    let mut best: Option<(f64, usize)> = None;
    for f in graph.frontiers() {
        if !dist[f.id].is_finite() || f.id == robot {
            continue;
        }
        let u = reward.coverage_weight * f.info_gain - reward.distance_cost * dist[f.id];
        if best.is_none_or(|(bu, _)| u > bu) {
            best = Some((u, f.id));
        }
    }
    let (u, target) = best?;
    let terminal = reward.coverage_weight * graph.nodes[target].info_gain;
    Some(frontier_policy(graph, reward, robot, target, &pred, u, terminal))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbvConfig {
    /// Viewpoints drawn per planning cycle.
    pub samples: usize,
    /// Sampling neighbourhood radius in metres.
    pub radius: f64,
    /// Risk weight for the A* paths to viewpoints.
    pub risk_weight: f64,
}

impl Default for NbvConfig {
    fn default() -> Self {
        Self {
            samples: 30,
            radius: 5.0,
            risk_weight: 1.0,
        }
    }
}

/// A scored viewpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub cell: Cell,
    pub gain: f64,
    pub path: Vec<Cell>,
    pub path_length: f64,
    pub score: f64,
}

/// Score `viewpoints` by `w * gain - c * path_length` over A* paths from
/// `robot`. Unreachable viewpoints are dropped.
pub fn score_viewpoints(
    belief: &BeliefGrid,
    risk: &RiskCache,
    robot: Cell,
    viewpoints: &[Cell],
    reward: &RewardModel,
    sensor: &SensorSpec,
    risk_weight: f64,
) -> Vec<Viewpoint> {
    viewpoints
        .iter()
        .filter_map(|&v| {
            let path = astar(belief, risk.field(), robot, v, risk_weight)?;
            let gain = info_gain(belief, v, sensor);
            Some(Viewpoint {
                cell: v,
                gain,
                score: reward.coverage_weight * gain - reward.distance_cost * path.length,
                path_length: path.length,
                path: path.cells,
            })
        })
        .collect()
}

/// Highest-scoring viewpoint; ties go to the earliest.
pub fn best_viewpoint(scored: &[Viewpoint]) -> Option<&Viewpoint> {
    scored
        .iter()
        .fold(None, |best: Option<&Viewpoint>, v| match best {
            Some(b) if b.score >= v.score => Some(b),
            _ => Some(v),
        })
}

/// Next-best-view baseline: sample viewpoints near the robot, plan a path to
/// each, and take the best gain-minus-cost path.
pub fn plan_nbv<R: Rng>(
    belief: &BeliefGrid,
    risk: &mut RiskCache,
    robot: Cell,
    config: &NbvConfig,
    reward: &RewardModel,
    sensor: &SensorSpec,
    rng: &mut R,
) -> Option<Policy> {
    let cs = belief.cell_size();
    let r = config.radius / cs;
    let ri = r.floor() as i32;
    let mut candidates = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            let c = robot.offset(dx, dy);
            if c != robot && ((dx * dx + dy * dy) as f64) <= r * r + 1e-9 && belief.is_free(c) {
                candidates.push(c);
            }
        }
    }
    candidates.sort_by_key(|c| (c.y, c.x));
    let picked: Vec<Cell> = if candidates.len() <= config.samples {
        candidates
    } else {
        let mut idx = rand::seq::index::sample(rng, candidates.len(), config.samples).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| candidates[i]).collect()
    };
    let scored = score_viewpoints(belief, risk, robot, &picked, reward, sensor, config.risk_weight);
    let best = best_viewpoint(&scored)?;
    Some(Policy {
        scope: Scope::Local,
        nodes: Vec::new(),
        edges: Vec::new(),
        risk: risk.path(&best.path),
        cells: best.path.clone(),
        step_rewards: vec![best.score],
        discount: 1.0,
        utility: best.score,
        created_at: 0,
    })
}

/// Local-lattice nodes that carry gain, for diagnostics.
pub fn gain_nodes(graph: &RoadmapGraph) -> usize {
    graph
        .nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Robot && n.info_gain > 0.0)
        .count()
}
