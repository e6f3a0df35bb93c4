//! Information roadmaps: a dense local lattice around the robot and a sparse
//! global graph of breadcrumbs and frontiers.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, LineIter};
use crate::motion::{astar, DistanceField};
use crate::risk::RiskCache;
use crate::world::{BeliefGrid, SensorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Local,
    Global,
}

impl Scope {
    pub fn opposite(self) -> Scope {
        match self {
            Scope::Local => Scope::Global,
            Scope::Global => Scope::Local,
        }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scope::Local => "local",
            Scope::Global => "global",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Robot,
    Lattice,
    Breadcrumb,
    Frontier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapNode {
    pub id: usize,
    pub cell: Cell,
    pub kind: NodeKind,
    /// Expected newly coverable area in square metres.
    pub info_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapEdge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    /// Metres.
    pub length: f64,
    pub risk: f64,
    /// Cells traversed, `from` first. Lattice edges list just their endpoints.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapGraph {
    pub scope: Scope,
    pub horizon: usize,
    pub robot: usize,
    pub nodes: Vec<RoadmapNode>,
    pub edges: Vec<RoadmapEdge>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl RoadmapGraph {
    pub fn new(scope: Scope, horizon: usize) -> Self {
        Self {
            scope,
            horizon,
            robot: 0,
            nodes: Vec::new(),
            edges: Vec::new(),
            adjacency: Vec::new(),
        }
    }

    pub fn add_node(&mut self, cell: Cell, kind: NodeKind, info_gain: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(RoadmapNode {
            id,
            cell,
            kind,
            info_gain,
        });
        self.adjacency.push(Vec::new());
        id
    }

    pub fn add_edge(&mut self, from: usize, to: usize, length: f64, risk: f64, path: Vec<Cell>) -> usize {
        assert!(from < self.nodes.len() && to < self.nodes.len(), "edge endpoints must exist");
        let id = self.edges.len();
        self.edges.push(RoadmapEdge {
            id,
            from,
            to,
            length,
            risk,
            path,
        });
        self.adjacency[from].push((to, id));
        self.adjacency[to].push((from, id));
        id
    }

    /// `(neighbour, edge)` pairs sorted by neighbour id.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .filter(|(n, _)| *n == b)
            .map(|(_, e)| *e)
            .min_by(|x, y| {
                self.edges[*x]
                    .length
                    .total_cmp(&self.edges[*y].length)
                    .then(x.cmp(y))
            })
    }

    pub fn node_at(&self, cell: Cell) -> Option<usize> {
        self.nodes.iter().position(|n| n.cell == cell)
    }

    pub fn frontiers(&self) -> impl Iterator<Item = &RoadmapNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Frontier)
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(n) = queue.pop_front() {
            for &(m, _) in &self.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    count += 1;
                    queue.push_back(m);
                }
            }
        }
        count == self.nodes.len()
    }

    fn sort_adjacency(&mut self) {
        for list in &mut self.adjacency {
            list.sort_unstable();
        }
    }

    /// Rebuild adjacency after deserialisation.
    pub fn rebuild_adjacency(&mut self) {
        self.adjacency = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            self.adjacency[e.from].push((e.to, e.id));
            self.adjacency[e.to].push((e.from, e.id));
        }
        self.sort_adjacency();
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut g: RoadmapGraph = serde_json::from_str(text)?;
        if g.edges.iter().any(|e| e.from >= g.nodes.len() || e.to >= g.nodes.len()) {
            return Err(Error::Malformed {
                what: "roadmap graph",
                reason: "edge endpoint out of range".into(),
            });
        }
        g.rebuild_adjacency();
        Ok(g)
    }
}

/// Unknown cells visible from `cell` within sensor range, in square metres.
///
/// Rays pass through unknown cells and stop only at believed obstacles, so
/// this is an optimistic estimate of what a scan from `cell` would reveal.
pub fn info_gain(belief: &BeliefGrid, cell: Cell, sensor: &SensorSpec) -> f64 {
    let r = sensor.range_cells(belief.cell_size());
    let r_sq = r * r;
    let ri = r.floor() as i32;
    let mut count = 0usize;
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if ((dx * dx + dy * dy) as f64) > r_sq + 1e-9 {
                continue;
            }
            let t = cell.offset(dx, dy);
            if !belief.is_unknown(t) {
                continue;
            }
            let clear = LineIter::new(cell, t)
                .skip(1)
                .take_while(|c| *c != t)
                .all(|c| !belief.is_obstacle(c));
            if clear {
                count += 1;
            }
        }
    }
    count as f64 * belief.cell_area()
}

/// Cheap pre-check: any unknown cell inside the sensor's bounding box.
fn unknown_nearby(belief: &BeliefGrid, cell: Cell, ri: i32) -> bool {
    (-ri..=ri).any(|dy| (-ri..=ri).any(|dx| belief.is_unknown(cell.offset(dx, dy))))
}

/// Dense 4-connected lattice over believed-free cells within `radius`
/// metres of the robot, restricted to the robot's connected component.
/// Node ids follow row-major cell order.
pub fn build_local_irm(
    belief: &BeliefGrid,
    risk: &mut RiskCache,
    robot: Cell,
    radius: f64,
    horizon: usize,
    sensor: &SensorSpec,
) -> Result<RoadmapGraph> {
    if !belief.is_free(robot) {
        return Err(Error::InvalidState(format!(
            "robot cell {robot:?} is not believed free"
        )));
    }
    let cs = belief.cell_size();
    let r_cells_sq = (radius / cs).powi(2) + 1e-9;
    let mut members = vec![robot];
    let mut seen: HashMap<Cell, ()> = HashMap::from([(robot, ())]);
    let mut k = 0;
    while k < members.len() {
        let c = members[k];
        k += 1;
        for n in c.neighbors4() {
            if belief.is_free(n) && (n.dist_sq(robot) as f64) <= r_cells_sq && !seen.contains_key(&n) {
                seen.insert(n, ());
                members.push(n);
            }
        }
    }
    members.sort_by_key(|c| (c.y, c.x));
    let mut graph = RoadmapGraph::new(Scope::Local, horizon);
    let ri = sensor.range_cells(cs).floor() as i32;
    let mut ids = HashMap::with_capacity(members.len());
    for &c in &members {
        let kind = if c == robot {
            NodeKind::Robot
        } else {
            NodeKind::Lattice
        };
        let gain = if unknown_nearby(belief, c, ri) {
            info_gain(belief, c, sensor)
        } else {
            0.0
        };
        let id = graph.add_node(c, kind, gain);
        ids.insert(c, id);
        if c == robot {
            graph.robot = id;
        }
    }
    for &c in &members {
        for n in [c.offset(1, 0), c.offset(0, 1)] {
            if let Some(&j) = ids.get(&n) {
                let rho = risk.edge(c, n);
                graph.add_edge(ids[&c], j, cs, rho, vec![c, n]);
            }
        }
    }
    graph.sort_adjacency();
    Ok(graph)
}

/// Clusters of believed-free cells bordering unknown space.
///
/// Frontier cells have at least one unknown 4-neighbour; clusters are
/// 8-connected. Each surviving cluster yields one node at the member cell
/// nearest its centroid, with gain equal to the number of distinct unknown
/// cells bordering the cluster times the cell area.
pub fn detect_frontiers(belief: &BeliefGrid, min_cluster: usize) -> Vec<RoadmapNode> {
    let grid = belief.cells();
    let is_frontier = |c: Cell| belief.is_free(c) && belief.unknown_neighbors(c) > 0;
    let mut assigned = vec![false; grid.len()];
    let mut out = Vec::new();
    for c in grid.cells() {
        let i = grid.index(c).expect("in bounds");
        if assigned[i] || !is_frontier(c) {
            continue;
        }
        assigned[i] = true;
        let mut members = vec![c];
        let mut k = 0;
        while k < members.len() {
            let m = members[k];
            k += 1;
            for n in m.neighbors8() {
                if let Some(j) = grid.index(n) {
                    if !assigned[j] && is_frontier(n) {
                        assigned[j] = true;
                        members.push(n);
                    }
                }
            }
        }
        if members.len() < min_cluster.max(1) {
            continue;
        }
        let (sx, sy) = members
            .iter()
            .fold((0.0, 0.0), |(x, y), m| (x + m.x as f64, y + m.y as f64));
        let (cx, cy) = (sx / members.len() as f64, sy / members.len() as f64);
        let snapped = *members
            .iter()
            .min_by(|a, b| {
                let da = (a.x as f64 - cx).powi(2) + (a.y as f64 - cy).powi(2);
                let db = (b.x as f64 - cx).powi(2) + (b.y as f64 - cy).powi(2);
                da.total_cmp(&db).then((a.y, a.x).cmp(&(b.y, b.x)))
            })
            .expect("non-empty cluster");
        let mut unknown: Vec<Cell> = members
            .iter()
            .flat_map(|m| m.neighbors4())
            .filter(|n| belief.is_unknown(*n))
            .collect();
        unknown.sort_unstable();
        unknown.dedup();
        out.push(RoadmapNode {
            id: out.len(),
            cell: snapped,
            kind: NodeKind::Frontier,
            info_gain: unknown.len() as f64 * belief.cell_area(),
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalIrmConfig {
    /// Metres between breadcrumbs.
    pub breadcrumb_spacing: f64,
    /// Smallest frontier cluster kept, in cells.
    pub min_cluster: usize,
    /// Hop horizon T^g recorded on the graph.
    pub horizon: usize,
}

impl Default for GlobalIrmConfig {
    fn default() -> Self {
        Self {
            breadcrumb_spacing: 2.0,
            min_cluster: 2,
            horizon: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrailEdge {
    a: usize,
    b: usize,
    path: Vec<Cell>,
}

/// The global roadmap: a breadcrumb trail with frontiers hung off it.
///
/// Node order is breadcrumbs (creation order), then the robot node when it
/// does not sit on a breadcrumb, then frontiers in row-major order.
#[derive(Clone, Debug)]
pub struct GlobalIrm {
    config: GlobalIrmConfig,
    breadcrumbs: Vec<Cell>,
    trail: Vec<TrailEdge>,
    graph: RoadmapGraph,
}

impl GlobalIrm {
    pub fn new(config: GlobalIrmConfig, start: Cell) -> Self {
        let mut graph = RoadmapGraph::new(Scope::Global, config.horizon);
        graph.add_node(start, NodeKind::Breadcrumb, 0.0);
        Self {
            config,
            breadcrumbs: vec![start],
            trail: Vec::new(),
            graph,
        }
    }

    pub fn config(&self) -> &GlobalIrmConfig {
        &self.config
    }

    pub fn graph(&self) -> &RoadmapGraph {
        &self.graph
    }

    pub fn breadcrumbs(&self) -> &[Cell] {
        &self.breadcrumbs
    }

    /// Drop a breadcrumb if the robot is at least one spacing away from the
    /// last one. Returns true when a breadcrumb was added.
    pub fn observe_pose(&mut self, belief: &BeliefGrid, risk: &RiskCache, robot: Cell) -> bool {
        let cs = belief.cell_size();
        let last = *self.breadcrumbs.last().expect("trail starts with one breadcrumb");
        let spacing = self.config.breadcrumb_spacing;
        if last.dist(robot) * cs < spacing - 1e-9 || !belief.is_free(robot) {
            return false;
        }
        let new_id = self.breadcrumbs.len();
        let prev_id = new_id - 1;
        let mut links = vec![(prev_id, true)];
        for (i, b) in self.breadcrumbs.iter().enumerate().take(prev_id) {
            if b.dist(robot) * cs <= 1.5 * spacing {
                links.push((i, false));
            }
        }
        self.breadcrumbs.push(robot);
        for (i, required) in links {
            let other = self.breadcrumbs[i];
            let path = astar(belief, risk.field(), other, robot, 0.0).map(|p| p.cells);
            match path {
                Some(cells) if required || path_len_m(&cells, cs) <= 2.0 * spacing => {
                    self.trail.push(TrailEdge { a: i, b: new_id, path: cells });
                }
                None if required => {
                    self.trail.push(TrailEdge {
                        a: i,
                        b: new_id,
                        path: LineIter::new(other, robot).collect(),
                    });
                }
                _ => {}
            }
        }
        true
    }

    /// Refresh the graph for the current belief and robot position.
    pub fn update(
        &mut self,
        belief: &BeliefGrid,
        robot: Cell,
        risk: &mut RiskCache,
    ) -> &RoadmapGraph {
        self.observe_pose(belief, risk, robot);
        let cs = belief.cell_size();
        let mut graph = RoadmapGraph::new(Scope::Global, self.config.horizon);
        for &b in &self.breadcrumbs {
            graph.add_node(b, NodeKind::Breadcrumb, 0.0);
        }
        for t in &self.trail {
            let length = path_len_m(&t.path, cs);
            let rho = risk.path(&t.path);
            graph.add_edge(t.a, t.b, length, rho, t.path.clone());
        }

        let field = DistanceField::build(belief, &self.breadcrumbs);
        let on_crumb: BTreeMap<Cell, usize> = self
            .breadcrumbs
            .iter()
            .enumerate()
            .rev()
            .map(|(i, c)| (*c, i))
            .collect();

        let attach = |graph: &mut RoadmapGraph, risk: &mut RiskCache, node: usize, cell: Cell| {
            if let (Some(src), Some(mut path)) = (field.source_of(cell), field.path_to_source(cell)) {
                path.reverse();
                let length = path_len_m(&path, cs);
                let rho = risk.path(&path);
                graph.add_edge(src, node, length, rho, path);
                true
            } else {
                false
            }
        };

        graph.robot = match on_crumb.get(&robot) {
            Some(&i) => i,
            None => {
                let id = graph.add_node(robot, NodeKind::Robot, 0.0);
                if !attach(&mut graph, risk, id, robot) {
                    // Robot not connected through believed-free space; fall
                    // back to a straight link to the last breadcrumb.
                    let last = self.breadcrumbs.len() - 1;
                    let path: Vec<Cell> = LineIter::new(self.breadcrumbs[last], robot).collect();
                    let length = path_len_m(&path, cs);
                    let rho = risk.path(&path);
                    graph.add_edge(last, id, length, rho, path);
                }
                id
            }
        };

        let mut frontiers = detect_frontiers(belief, self.config.min_cluster);
        frontiers.sort_by_key(|f| (f.cell.y, f.cell.x));
        for f in frontiers {
            if on_crumb.contains_key(&f.cell) || f.cell == robot || field.distance(f.cell).is_none() {
                continue;
            }
            let id = graph.add_node(f.cell, NodeKind::Frontier, f.info_gain);
            let ok = attach(&mut graph, risk, id, f.cell);
            debug_assert!(ok);
        }
        graph.sort_adjacency();
        self.graph = graph;
        &self.graph
    }
}

fn path_len_m(cells: &[Cell], cs: f64) -> f64 {
    cells.windows(2).map(|w| w[0].dist(w[1]) * cs).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{RiskConfig, RiskField};
    use crate::world::{Knowledge, WorldModel};
    use std::sync::Arc;

    fn cache_for(w: &WorldModel) -> RiskCache {
        RiskCache::new(Arc::new(RiskField::from_world(w, RiskConfig::default(), 1).unwrap()))
    }

    #[test]
    fn lone_robot_cell_gives_single_node() {
        let w = WorldModel::from_ascii(&[".....", ".....", "..S..", ".....", "....."], 0.5).unwrap();
        let mut b = BeliefGrid::for_world(&w);
        b.observe(w.spawn(), Knowledge::Free);
        let g = build_local_irm(&b, &mut cache_for(&w), w.spawn(), 10.0, 10, &SensorSpec::default()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(g.nodes[0].kind, NodeKind::Robot);
    }

    #[test]
    fn local_irm_rejects_unknown_robot_cell() {
        let w = WorldModel::from_ascii(&["S.."], 0.5).unwrap();
        let b = BeliefGrid::for_world(&w);
        let err = build_local_irm(&b, &mut cache_for(&w), w.spawn(), 5.0, 10, &SensorSpec::default());
        assert!(matches!(err, Err(Error::InvalidState(_))));
    }

    #[test]
    fn fully_known_world_has_no_frontiers() {
        let w = WorldModel::from_ascii(&["....", ".S..", "...."], 0.5).unwrap();
        let b = BeliefGrid::fully_known(&w);
        assert!(detect_frontiers(&b, 1).is_empty());
    }

    #[test]
    fn graph_json_round_trip() {
        let w = WorldModel::from_ascii(&["...", ".S.", "..."], 0.5).unwrap();
        let b = BeliefGrid::fully_known(&w);
        let g = build_local_irm(&b, &mut cache_for(&w), w.spawn(), 5.0, 10, &SensorSpec::default()).unwrap();
        let back = RoadmapGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.neighbors(4), g.neighbors(4));
    }

    #[test]
    fn stationary_robot_leaves_global_graph_unchanged() {
        let w = WorldModel::from_ascii(&["..........", "..S.......", ".........."], 0.5).unwrap();
        let mut b = BeliefGrid::for_world(&w);
        crate::world::sense(&w, &mut b, &crate::grid::Pose::at_cell(w.spawn(), 0.5), &SensorSpec::default()).unwrap();
        let mut risk = cache_for(&w);
        let mut irm = GlobalIrm::new(GlobalIrmConfig::default(), w.spawn());
        let first = irm.update(&b, w.spawn(), &mut risk).clone();
        let second = irm.update(&b, w.spawn(), &mut risk).clone();
        assert_eq!(first, second);
        assert_eq!(irm.breadcrumbs().len(), 1);
    }
}
