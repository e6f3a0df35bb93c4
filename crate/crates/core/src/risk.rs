//! Traversability risk: empirical CVaR over sampled terrain costs.
//!
//! Each cell carries a heavy-tailed cost distribution `mu * exp(sigma * z)`
//! (truncated at `cost_cap`). An edge's risk is the CVaR of the summed cost
//! of the cells it crosses, scaled by its length per cell step. Samples for
//! an edge are drawn from a stream keyed by the global seed and the
//! (unordered) endpoint pair, so a given edge always gets the same risk.

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{line_cells, seed_from, Cell, Grid};
use crate::planners::Policy;
use crate::roadmap::RoadmapGraph;
use crate::world::{TerrainRisk, WorldModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    /// CVaR confidence level in (0, 1).
    pub alpha: f64,
    pub sample_count: usize,
    pub cost_cap: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            sample_count: 64,
            cost_cap: 10.0,
        }
    }
}

/// Per-cell cost distributions plus the CVaR evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskField {
    terrain: Grid<TerrainRisk>,
    alpha: f64,
    sample_count: usize,
    cost_cap: f64,
    seed: u64,
    riskless: bool,
    deterministic: bool,
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        if self.sample_count == 0 {
            return Err(Error::param("sample_count must be at least 1"));
        }
        if !(self.cost_cap > 0.0) {
            return Err(Error::param("cost_cap must be positive"));
        }
        Ok(())
    }
}

impl RiskField {
    pub fn new(terrain: Grid<TerrainRisk>, config: RiskConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let riskless = terrain.as_slice().iter().all(|r| r.mu == 0.0);
        let deterministic = terrain.as_slice().iter().all(|r| r.sigma == 0.0);
        Ok(Self {
            terrain,
            alpha: config.alpha,
            sample_count: config.sample_count,
            cost_cap: config.cost_cap,
            seed,
            riskless,
            deterministic,
        })
    }

    pub fn from_world(world: &WorldModel, config: RiskConfig, seed: u64) -> Result<Self> {
        Self::new(world.terrain().clone(), config, seed)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn cost_cap(&self) -> f64 {
        self.cost_cap
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.terrain.in_bounds(c)
    }

    pub fn params(&self, c: Cell) -> TerrainRisk {
        self.terrain.get(c).copied().unwrap_or_default()
    }

    /// Expected traversal cost of a cell (untruncated mean).
    pub fn mean_cost(&self, c: Cell) -> f64 {
        self.params(c).mean()
    }

    /// One draw from the cell's cost distribution given a standard normal `z`.
    pub fn cost_from_normal(&self, c: Cell, z: f64) -> f64 {
        let p = self.params(c);
        if p.mu == 0.0 {
            return 0.0;
        }
        (p.mu * (p.sigma * z).exp()).min(self.cost_cap)
    }
}

/// Empirical CVaR: the mean of the worst `ceil((1 - alpha) * n)` samples.
pub fn cvar(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let n = samples.len();
    let k = tail_count(n, alpha);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[..k].iter().sum::<f64>() / k as f64)
}

fn tail_count(n: usize, alpha: f64) -> usize {
    // The epsilon keeps e.g. (1 - 0.7) * 10 from rounding up to 4.
    let k = ((1.0 - alpha) * n as f64 - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

/// CVaR risk of traversing from `from` to `to`.
pub fn edge_risk(field: &RiskField, from: Cell, to: Cell) -> Result<f64> {
    if !field.in_bounds(from) || !field.in_bounds(to) {
        return Err(Error::param(format!("edge {from:?} -> {to:?} leaves the risk field")));
    }
    if from == to || field.riskless {
        return Ok(0.0);
    }
    // Ordered endpoints make the samples independent of direction.
    let (a, b) = if from <= to { (from, to) } else { (to, from) };
    let cells = line_cells(a, b);
    let scale = from.dist(to) / (cells.len() - 1) as f64;
    if field.deterministic {
        let total: f64 = cells.iter().map(|c| field.cost_from_normal(*c, 0.0)).sum();
        return Ok(total * scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from(&[
        field.seed,
        a.x as u64,
        a.y as u64,
        b.x as u64,
        b.y as u64,
    ]));
    let samples: Vec<f64> = (0..field.sample_count)
        .map(|_| {
            cells
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    field.cost_from_normal(*c, z)
                })
                .sum()
        })
        .collect();
    Ok(cvar(&samples, field.alpha)? * scale)
}

/// Memoising front end to [`edge_risk`] owned by one simulation run.
#[derive(Clone, Debug)]
pub struct RiskCache {
    field: Arc<RiskField>,
    memo: HashMap<(Cell, Cell), f64>,
}

impl RiskCache {
    pub fn new(field: Arc<RiskField>) -> Self {
        Self {
            field,
            memo: HashMap::new(),
        }
    }

    pub fn field(&self) -> &RiskField {
        &self.field
    }

    /// Risk of an edge; out-of-bounds endpoints get infinite risk.
    pub fn edge(&mut self, from: Cell, to: Cell) -> f64 {
        let key = if from <= to { (from, to) } else { (to, from) };
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let v = edge_risk(&self.field, from, to).unwrap_or(f64::INFINITY);
        self.memo.insert(key, v);
        v
    }

    /// Sum of edge risks along consecutive cells.
    pub fn path(&mut self, cells: &[Cell]) -> f64 {
        cells.windows(2).map(|w| self.edge(w[0], w[1])).sum()
    }
}

/// Accumulated risk J of a policy: the sum of its edges' risks.
pub fn policy_risk(policy: &Policy, graph: &RoadmapGraph) -> Result<f64> {
    policy
        .edges
        .iter()
        .map(|&e| {
            graph
                .edges
                .get(e)
                .map(|edge| edge.risk)
                .ok_or(Error::DanglingEdge(e))
        })
        .sum()
}

/// Quantile of accumulated risk over every straight axis-aligned run of
/// `horizon` unit edges through free cells of `world`, floored at `floor`.
pub fn straight_path_risk_quantile(
    cache: &mut RiskCache,
    world: &WorldModel,
    horizon: usize,
    quantile: f64,
    floor: f64,
) -> f64 {
    let mut sums = Vec::new();
    for c in world.occupancy().cells() {
        for (dx, dy) in [(1, 0), (0, 1)] {
            let run: Vec<Cell> = (0..=horizon as i32).map(|k| c.offset(k * dx, k * dy)).collect();
            if run.iter().all(|c| world.is_free(*c)) {
                sums.push(cache.path(&run));
            }
        }
    }
    if sums.is_empty() {
        return floor;
    }
    sums.sort_by(f64::total_cmp);
    let rank = ((quantile * sums.len() as f64).ceil() as usize).clamp(1, sums.len());
    sums[rank - 1].max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(cells: &[(i32, i32, f64, f64)], alpha: f64) -> RiskField {
        let mut terrain = Grid::filled(4, 4, TerrainRisk::SMOOTH);
        for &(x, y, mu, sigma) in cells {
            terrain.set(Cell::new(x, y), TerrainRisk::new(mu, sigma));
        }
        RiskField::new(
            terrain,
            RiskConfig {
                alpha,
                ..Default::default()
            },
            7,
        )
        .unwrap()
    }

    #[test]
    fn cvar_examples() {
        assert_eq!(cvar(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 3.5);
        assert_eq!(cvar(&[2.5; 9], 0.3).unwrap(), 2.5);
        let s: Vec<f64> = (0..100).map(f64::from).collect();
        assert!((cvar(&s, 0.9).unwrap() - 94.5).abs() < 1e-12);
        assert!(matches!(cvar(&[], 0.9), Err(Error::EmptySamples)));
        assert!(cvar(&[1.0], 1.0).is_err());
    }

    #[test]
    fn tail_count_is_robust_to_rounding() {
        assert_eq!(tail_count(10, 0.7), 3);
        assert_eq!(tail_count(100, 0.9), 10);
        assert_eq!(tail_count(10, 0.9), 1);
        assert_eq!(tail_count(3, 0.999), 1);
    }

    #[test]
    fn smooth_cells_have_zero_risk() {
        let f = field(&[], 0.9);
        assert_eq!(edge_risk(&f, Cell::new(0, 0), Cell::new(1, 0)).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_cells_sum_regardless_of_alpha() {
        for alpha in [0.1, 0.5, 0.95] {
            let mut f = field(&[(0, 0, 0.1, 0.0), (1, 0, 0.2, 0.0), (3, 3, 0.4, 0.3)], alpha);
            let r = edge_risk(&f, Cell::new(0, 0), Cell::new(1, 0)).unwrap();
            assert!((r - 0.3).abs() < 1e-12, "{r}");
            // Same answer on the sampled path.
            f.deterministic = false;
            let r = edge_risk(&f, Cell::new(0, 0), Cell::new(1, 0)).unwrap();
            assert!((r - 0.3).abs() < 1e-12, "{r}");
        }
    }

    #[test]
    fn edge_risk_is_symmetric_and_repeatable() {
        let f = field(&[(1, 1, 0.5, 0.8), (2, 1, 0.3, 0.4)], 0.9);
        let a = edge_risk(&f, Cell::new(1, 1), Cell::new(2, 1)).unwrap();
        let b = edge_risk(&f, Cell::new(2, 1), Cell::new(1, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, edge_risk(&f, Cell::new(1, 1), Cell::new(2, 1)).unwrap());
        assert!(a > 0.0);
    }

    #[test]
    fn out_of_bounds_edge_is_an_error() {
        let f = field(&[], 0.9);
        assert!(edge_risk(&f, Cell::new(0, 0), Cell::new(-1, 0)).is_err());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let terrain = Grid::filled(2, 2, TerrainRisk::SMOOTH);
        let bad_alpha = RiskConfig { alpha: 1.0, ..Default::default() };
        assert!(RiskField::new(terrain.clone(), bad_alpha, 0).is_err());
        let bad_n = RiskConfig { sample_count: 0, ..Default::default() };
        assert!(RiskField::new(terrain, bad_n, 0).is_err());
    }

    #[test]
    fn cache_matches_direct_evaluation() {
        let f = Arc::new(field(&[(1, 1, 0.5, 0.8), (2, 1, 0.3, 0.4)], 0.9));
        let mut cache = RiskCache::new(f.clone());
        let direct = edge_risk(&f, Cell::new(1, 1), Cell::new(2, 1)).unwrap();
        assert_eq!(cache.edge(Cell::new(2, 1), Cell::new(1, 1)), direct);
        let path = [Cell::new(0, 1), Cell::new(1, 1), Cell::new(2, 1)];
        let expected = edge_risk(&f, path[0], path[1]).unwrap() + direct;
        assert_eq!(cache.path(&path), expected);
    }
}
