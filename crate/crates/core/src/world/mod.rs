//! Ground-truth environments, procedural generators and the coverage sensor.

mod generate;
mod io;
mod sensing;

pub use generate::{
    generate_cave, generate_maze, generate_subway, maze_longest_deadend, CaveParams, MazeParams, SubwayParams,
    HIGH_RISK_MU,
};
pub use io::{load_world, save_world, WorldDocument, WORLD_FORMAT_VERSION};
pub use sensing::{covered_area, sense, BeliefGrid, Knowledge, SensorSpec};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Grid};

/// Default cell edge length in metres.
pub const DEFAULT_CELL_SIZE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Free,
    Obstacle,
}

/// Parameters of the per-cell traversal cost distribution.
///
/// A cost sample is `mu * exp(sigma * z)` with `z ~ N(0, 1)`, truncated at the
/// risk field's cap. `sigma = 0` makes the cost the constant `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct TerrainRisk {
    pub mu: f64,
    pub sigma: f64,
}

impl TerrainRisk {
    pub const SMOOTH: TerrainRisk = TerrainRisk { mu: 0.0, sigma: 0.0 };

    pub fn new(mu: f64, sigma: f64) -> Self {
        Self { mu, sigma }
    }

    /// Mean of the untruncated distribution.
    pub fn mean(&self) -> f64 {
        self.mu * (0.5 * self.sigma * self.sigma).exp()
    }
}

/// How a world was produced. Stored with the world so runs can regenerate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorParams {
    Subway(SubwayParams),
    Maze(MazeParams),
    Cave(CaveParams),
    /// Hand-drawn layout (tests, scripted scenarios).
    Handmade { name: String },
    /// A world saved as JSON; the seed is ignored.
    File { path: String },
}

impl GeneratorParams {
    pub fn kind(&self) -> &str {
        match self {
            GeneratorParams::Subway(_) => "subway",
            GeneratorParams::Maze(_) => "maze",
            GeneratorParams::Cave(_) => "cave",
            GeneratorParams::Handmade { .. } => "handmade",
            GeneratorParams::File { .. } => "file",
        }
    }

    /// Regenerate the world these parameters describe.
    pub fn generate(&self, seed: u64) -> Result<WorldModel> {
        match self {
            GeneratorParams::Subway(p) => generate_subway(seed, p),
            GeneratorParams::Maze(p) => generate_maze(seed, p),
            GeneratorParams::Cave(p) => generate_cave(seed, p),
            GeneratorParams::Handmade { name } => crate::sim::scenarios::handmade_world(name),
            GeneratorParams::File { path } => load_world(std::path::Path::new(path)),
        }
    }
}

/// Ground-truth occupancy plus terrain risk. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    cell_size: f64,
    occupancy: Grid<Occupancy>,
    terrain: Grid<TerrainRisk>,
    spawn: Cell,
    seed: u64,
    params: GeneratorParams,
}

impl WorldModel {
    pub fn new(
        cell_size: f64,
        occupancy: Grid<Occupancy>,
        terrain: Grid<TerrainRisk>,
        spawn: Cell,
        seed: u64,
        params: GeneratorParams,
    ) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::param(format!("cell_size must be positive, got {cell_size}")));
        }
        if occupancy.width() != terrain.width() || occupancy.height() != terrain.height() {
            return Err(Error::param("occupancy and terrain grids differ in size"));
        }
        if let Some((c, _)) = terrain
            .iter()
            .find(|(_, r)| !(r.mu >= 0.0 && r.sigma >= 0.0 && r.mu.is_finite() && r.sigma.is_finite()))
        {
            return Err(Error::param(format!("terrain risk at {c:?} must be finite and nonnegative")));
        }
        if occupancy.get(spawn) != Some(&Occupancy::Free) {
            return Err(Error::InvalidPose(spawn));
        }
        Ok(Self {
            cell_size,
            occupancy,
            terrain,
            spawn,
            seed,
            params,
        })
    }

    /// Parse an ASCII layout. `#` is an obstacle, `.` free, `S` the spawn,
    /// `r` a free cell with high terrain risk (`mu = 1`, `sigma = 0.5`).
    /// The first line is the northmost row.
    pub fn from_ascii(rows: &[&str], cell_size: f64) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width == 0 || rows.iter().any(|r| r.chars().count() != width) {
            return Err(Error::param("ascii rows must be non-empty and equally long"));
        }
        let mut occ = Grid::filled(width, height, Occupancy::Obstacle);
        let mut terrain = Grid::filled(width, height, TerrainRisk::SMOOTH);
        let mut spawn = None;
        for (row, line) in rows.iter().enumerate() {
            let y = (height - 1 - row) as i32;
            for (x, ch) in line.chars().enumerate() {
                let c = Cell::new(x as i32, y);
                match ch {
                    '#' => {}
                    '.' => occ.set(c, Occupancy::Free),
                    'S' => {
                        occ.set(c, Occupancy::Free);
                        spawn = Some(c);
                    }
                    'r' => {
                        occ.set(c, Occupancy::Free);
                        terrain.set(c, TerrainRisk::new(1.0, 0.5));
                    }
                    other => return Err(Error::param(format!("unknown map character {other:?}"))),
                }
            }
        }
        let spawn = spawn
            .or_else(|| occ.iter().find(|(_, o)| **o == Occupancy::Free).map(|(c, _)| c))
            .ok_or_else(|| Error::param("map has no free cell"))?;
        Self::new(
            cell_size,
            occ,
            terrain,
            spawn,
            0,
            GeneratorParams::Handmade {
                name: "ascii".into(),
            },
        )
    }

    pub(crate) fn with_params(mut self, params: GeneratorParams) -> Self {
        self.params = params;
        self
    }

    pub fn width(&self) -> usize {
        self.occupancy.width()
    }

    pub fn height(&self) -> usize {
        self.occupancy.height()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn spawn(&self) -> Cell {
        self.spawn
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    pub fn occupancy(&self) -> &Grid<Occupancy> {
        &self.occupancy
    }

    pub fn terrain(&self) -> &Grid<TerrainRisk> {
        &self.terrain
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        self.occupancy.in_bounds(cell)
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.occupancy.get(cell) == Some(&Occupancy::Free)
    }

    /// Out-of-bounds cells count as obstacles.
    pub fn is_obstacle(&self, cell: Cell) -> bool {
        !self.is_free(cell)
    }

    pub fn risk(&self, cell: Cell) -> TerrainRisk {
        self.terrain.get(cell).copied().unwrap_or_default()
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupancy
            .as_slice()
            .iter()
            .filter(|o| **o == Occupancy::Free)
            .count()
    }

    /// 4-connected flood fill over free cells. Returns a per-cell reachability mask.
    pub fn reachable_from(&self, start: Cell) -> Grid<bool> {
        let mut seen = Grid::filled(self.width(), self.height(), false);
        if !self.is_free(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen.set(start, true);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors4() {
                if self.is_free(n) && !seen[n] {
                    seen.set(n, true);
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Number of free cells reachable from the spawn.
    pub fn reachable_free_count(&self) -> usize {
        self.reachable_from(self.spawn)
            .as_slice()
            .iter()
            .filter(|b| **b)
            .count()
    }

    /// Render the occupancy as rows of `#`/`.` (northmost row first).
    pub fn to_ascii(&self) -> Vec<String> {
        (0..self.height())
            .rev()
            .map(|y| {
                (0..self.width())
                    .map(|x| {
                        let c = Cell::new(x as i32, y as i32);
                        if c == self.spawn {
                            'S'
                        } else if self.is_free(c) {
                            '.'
                        } else {
                            '#'
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_round_trip_and_flood_fill() {
        let w = WorldModel::from_ascii(&["#####", "#S.##", "##..#", "#####"], 0.5).unwrap();
        assert_eq!(w.width(), 5);
        assert_eq!(w.height(), 4);
        assert_eq!(w.spawn(), Cell::new(1, 2));
        assert_eq!(w.free_cell_count(), 4);
        assert_eq!(w.reachable_free_count(), 4);
        assert_eq!(w.to_ascii()[1], "#S.##");
    }

    #[test]
    fn rejects_spawn_on_obstacle() {
        let occ = Grid::filled(3, 3, Occupancy::Obstacle);
        let terrain = Grid::filled(3, 3, TerrainRisk::SMOOTH);
        let err = WorldModel::new(
            0.5,
            occ,
            terrain,
            Cell::new(1, 1),
            0,
            GeneratorParams::Handmade { name: "x".into() },
        );
        assert!(matches!(err, Err(Error::InvalidPose(_))));
    }

    #[test]
    fn rejects_negative_risk() {
        let occ = Grid::filled(2, 2, Occupancy::Free);
        let mut terrain = Grid::filled(2, 2, TerrainRisk::SMOOTH);
        terrain.set(Cell::new(0, 0), TerrainRisk::new(-1.0, 0.0));
        let err = WorldModel::new(
            0.5,
            occ,
            terrain,
            Cell::new(1, 1),
            0,
            GeneratorParams::Handmade { name: "x".into() },
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
