//! Belief overlay and the ray-cast coverage sensor.

use serde::{Deserialize, Serialize};

use super::WorldModel;
use crate::error::{Error, Result};
use crate::grid::{wrap_angle, Cell, Grid, LineIter, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Knowledge {
    Unknown,
    Free,
    Obstacle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    /// Metres.
    pub range: f64,
    /// Field of view in radians, centred on the robot heading.
    pub arc: f64,
    /// Obstacles block rays.
    pub occlusion: bool,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            range: 3.0,
            arc: std::f64::consts::TAU,
            occlusion: true,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::param("sensor range must be positive"));
        }
        if !(self.arc > 0.0 && self.arc <= std::f64::consts::TAU) {
            return Err(Error::param("sensor arc must be in (0, 2*pi]"));
        }
        Ok(())
    }

    /// Range in cells for the given resolution.
    pub fn range_cells(&self, cell_size: f64) -> f64 {
        self.range / cell_size
    }

    pub(crate) fn in_arc(&self, from: Cell, to: Cell, heading: f64) -> bool {
        if self.arc >= std::f64::consts::TAU || from == to {
            return true;
        }
        let bearing = ((to.y - from.y) as f64).atan2((to.x - from.x) as f64);
        wrap_angle(bearing - heading).abs() <= 0.5 * self.arc + 1e-12
    }
}

/// The robot's knowledge of the world.
///
/// Cells only ever move from unknown to known; a known cell is also covered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefGrid {
    cell_size: f64,
    cells: Grid<Knowledge>,
    covered: Grid<bool>,
    covered_count: usize,
    covered_free: usize,
    stamp: u64,
}

impl BeliefGrid {
    pub fn unknown(width: usize, height: usize, cell_size: f64) -> Self {
        Self {
            cell_size,
            cells: Grid::filled(width, height, Knowledge::Unknown),
            covered: Grid::filled(width, height, false),
            covered_count: 0,
            covered_free: 0,
            stamp: 0,
        }
    }

    pub fn for_world(world: &WorldModel) -> Self {
        Self::unknown(world.width(), world.height(), world.cell_size())
    }

    /// A belief in which every cell of `world` is known and covered.
    pub fn fully_known(world: &WorldModel) -> Self {
        let mut b = Self::for_world(world);
        for c in world.occupancy().cells() {
            let k = if world.is_free(c) {
                Knowledge::Free
            } else {
                Knowledge::Obstacle
            };
            b.observe(c, k);
        }
        b
    }

    pub fn width(&self) -> usize {
        self.cells.width()
    }

    pub fn height(&self) -> usize {
        self.cells.height()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// Number of sensor updates applied so far.
    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.cells.in_bounds(c)
    }

    /// Out-of-bounds cells read as obstacles.
    pub fn get(&self, c: Cell) -> Knowledge {
        self.cells.get(c).copied().unwrap_or(Knowledge::Obstacle)
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.cells.get(c) == Some(&Knowledge::Free)
    }

    pub fn is_unknown(&self, c: Cell) -> bool {
        self.cells.get(c) == Some(&Knowledge::Unknown)
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.get(c) == Knowledge::Obstacle
    }

    pub fn is_covered(&self, c: Cell) -> bool {
        self.covered.get(c).copied().unwrap_or(false)
    }

    pub fn covered_count(&self) -> usize {
        self.covered_count
    }

    /// Covered cells that are free.
    pub fn covered_free_count(&self) -> usize {
        self.covered_free
    }

    pub fn unknown_count(&self) -> usize {
        self.cells
            .as_slice()
            .iter()
            .filter(|k| **k == Knowledge::Unknown)
            .count()
    }

    pub fn cells(&self) -> &Grid<Knowledge> {
        &self.cells
    }

    pub fn covered_grid(&self) -> &Grid<bool> {
        &self.covered
    }

    /// Record an observation of `c`. Returns true when the cell was newly covered.
    /// Known cells are never reverted to unknown.
    pub fn observe(&mut self, c: Cell, k: Knowledge) -> bool {
        let Some(slot) = self.cells.get_mut(c) else {
            return false;
        };
        if k != Knowledge::Unknown && *slot == Knowledge::Unknown {
            *slot = k;
        }
        let newly = !self.covered[c] && *slot != Knowledge::Unknown;
        if newly {
            self.covered.set(c, true);
            self.covered_count += 1;
            if *slot == Knowledge::Free {
                self.covered_free += 1;
            }
        }
        newly
    }

    /// Count unknown 4-neighbours of `c`.
    pub fn unknown_neighbors(&self, c: Cell) -> usize {
        c.neighbors4().iter().filter(|n| self.is_unknown(**n)).count()
    }
}

/// Apply one noiseless scan from `pose`. Every cell within range whose
/// integer ray from the robot cell is not blocked before reaching it becomes
/// known and covered; the blocking obstacle itself is observed too.
///
/// Returns the number of newly covered cells.
pub fn sense(
    world: &WorldModel,
    belief: &mut BeliefGrid,
    pose: &Pose,
    sensor: &SensorSpec,
) -> Result<usize> {
    let origin = pose.cell(world.cell_size());
    if !world.is_free(origin) {
        return Err(Error::InvalidPose(origin));
    }
    let r = sensor.range_cells(world.cell_size());
    let r_sq = r * r;
    let ri = r.floor() as i32;
    let mut newly = 0;
    newly += belief.observe(origin, Knowledge::Free) as usize;
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if ((dx * dx + dy * dy) as f64) > r_sq + 1e-9 {
                continue;
            }
            let target = origin.offset(dx, dy);
            if !world.in_bounds(target) || !sensor.in_arc(origin, target, pose.heading) {
                continue;
            }
            if sensor.occlusion && !ray_clear(world, origin, target) {
                continue;
            }
            let k = if world.is_free(target) {
                Knowledge::Free
            } else {
                Knowledge::Obstacle
            };
            newly += belief.observe(target, k) as usize;
        }
    }
    belief.stamp += 1;
    Ok(newly)
}

/// True when no obstacle lies strictly between `from` and `to`.
fn ray_clear(world: &WorldModel, from: Cell, to: Cell) -> bool {
    LineIter::new(from, to)
        .skip(1)
        .take_while(|c| *c != to)
        .all(|c| world.is_free(c))
}

/// Covered cells times the cell area, in square metres.
pub fn covered_area(belief: &BeliefGrid) -> f64 {
    belief.covered_count() as f64 * belief.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Pose;
    use crate::world::WorldModel;

    fn empty(n: usize) -> WorldModel {
        let rows: Vec<String> = (0..n).map(|_| ".".repeat(n)).collect();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        WorldModel::from_ascii(&refs, 0.5).unwrap()
    }

    #[test]
    fn covers_whole_empty_world() {
        let w = empty(5);
        let mut b = BeliefGrid::for_world(&w);
        let pose = Pose::at_cell(Cell::new(2, 2), 0.5);
        let sensor = SensorSpec {
            range: 10.0,
            ..Default::default()
        };
        sense(&w, &mut b, &pose, &sensor).unwrap();
        assert_eq!(b.covered_count(), 25);
        assert_eq!(covered_area(&b), 25.0 * 0.25);
    }

    #[test]
    fn sensing_is_idempotent() {
        let w = WorldModel::from_ascii(&[".....", "..#..", ".S...", "....."], 0.5).unwrap();
        let mut b = BeliefGrid::for_world(&w);
        let pose = Pose::at_cell(w.spawn(), 0.5);
        let sensor = SensorSpec::default();
        sense(&w, &mut b, &pose, &sensor).unwrap();
        let first = b.clone();
        let n = sense(&w, &mut b, &pose, &sensor).unwrap();
        assert_eq!(n, 0);
        assert_eq!(first.cells(), b.cells());
        assert_eq!(first.covered_grid(), b.covered_grid());
    }

    #[test]
    fn rejects_pose_on_obstacle() {
        let w = WorldModel::from_ascii(&["#.", ".S"], 0.5).unwrap();
        let mut b = BeliefGrid::for_world(&w);
        let pose = Pose::at_cell(Cell::new(0, 1), 0.5);
        assert!(matches!(
            sense(&w, &mut b, &pose, &SensorSpec::default()),
            Err(Error::InvalidPose(_))
        ));
        let outside = Pose::new(-1.0, 0.2, 0.0);
        assert!(sense(&w, &mut b, &outside, &SensorSpec::default()).is_err());
    }

    #[test]
    fn arc_restricts_field_of_view() {
        let w = empty(9);
        let mut b = BeliefGrid::for_world(&w);
        let sensor = SensorSpec {
            range: 10.0,
            arc: std::f64::consts::FRAC_PI_2,
            occlusion: true,
        };
        let pose = Pose::at_cell(Cell::new(4, 4), 0.5);
        sense(&w, &mut b, &pose, &sensor).unwrap();
        assert!(b.is_covered(Cell::new(8, 4)));
        assert!(!b.is_covered(Cell::new(0, 4)));
    }

    #[test]
    fn zero_belief_has_zero_area() {
        let b = BeliefGrid::unknown(4, 4, 0.5);
        assert_eq!(covered_area(&b), 0.0);
    }

    #[test]
    fn sensor_spec_validation() {
        assert!(SensorSpec { range: 0.0, ..Default::default() }.validate().is_err());
        assert!(SensorSpec { arc: 7.0, ..Default::default() }.validate().is_err());
        assert!(SensorSpec::default().validate().is_ok());
    }
}
