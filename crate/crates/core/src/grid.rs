//! Integer cell coordinates, continuous poses, and a dense row-major grid.

use serde::{Deserialize, Serialize};

/// A grid cell. `x` grows east (columns), `y` grows north (rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    /// 4-connected neighbours in E, N, W, S order.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
            self.offset(0, -1),
        ]
    }

    /// 8-connected neighbours, orthogonal first.
    pub fn neighbors8(self) -> [Cell; 8] {
        [
            self.offset(1, 0),
            self.offset(0, 1),
            self.offset(-1, 0),
            self.offset(0, -1),
            self.offset(1, 1),
            self.offset(-1, 1),
            self.offset(-1, -1),
            self.offset(1, -1),
        ]
    }

    /// Distance between cell centres, in cells.
    pub fn dist(self, other: Cell) -> f64 {
        let dx = (self.x - other.x) as f64;
        let dy = (self.y - other.y) as f64;
        dx.hypot(dy)
    }

    pub fn dist_sq(self, other: Cell) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        dx * dx + dy * dy
    }
}

/// A continuous point in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn heading_to(self, other: Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    /// Centre of `cell` for the given cell size.
    pub fn center_of(cell: Cell, cell_size: f64) -> Self {
        Self::new(
            (cell.x as f64 + 0.5) * cell_size,
            (cell.y as f64 + 0.5) * cell_size,
        )
    }

    /// The cell containing this point.
    pub fn cell(self, cell_size: f64) -> Cell {
        Cell::new(
            (self.x / cell_size).floor() as i32,
            (self.y / cell_size).floor() as i32,
        )
    }
}

/// Robot pose: position in metres plus heading in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn at_cell(cell: Cell, cell_size: f64) -> Self {
        let p = Point::center_of(cell, cell_size);
        Self::new(p.x, p.y, 0.0)
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn cell(&self, cell_size: f64) -> Cell {
        self.point().cell(cell_size)
    }
}

/// Dense row-major grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    pub fn index(&self, cell: Cell) -> Option<usize> {
        self.in_bounds(cell)
            .then(|| cell.y as usize * self.width + cell.x as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn get(&self, cell: Cell) -> Option<&T> {
        self.index(cell).map(|i| &self.data[i])
    }

    pub fn get_mut(&mut self, cell: Cell) -> Option<&mut T> {
        self.index(cell).map(move |i| &mut self.data[i])
    }

    /// Panics when `cell` is outside the grid.
    pub fn set(&mut self, cell: Cell, value: T) {
        let i = self.index(cell).expect("cell out of bounds");
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (Cell::new((i % w) as i32, (i / w) as i32), v))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let w = self.width;
        (0..self.data.len()).map(move |i| Cell::new((i % w) as i32, (i / w) as i32))
    }
}

impl<T> std::ops::Index<Cell> for Grid<T> {
    type Output = T;
    fn index(&self, cell: Cell) -> &T {
        let i = Grid::index(self, cell).expect("cell out of bounds");
        &self.data[i]
    }
}

impl<T> std::ops::IndexMut<Cell> for Grid<T> {
    fn index_mut(&mut self, cell: Cell) -> &mut T {
        let i = Grid::index(self, cell).expect("cell out of bounds");
        &mut self.data[i]
    }
}

/// Cells on the integer line from `a` to `b`, both endpoints included.
pub fn line_cells(a: Cell, b: Cell) -> Vec<Cell> {
    LineIter::new(a, b).collect()
}

/// Bresenham traversal from `a` to `b`, endpoints included.
#[derive(Clone, Debug)]
pub struct LineIter {
    x: i32,
    y: i32,
    end: Cell,
    dx: i32,
    dy: i32,
    sx: i32,
    sy: i32,
    err: i32,
    done: bool,
}

impl LineIter {
    pub fn new(a: Cell, b: Cell) -> Self {
        let dx = (b.x - a.x).abs();
        let dy = -(b.y - a.y).abs();
        Self {
            x: a.x,
            y: a.y,
            end: b,
            dx,
            dy,
            sx: if a.x < b.x { 1 } else { -1 },
            sy: if a.y < b.y { 1 } else { -1 },
            err: dx + dy,
            done: false,
        }
    }
}

impl Iterator for LineIter {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        if self.done {
            return None;
        }
        let out = Cell::new(self.x, self.y);
        if self.x == self.end.x && self.y == self.end.y {
            self.done = true;
            return Some(out);
        }
        let e2 = 2 * self.err;
        if e2 >= self.dy {
            self.err += self.dy;
            self.x += self.sx;
        }
        if e2 <= self.dx {
            self.err += self.dx;
            self.y += self.sy;
        }
        Some(out)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Deterministic 64-bit mixer (splitmix64 finaliser).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine several words into one seed.
pub fn seed_from(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| mix64(acc ^ mix64(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_includes_endpoints() {
        let l = line_cells(Cell::new(0, 0), Cell::new(3, 1));
        assert_eq!(l.first(), Some(&Cell::new(0, 0)));
        assert_eq!(l.last(), Some(&Cell::new(3, 1)));
        assert_eq!(l.len(), 4);
        assert_eq!(line_cells(Cell::new(2, 2), Cell::new(2, 2)), vec![Cell::new(2, 2)]);
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.7);
            assert!(a > -std::f64::consts::PI - 1e-12 && a <= std::f64::consts::PI + 1e-12);
        }
    }

    #[test]
    fn grid_indexing() {
        let mut g = Grid::filled(3, 2, 0u8);
        g.set(Cell::new(2, 1), 7);
        assert_eq!(g.index(Cell::new(2, 1)), Some(5));
        assert_eq!(g.cell_at(5), Cell::new(2, 1));
        assert_eq!(g[Cell::new(2, 1)], 7);
        assert!(g.get(Cell::new(3, 0)).is_none());
    }
}
