//! Procedural generators: subway stations, mazes and caves.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeneratorParams, Occupancy, TerrainRisk, WorldModel, DEFAULT_CELL_SIZE};
use crate::error::{Error, Result};
use crate::grid::{seed_from, Cell, Grid};

/// Cells with `mu` above this count as high-risk terrain.
pub const HIGH_RISK_MU: f64 = 0.5;

const MAX_ATTEMPTS: usize = 16;

fn rng_for(seed: u64, stream: u64, attempt: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_from(&[seed, stream, attempt as u64]))
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubwayParams {
    pub rooms: usize,
    /// Room side length range in metres.
    pub room_size_min: f64,
    pub room_size_max: f64,
    #[serde(default = "SubwayParams::default_corridor")]
    pub corridor_width: usize,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

impl SubwayParams {
    pub fn new(rooms: usize, room_size_min: f64, room_size_max: f64) -> Self {
        Self {
            rooms,
            room_size_min,
            room_size_max,
            corridor_width: Self::default_corridor(),
            cell_size: DEFAULT_CELL_SIZE,
        }
    }

    fn default_corridor() -> usize {
        3
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MazeParams {
    pub width: usize,
    pub height: usize,
    /// Fraction of dead ends kept after braiding; 0 removes all of them.
    pub deadend_fraction: f64,
    /// Number of open rooms carved into the maze. `None` picks one per 900 cells.
    #[serde(default)]
    pub open_spaces: Option<usize>,
    /// Passage width in cells; walls are one cell thick.
    #[serde(default = "MazeParams::default_passage")]
    pub passage_width: usize,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

impl MazeParams {
    pub fn new(width: usize, height: usize, deadend_fraction: f64) -> Self {
        Self {
            width,
            height,
            deadend_fraction,
            open_spaces: None,
            passage_width: Self::default_passage(),
            cell_size: DEFAULT_CELL_SIZE,
        }
    }

    fn default_passage() -> usize {
        2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaveParams {
    pub width: usize,
    pub height: usize,
    pub risk_intensity: f64,
    #[serde(default = "CaveParams::default_fill")]
    pub fill: f64,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
}

impl CaveParams {
    pub fn new(width: usize, height: usize, risk_intensity: f64) -> Self {
        Self {
            width,
            height,
            risk_intensity,
            fill: Self::default_fill(),
            cell_size: DEFAULT_CELL_SIZE,
        }
    }

    fn default_fill() -> f64 {
        0.45
    }
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    x0: i32,
    y0: i32,
    w: i32,
    h: i32,
}

impl Rect {
    fn center(&self) -> Cell {
        Cell::new(self.x0 + self.w / 2, self.y0 + self.h / 2)
    }
}

fn carve_rect(occ: &mut Grid<Occupancy>, x0: i32, y0: i32, x1: i32, y1: i32) {
    for y in y0.min(y1)..=y0.max(y1) {
        for x in x0.min(x1)..=x0.max(x1) {
            if let Some(o) = occ.get_mut(Cell::new(x, y)) {
                *o = Occupancy::Free;
            }
        }
    }
}

/// Rectangular rooms on a jittered slot layout, joined by wide corridors.
pub fn generate_subway(seed: u64, params: &SubwayParams) -> Result<WorldModel> {
    if params.rooms == 0 {
        return Err(Error::param("subway needs at least one room"));
    }
    let cs = params.cell_size;
    if !(params.room_size_min > 0.0 && params.room_size_min <= params.room_size_max) {
        return Err(Error::param("room size range must satisfy 0 < min <= max"));
    }
    if !(cs > 0.0) {
        return Err(Error::param("cell_size must be positive"));
    }
    let smin = ((params.room_size_min / cs).round() as i32).max(2);
    let smax = ((params.room_size_max / cs).round() as i32).max(smin);
    let cw = params.corridor_width.max(1) as i32;

    let cols = (params.rooms as f64).sqrt().ceil() as i32;
    let rows = (params.rooms as i32 + cols - 1) / cols;
    let gap = 8;
    let slot = smax + gap;

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(seed, 0x5B_3A7, attempt);
        let canvas_w = (cols * slot + 2) as usize;
        let canvas_h = (rows * slot + 2) as usize;
        let mut occ = Grid::filled(canvas_w, canvas_h, Occupancy::Obstacle);

        let mut rooms = Vec::with_capacity(params.rooms);
        for k in 0..params.rooms as i32 {
            let (col, row) = (k % cols, k / cols);
            let w = rng.random_range(smin..=smax);
            let h = rng.random_range(smin..=smax);
            let x0 = 1 + col * slot + rng.random_range(0..=(slot - w - 1).max(0) / 2);
            let y0 = 1 + row * slot + rng.random_range(0..=(slot - h - 1).max(0) / 2);
            let r = Rect { x0, y0, w, h };
            carve_rect(&mut occ, x0, y0, x0 + w - 1, y0 + h - 1);
            rooms.push(r);
        }

        // Spanning tree over the slot layout, then a few extra links.
        let idx = |col: i32, row: i32| -> Option<usize> {
            let k = row * cols + col;
            (col < cols && k < params.rooms as i32).then_some(k as usize)
        };
        let mut links = Vec::new();
        let mut extra = Vec::new();
        for row in 0..rows {
            for col in 0..cols {
                let Some(a) = idx(col, row) else { continue };
                if let Some(b) = idx(col + 1, row) {
                    links.push((a, b));
                }
                if let Some(b) = idx(col, row + 1) {
                    if col == 0 {
                        links.push((a, b));
                    } else {
                        extra.push((a, b));
                    }
                }
            }
        }
        for pair in extra {
            if rng.random_bool(0.35) {
                links.push(pair);
            }
        }
        for (a, b) in links {
            let (ca, cb) = (rooms[a].center(), rooms[b].center());
            let half = cw / 2;
            let lo = -half;
            let hi = cw - 1 - half;
            if rng.random_bool(0.5) {
                carve_rect(&mut occ, ca.x, ca.y + lo, cb.x, ca.y + hi);
                carve_rect(&mut occ, cb.x + lo, ca.y, cb.x + hi, cb.y);
            } else {
                carve_rect(&mut occ, ca.x + lo, ca.y, ca.x + hi, cb.y);
                carve_rect(&mut occ, ca.x, cb.y + lo, cb.x, cb.y + hi);
            }
        }

        let occ = crop_to_free(&occ);
        let (occ, offset) = match occ {
            Some(v) => v,
            None => continue,
        };
        let spawn = rooms[0].center().offset(-offset.x, -offset.y);
        let terrain = Grid::filled(occ.width(), occ.height(), TerrainRisk::SMOOTH);
        let world = WorldModel::new(
            cs,
            occ,
            terrain,
            spawn,
            seed,
            GeneratorParams::Subway(params.clone()),
        )?;
        if world.reachable_free_count() == world.free_cell_count() {
            return Ok(world);
        }
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: "subway rooms could not be connected".into(),
    })
}

/// Crop to the bounding box of free cells plus a one-cell obstacle border.
fn crop_to_free(occ: &Grid<Occupancy>) -> Option<(Grid<Occupancy>, Cell)> {
    let free: Vec<Cell> = occ
        .iter()
        .filter(|(_, o)| **o == Occupancy::Free)
        .map(|(c, _)| c)
        .collect();
    let x0 = free.iter().map(|c| c.x).min()? - 1;
    let y0 = free.iter().map(|c| c.y).min()? - 1;
    let x1 = free.iter().map(|c| c.x).max()? + 1;
    let y1 = free.iter().map(|c| c.y).max()? + 1;
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut out = Grid::filled(w, h, Occupancy::Obstacle);
    for c in free {
        out.set(c.offset(-x0, -y0), Occupancy::Free);
    }
    Some((out, Cell::new(x0, y0)))
}

/// Links of a maze laid out on a logical `mw x mh` lattice.
struct MazeGraph {
    mw: i32,
    mh: i32,
    /// `east[j * mw + i]` joins `(i, j)` and `(i + 1, j)`.
    east: Vec<bool>,
    /// `north[j * mw + i]` joins `(i, j)` and `(i, j + 1)`.
    north: Vec<bool>,
}

const DIRS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl MazeGraph {
    fn new(mw: i32, mh: i32) -> Self {
        let n = (mw * mh) as usize;
        Self {
            mw,
            mh,
            east: vec![false; n],
            north: vec![false; n],
        }
    }

    fn inside(&self, i: i32, j: i32) -> bool {
        i >= 0 && j >= 0 && i < self.mw && j < self.mh
    }

    fn slot(&mut self, i: i32, j: i32, di: i32, dj: i32) -> &mut bool {
        let (bi, bj) = (i.min(i + di), j.min(j + dj));
        let k = (bj * self.mw + bi) as usize;
        if di != 0 {
            &mut self.east[k]
        } else {
            &mut self.north[k]
        }
    }

    fn linked(&self, i: i32, j: i32, di: i32, dj: i32) -> bool {
        if !self.inside(i + di, j + dj) {
            return false;
        }
        let (bi, bj) = (i.min(i + di), j.min(j + dj));
        let k = (bj * self.mw + bi) as usize;
        if di != 0 {
            self.east[k]
        } else {
            self.north[k]
        }
    }

    fn link(&mut self, i: i32, j: i32, di: i32, dj: i32) {
        *self.slot(i, j, di, dj) = true;
    }

    fn degree(&self, i: i32, j: i32) -> usize {
        DIRS.iter().filter(|&&(di, dj)| self.linked(i, j, di, dj)).count()
    }

    /// Logical cells in the corridor from dead end `(i, j)` up to the first
    /// junction, exclusive.
    fn deadend_length(&self, i: i32, j: i32) -> usize {
        let (mut cur, mut prev) = ((i, j), None);
        let mut len = 0;
        loop {
            let deg = self.degree(cur.0, cur.1);
            if deg > 2 {
                return len;
            }
            len += 1;
            let next = DIRS
                .iter()
                .map(|&(di, dj)| (cur.0 + di, cur.1 + dj, di, dj))
                .find(|&(ni, nj, di, dj)| self.linked(cur.0, cur.1, di, dj) && Some((ni, nj)) != prev);
            match next {
                Some((ni, nj, _, _)) if len <= (self.mw * self.mh) as usize => {
                    prev = Some(cur);
                    cur = (ni, nj);
                }
                _ => return len,
            }
        }
    }

    fn longest_deadend(&self) -> usize {
        (0..self.mh)
            .flat_map(|j| (0..self.mw).map(move |i| (i, j)))
            .filter(|&(i, j)| self.degree(i, j) == 1)
            .map(|(i, j)| self.deadend_length(i, j))
            .max()
            .unwrap_or(0)
    }
}

/// Recursive-backtracker maze with optional braiding and open rooms.
///
/// The maze lives on a lattice of `passage_width`-cell squares separated by
/// one-cell walls.
pub fn generate_maze(seed: u64, params: &MazeParams) -> Result<WorldModel> {
    let (width, height) = (params.width, params.height);
    let pw = params.passage_width;
    if pw == 0 {
        return Err(Error::param("passage_width must be at least 1"));
    }
    let period = pw as i32 + 1;
    let mw = (width as i32 - 1) / period;
    let mh = (height as i32 - 1) / period;
    if width < 5 || height < 5 || mw < 2 || mh < 2 {
        return Err(Error::param(
            "maze needs width and height of at least 5 cells and two passages each way",
        ));
    }
    if !(0.0..=1.0).contains(&params.deadend_fraction) {
        return Err(Error::param("deadend_fraction must be in [0, 1]"));
    }
    let open_spaces = params.open_spaces.unwrap_or((width * height) / 900);

    let mut best: Option<MazeGraph> = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(seed, 0x3A2E, attempt);
        let mut g = MazeGraph::new(mw, mh);
        let mut visited = vec![false; (mw * mh) as usize];
        let start = (rng.random_range(0..mw), rng.random_range(0..mh));
        let mut stack = vec![start];
        visited[(start.1 * mw + start.0) as usize] = true;
        while let Some(&(i, j)) = stack.last() {
            let mut dirs = DIRS;
            dirs.shuffle(&mut rng);
            let next = dirs.iter().find_map(|&(di, dj)| {
                let (ni, nj) = (i + di, j + dj);
                (g.inside(ni, nj) && !visited[(nj * mw + ni) as usize]).then_some((ni, nj, di, dj))
            });
            match next {
                Some((ni, nj, di, dj)) => {
                    visited[(nj * mw + ni) as usize] = true;
                    g.link(i, j, di, dj);
                    stack.push((ni, nj));
                }
                None => {
                    stack.pop();
                }
            }
        }

        for _ in 0..open_spaces {
            if mw < 3 || mh < 3 {
                break;
            }
            let rw = rng.random_range(2..=3.min(mw - 1));
            let rh = rng.random_range(2..=3.min(mh - 1));
            let i0 = rng.random_range(0..=mw - rw);
            let j0 = rng.random_range(0..=mh - rh);
            for j in j0..j0 + rh {
                for i in i0..i0 + rw {
                    if i + 1 < i0 + rw {
                        g.link(i, j, 1, 0);
                    }
                    if j + 1 < j0 + rh {
                        g.link(i, j, 0, 1);
                    }
                }
            }
        }

        // Braid: open a wall at each dead end that is not kept, preferring
        // one that also removes a neighbouring dead end.
        let mut deadends: Vec<(i32, i32)> = (0..mh)
            .flat_map(|j| (0..mw).map(move |i| (i, j)))
            .filter(|&(i, j)| g.degree(i, j) == 1)
            .collect();
        deadends.shuffle(&mut rng);
        for (i, j) in deadends {
            if g.degree(i, j) != 1 {
                continue;
            }
            if rng.random::<f64>() < params.deadend_fraction {
                continue;
            }
            let mut walls: Vec<((i32, i32), bool)> = DIRS
                .iter()
                .filter(|&&(di, dj)| g.inside(i + di, j + dj) && !g.linked(i, j, di, dj))
                .map(|&(di, dj)| ((di, dj), g.degree(i + di, j + dj) == 1))
                .collect();
            if walls.iter().any(|w| w.1) {
                walls.retain(|w| w.1);
            }
            if let Some(&((di, dj), _)) = walls.choose(&mut rng) {
                g.link(i, j, di, dj);
            }
        }

        let ok = params.deadend_fraction == 0.0 || g.longest_deadend() >= 5;
        if ok || best.is_none() {
            best = Some(g);
        }
        if ok {
            break;
        }
    }
    let g = best.expect("at least one maze attempt");

    let mut occ = Grid::filled(width, height, Occupancy::Obstacle);
    let origin = |i: i32, j: i32| Cell::new(1 + i * period, 1 + j * period);
    let last = pw as i32 - 1;
    for j in 0..mh {
        for i in 0..mw {
            let o = origin(i, j);
            carve_rect(&mut occ, o.x, o.y, o.x + last, o.y + last);
            if g.linked(i, j, 1, 0) {
                carve_rect(&mut occ, o.x + pw as i32, o.y, o.x + pw as i32, o.y + last);
            }
            if g.linked(i, j, 0, 1) {
                carve_rect(&mut occ, o.x, o.y + pw as i32, o.x + last, o.y + pw as i32);
            }
        }
    }
    let (ci, cj) = (mw / 2, mh / 2);
    let spawn = origin(ci, cj).offset(last / 2, last / 2);
    let terrain = Grid::filled(width, height, TerrainRisk::SMOOTH);
    WorldModel::new(
        params.cell_size,
        occ,
        terrain,
        spawn,
        seed,
        GeneratorParams::Maze(params.clone()),
    )
}

/// Longest dead-end corridor of a generated maze, in passages.
pub fn maze_longest_deadend(seed: u64, params: &MazeParams) -> Result<usize> {
    let world = generate_maze(seed, params)?;
    let period = params.passage_width as i32 + 1;
    let (mw, mh) = ((world.width() as i32 - 1) / period, (world.height() as i32 - 1) / period);
    let mut g = MazeGraph::new(mw, mh);
    for j in 0..mh {
        for i in 0..mw {
            let o = Cell::new(1 + i * period, 1 + j * period);
            if i + 1 < mw && world.is_free(o.offset(period - 1, 0)) {
                g.link(i, j, 1, 0);
            }
            if j + 1 < mh && world.is_free(o.offset(0, period - 1)) {
                g.link(i, j, 0, 1);
            }
        }
    }
    Ok(g.longest_deadend())
}

/// Cellular-automaton cavern with a spatially correlated risk field.
pub fn generate_cave(seed: u64, params: &CaveParams) -> Result<WorldModel> {
    let (width, height) = (params.width, params.height);
    if width < 5 || height < 5 {
        return Err(Error::param("cave needs width and height of at least 5 cells"));
    }
    if !(0.0..=1.0).contains(&params.risk_intensity) {
        return Err(Error::param("risk_intensity must be in [0, 1]"));
    }
    if !(0.0..1.0).contains(&params.fill) {
        return Err(Error::param("fill must be in [0, 1)"));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = rng_for(seed, 0xCA7E, attempt);
        let mut occ = Grid::filled(width, height, Occupancy::Obstacle);
        for y in 1..height - 1 {
            for x in 1..width - 1 {
                if rng.random::<f64>() >= params.fill {
                    occ.set(Cell::new(x as i32, y as i32), Occupancy::Free);
                }
            }
        }
        for _ in 0..5 {
            let prev = occ.clone();
            for c in prev.cells() {
                let border = c.x == 0 || c.y == 0 || c.x as usize == width - 1 || c.y as usize == height - 1;
                if border {
                    continue;
                }
                let walls = c
                    .neighbors8()
                    .iter()
                    .filter(|n| prev.get(**n) != Some(&Occupancy::Free))
                    .count();
                let v = if walls >= 5 {
                    Occupancy::Obstacle
                } else if walls <= 3 {
                    Occupancy::Free
                } else {
                    prev[c]
                };
                occ.set(c, v);
            }
        }

        // Keep the largest 4-connected region.
        let mut label = Grid::filled(width, height, usize::MAX);
        let mut regions: Vec<Vec<Cell>> = Vec::new();
        for c in occ.cells() {
            if occ[c] != Occupancy::Free || label[c] != usize::MAX {
                continue;
            }
            let id = regions.len();
            let mut members = vec![c];
            label.set(c, id);
            let mut k = 0;
            while k < members.len() {
                let m = members[k];
                k += 1;
                for n in m.neighbors4() {
                    if occ.get(n) == Some(&Occupancy::Free) && label[n] == usize::MAX {
                        label.set(n, id);
                        members.push(n);
                    }
                }
            }
            regions.push(members);
        }
        let Some((keep, region)) = regions
            .iter()
            .enumerate()
            .max_by_key(|(i, r)| (r.len(), std::cmp::Reverse(*i)))
        else {
            continue;
        };
        if region.len() * 10 < width * height * 3 {
            continue;
        }
        for c in occ.cells().collect::<Vec<_>>() {
            if occ[c] == Occupancy::Free && label[c] != keep {
                occ.set(c, Occupancy::Obstacle);
            }
        }
        let centre = Cell::new(width as i32 / 2, height as i32 / 2);
        let spawn = *region
            .iter()
            .min_by_key(|c| (c.dist_sq(centre), c.y, c.x))
            .expect("non-empty region");

        let terrain = cave_terrain(seed, &occ, params.risk_intensity);
        return WorldModel::new(
            params.cell_size,
            occ,
            terrain,
            spawn,
            seed,
            GeneratorParams::Cave(params.clone()),
        );
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: "cavern too fragmented".into(),
    })
}

/// Blurred noise normalised to [0, 1] over free cells, scaled by intensity.
/// The noise stream is independent of the intensity, so raising the
/// intensity only rescales the same field.
fn cave_terrain(seed: u64, occ: &Grid<Occupancy>, intensity: f64) -> Grid<TerrainRisk> {
    let (w, h) = (occ.width(), occ.height());
    let mut rng = rng_for(seed, 0x21_5C, 0);
    let mut field: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
    let radius = 2i32;
    for _ in 0..3 {
        let src = field.clone();
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut sum = 0.0;
                let mut n = 0.0;
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                            sum += src[ny as usize * w + nx as usize];
                            n += 1.0;
                        }
                    }
                }
                field[y as usize * w + x as usize] = sum / n;
            }
        }
    }
    let free_vals = occ
        .iter()
        .filter(|(_, o)| **o == Occupancy::Free)
        .map(|(c, _)| field[c.y as usize * w + c.x as usize]);
    let (lo, hi) = free_vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut terrain = Grid::filled(w, h, TerrainRisk::SMOOTH);
    for c in occ.cells() {
        if occ[c] != Occupancy::Free || intensity == 0.0 {
            continue;
        }
        let n = ((field[c.y as usize * w + c.x as usize] - lo) / span).clamp(0.0, 1.0);
        // Square to sharpen the contrast between benign floor and hazards.
        let s = n * n;
        terrain.set(c, TerrainRisk::new(intensity * 1.2 * s, 0.6 * intensity * s));
    }
    terrain
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_room_subway_is_an_open_rectangle() {
        let w = generate_subway(1, &SubwayParams::new(1, 10.0, 10.0)).unwrap();
        assert_eq!((w.width(), w.height()), (22, 22));
        for c in w.occupancy().cells() {
            let interior = c.x > 0 && c.y > 0 && c.x < 21 && c.y < 21;
            assert_eq!(w.is_free(c), interior, "{c:?}");
        }
        assert!(w.terrain().as_slice().iter().all(|r| r.mu == 0.0));
    }

    #[test]
    fn subway_rejects_zero_rooms() {
        assert!(generate_subway(1, &SubwayParams::new(0, 5.0, 8.0)).is_err());
    }

    #[test]
    fn maze_rejects_tiny_dimensions() {
        assert!(generate_maze(1, &MazeParams::new(4, 9, 0.5)).is_err());
        assert!(generate_maze(1, &MazeParams::new(9, 9, 1.5)).is_err());
    }

    #[test]
    fn cave_rejects_bad_intensity() {
        assert!(generate_cave(1, &CaveParams::new(30, 30, 1.5)).is_err());
    }

    #[test]
    fn deadend_length_counts_to_junction() {
        // A T junction at (1, 0) with a 3-passage stub running north.
        let mut g = MazeGraph::new(3, 4);
        g.link(0, 0, 1, 0);
        g.link(1, 0, 1, 0);
        for j in 0..3 {
            g.link(1, j, 0, 1);
        }
        assert_eq!(g.deadend_length(1, 3), 3);
        assert_eq!(g.deadend_length(0, 0), 1);
        assert_eq!(g.longest_deadend(), 3);
    }

    #[test]
    fn perfect_maze_is_connected_with_wide_passages() {
        let p = MazeParams::new(51, 51, 1.0);
        let w = generate_maze(4, &p).unwrap();
        assert_eq!(w.reachable_free_count(), w.free_cell_count());
        assert!(maze_longest_deadend(4, &p).unwrap() >= 5);
        assert!(w.is_free(w.spawn()));
    }
}
