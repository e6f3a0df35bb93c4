//! Versioned JSON persistence for worlds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GeneratorParams, Occupancy, TerrainRisk, WorldModel};
use crate::error::{Error, Result};
use crate::grid::{Cell, Grid};

pub const WORLD_FORMAT_VERSION: u32 = 1;
const WORLD_FORMAT: &str = "covswitch-world";

/// On-disk form of a [`WorldModel`].
///
/// `occupancy` is row-major from row 0 (south) with `#` for obstacles and
/// `.` for free cells; `mu` and `sigma` follow the same ordering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldDocument {
    pub format: String,
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub spawn: Cell,
    pub seed: u64,
    pub params: GeneratorParams,
    pub occupancy: String,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl From<&WorldModel> for WorldDocument {
    fn from(w: &WorldModel) -> Self {
        Self {
            format: WORLD_FORMAT.into(),
            version: WORLD_FORMAT_VERSION,
            width: w.width(),
            height: w.height(),
            cell_size: w.cell_size(),
            spawn: w.spawn(),
            seed: w.seed(),
            params: w.params().clone(),
            occupancy: w
                .occupancy()
                .as_slice()
                .iter()
                .map(|o| match o {
                    Occupancy::Free => '.',
                    Occupancy::Obstacle => '#',
                })
                .collect(),
            mu: w.terrain().as_slice().iter().map(|r| r.mu).collect(),
            sigma: w.terrain().as_slice().iter().map(|r| r.sigma).collect(),
        }
    }
}

impl TryFrom<WorldDocument> for WorldModel {
    type Error = Error;

    fn try_from(doc: WorldDocument) -> Result<Self> {
        let malformed = |reason: String| Error::Malformed {
            what: "world document",
            reason,
        };
        if doc.format != WORLD_FORMAT {
            return Err(malformed(format!("unexpected format tag {:?}", doc.format)));
        }
        if doc.version != WORLD_FORMAT_VERSION {
            return Err(Error::Version {
                what: "world document",
                found: doc.version,
                expected: WORLD_FORMAT_VERSION,
            });
        }
        let n = doc.width * doc.height;
        if doc.mu.len() != n || doc.sigma.len() != n {
            return Err(malformed(format!("risk arrays must hold {n} values")));
        }
        let occ: Vec<Occupancy> = doc
            .occupancy
            .chars()
            .map(|ch| match ch {
                '.' => Ok(Occupancy::Free),
                '#' => Ok(Occupancy::Obstacle),
                other => Err(malformed(format!("bad occupancy character {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let occupancy = Grid::from_vec(doc.width, doc.height, occ)
            .ok_or_else(|| malformed(format!("occupancy must hold {n} cells")))?;
        let terrain: Vec<TerrainRisk> = doc
            .mu
            .iter()
            .zip(&doc.sigma)
            .map(|(&mu, &sigma)| TerrainRisk { mu, sigma })
            .collect();
        let terrain = Grid::from_vec(doc.width, doc.height, terrain).expect("length checked");
        WorldModel::new(doc.cell_size, occupancy, terrain, doc.spawn, doc.seed, doc.params)
    }
}

pub fn save_world(world: &WorldModel, path: &Path) -> Result<()> {
    let doc = WorldDocument::from(world);
    let text = serde_json::to_string(&doc)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_world(path: &Path) -> Result<WorldModel> {
    let text = std::fs::read_to_string(path)?;
    let doc: WorldDocument = serde_json::from_str(&text)?;
    WorldModel::try_from(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_mismatch_is_rejected() {
        let w = WorldModel::from_ascii(&["S.", ".."], 0.5).unwrap();
        let mut doc = WorldDocument::from(&w);
        doc.version = 99;
        assert!(matches!(WorldModel::try_from(doc), Err(Error::Version { .. })));
    }

    #[test]
    fn bad_character_is_rejected() {
        let w = WorldModel::from_ascii(&["S.", ".."], 0.5).unwrap();
        let mut doc = WorldDocument::from(&w);
        doc.occupancy = "..x.".into();
        assert!(matches!(WorldModel::try_from(doc), Err(Error::Malformed { .. })));
    }
}
