//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use covswitch::roadmap::{build_local_irm, GlobalIrm, GlobalIrmConfig};
use covswitch::world::{sense, MazeParams};
use covswitch::{BeliefGrid, GeneratorParams, Pose, RiskCache, RiskConfig, RiskField, RoadmapGraph, SensorSpec, WorldModel};

pub fn maze(seed: u64) -> WorldModel {
    GeneratorParams::Maze(MazeParams::new(51, 51, 0.8))
        .generate(seed)
        .expect("maze generates")
}

/// A maze plus a belief where everything is already known, for grid search.
pub fn known_maze(seed: u64) -> (WorldModel, BeliefGrid, RiskField) {
    let world = maze(seed);
    let belief = BeliefGrid::fully_known(&world);
    let risk = RiskField::from_world(&world, RiskConfig::default(), seed).expect("valid risk config");
    (world, belief, risk)
}

/// Belief after sensing once from spawn, with a fresh risk cache.
pub struct Snapshot {
    pub world: WorldModel,
    pub belief: BeliefGrid,
    pub cache: RiskCache,
    pub sensor: SensorSpec,
}

impl Snapshot {
    pub fn at_spawn(world: WorldModel) -> Self {
        let sensor = SensorSpec::default();
        let mut belief = BeliefGrid::for_world(&world);
        sense(&world, &mut belief, &Pose::at_cell(world.spawn(), world.cell_size()), &sensor)
            .expect("spawn is free");
        let field = RiskField::from_world(&world, RiskConfig::default(), 0).expect("valid risk config");
        Self {
            cache: RiskCache::new(Arc::new(field)),
            world,
            belief,
            sensor,
        }
    }

    pub fn local_graph(&mut self, radius: f64, horizon: usize) -> RoadmapGraph {
        build_local_irm(&self.belief, &mut self.cache, self.world.spawn(), radius, horizon, &self.sensor)
            .expect("robot cell is free")
    }

    pub fn global_graph(&mut self) -> RoadmapGraph {
        let mut girm = GlobalIrm::new(GlobalIrmConfig::default(), self.world.spawn());
        girm.update(&self.belief, self.world.spawn(), &mut self.cache).clone()
    }
}
