//! Coverage planning in unknown grid worlds with risk-aware switching
//! between a local and a global policy.
//!
//! The crate is split the way the loop runs: [`world`] holds ground truth and
//! the robot's belief, [`roadmap`] builds the information roadmaps, [`risk`]
//! prices edges, [`planners`] produces policies, [`motion`] turns them into
//! executed paths, [`mldm`] picks which policy to run, and [`sim`] ties it
//! all together.

pub mod error;
pub mod grid;
pub mod mldm;
pub mod motion;
pub mod planners;
pub mod risk;
pub mod roadmap;
pub mod sim;
pub mod world;

pub use error::{Error, Result};
pub use grid::{Cell, Grid, Point, Pose};
pub use mldm::{decide, p_hat, Candidate, HistoryWindow, SwitchConfig, SwitchDecision, Switcher};
pub use motion::{astar, GridPath, KinodynamicSpec, PathPair};
pub use planners::{plan_global, plan_hfe, plan_local, plan_nbv, Policy, RewardModel};
pub use risk::{cvar, edge_risk, RiskCache, RiskConfig, RiskField};
pub use roadmap::{GlobalIrm, NodeKind, RoadmapGraph, Scope};
pub use sim::{run_batch, run_episode, PlannerKind, RunConfig, RunRecord};
pub use world::{BeliefGrid, GeneratorParams, SensorSpec, WorldModel};
