//! Run configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mldm::SwitchConfig;
use crate::motion::KinodynamicSpec;
use crate::planners::{NbvConfig, RewardModel};
use crate::risk::RiskConfig;
use crate::roadmap::GlobalIrmConfig;
use crate::world::{GeneratorParams, SensorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Mldm,
    Hcp,
    Nbv,
    Hfe,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [PlannerKind::Mldm, PlannerKind::Hcp, PlannerKind::Nbv, PlannerKind::Hfe];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Mldm => "mldm",
            PlannerKind::Hcp => "hcp",
            PlannerKind::Nbv => "nbv",
            PlannerKind::Hfe => "hfe",
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown planner {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalConfig {
    /// Lattice radius in metres.
    pub radius: f64,
    /// Walk length T^l.
    pub horizon: usize,
    /// Branch-and-bound expansions per cycle.
    pub budget: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            radius: 10.0,
            horizon: 10,
            budget: 20_000,
        }
    }
}

/// Threshold settings for the switcher. `j_max` absent means calibrate it
/// from the world's risk field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchSettings {
    pub j_max: Option<f64>,
    /// Quantile of straight-run risk used when calibrating `j_max`.
    pub j_quantile: f64,
    pub d_max: f64,
    pub eps_j: f64,
    pub eps_d: f64,
    pub window: usize,
}

impl Default for SwitchSettings {
    fn default() -> Self {
        let s = SwitchConfig::default();
        Self {
            j_max: None,
            j_quantile: 0.95,
            d_max: s.d_max,
            eps_j: s.eps_j,
            eps_d: s.eps_d,
            window: s.window,
        }
    }
}

impl SwitchSettings {
    pub fn resolve(&self, j_max: f64) -> SwitchConfig {
        SwitchConfig {
            j_max,
            d_max: self.d_max,
            eps_j: self.eps_j,
            eps_d: self.eps_d,
            window: self.window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form label used in batch summaries.
    #[serde(default)]
    pub name: Option<String>,
    pub planner: PlannerKind,
    #[serde(default)]
    pub seed: u64,
    /// World seed; defaults to `seed`.
    #[serde(default)]
    pub world_seed: Option<u64>,
    pub step_budget: usize,
    #[serde(default = "defaults::metrics_interval")]
    pub metrics_interval: usize,
    #[serde(default = "defaults::steps_per_minute")]
    pub steps_per_minute: usize,
    /// Executed steps between replanning cycles.
    #[serde(default = "defaults::replan_interval")]
    pub replan_interval: usize,
    /// Fraction of reachable free cells that ends the run.
    #[serde(default = "defaults::coverage_target")]
    pub coverage_target: f64,
    /// Weight of mean terrain cost in A* reference paths.
    #[serde(default = "defaults::risk_weight")]
    pub risk_weight: f64,
    /// Distance in metres at which a committed global goal counts as reached.
    #[serde(default = "defaults::commit_radius")]
    pub commit_radius: f64,
    pub world: GeneratorParams,
    #[serde(default)]
    pub reward: RewardModel,
    #[serde(default)]
    pub switch: SwitchSettings,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub kinodynamic: KinodynamicSpec,
    #[serde(default)]
    pub risk: RiskConfig,
    #[serde(default)]
    pub local: LocalConfig,
    #[serde(default)]
    pub global: GlobalIrmConfig,
    #[serde(default)]
    pub nbv: NbvConfig,
}

mod defaults {
    pub fn metrics_interval() -> usize {
        60
    }
    pub fn steps_per_minute() -> usize {
        60
    }
    pub fn replan_interval() -> usize {
        5
    }
    pub fn coverage_target() -> f64 {
        0.99
    }
    pub fn risk_weight() -> f64 {
        1.0
    }
    pub fn commit_radius() -> f64 {
        2.0
    }
}

impl RunConfig {
    /// A config with every default filled in.
    pub fn new(planner: PlannerKind, world: GeneratorParams, seed: u64, step_budget: usize) -> Self {
        Self {
            name: None,
            planner,
            seed,
            world_seed: None,
            step_budget,
            metrics_interval: defaults::metrics_interval(),
            steps_per_minute: defaults::steps_per_minute(),
            replan_interval: defaults::replan_interval(),
            coverage_target: defaults::coverage_target(),
            risk_weight: defaults::risk_weight(),
            commit_radius: defaults::commit_radius(),
            world,
            reward: RewardModel::default(),
            switch: SwitchSettings::default(),
            sensor: SensorSpec::default(),
            kinodynamic: KinodynamicSpec::default(),
            risk: RiskConfig::default(),
            local: LocalConfig::default(),
            global: GlobalIrmConfig::default(),
            nbv: NbvConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn world_seed(&self) -> u64 {
        self.world_seed.unwrap_or(self.seed)
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.planner, self.world.kind()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.step_budget == 0 {
            return bad("step_budget must be positive".into());
        }
        if self.metrics_interval == 0 || self.steps_per_minute == 0 || self.replan_interval == 0 {
            return bad("metrics_interval, steps_per_minute and replan_interval must be positive".into());
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return bad(format!("coverage_target must be in (0, 1], got {}", self.coverage_target));
        }
        if !(self.risk_weight >= 0.0 && self.risk_weight.is_finite()) {
            return bad("risk_weight must be finite and nonnegative".into());
        }
        if !(self.commit_radius >= 0.0) {
            return bad("commit_radius must be nonnegative".into());
        }
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        wrap(self.reward.validate())?;
        wrap(self.sensor.validate())?;
        wrap(self.kinodynamic.validate())?;
        wrap(self.risk.validate())?;
        let s = &self.switch;
        if let Some(j) = s.j_max {
            if !(j > 0.0) {
                return bad("switch.j_max must be positive".into());
            }
        }
        if !(s.j_quantile > 0.0 && s.j_quantile <= 1.0) {
            return bad("switch.j_quantile must be in (0, 1]".into());
        }
        wrap(s.resolve(1.0).validate())?;
        if self.local.radius <= 0.0 || self.local.horizon == 0 || self.local.budget == 0 {
            return bad("local radius, horizon and budget must be positive".into());
        }
        if self.global.breadcrumb_spacing <= 0.0 || self.global.horizon == 0 {
            return bad("global breadcrumb_spacing and horizon must be positive".into());
        }
        if self.planner == PlannerKind::Nbv && (self.nbv.samples == 0 || self.nbv.radius <= 0.0) {
            return bad("nbv samples and radius must be positive".into());
        }
        match &self.world {
            GeneratorParams::Subway(p) if p.rooms == 0 => bad("world.rooms must be positive".into()),
            GeneratorParams::Maze(p) if p.width < 5 || p.height < 5 => bad("maze must be at least 5x5".into()),
            GeneratorParams::Maze(p) if !(0.0..=1.0).contains(&p.deadend_fraction) => {
                bad("world.deadend_fraction must be in [0, 1]".into())
            }
            GeneratorParams::Cave(p) if p.width < 8 || p.height < 8 => bad("cave must be at least 8x8".into()),
            _ => Ok(()),
        }
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A batch file: shared defaults plus a list of runs.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatchFile {
    run: Vec<toml::Table>,
    #[serde(default)]
    defaults: toml::Table,
}

/// Load batch configs from a directory of TOML files (sorted by name), a
/// batch file with `[defaults]` and `[[run]]` tables, or a single run file.
pub fn load_batch(path: &Path) -> Result<Vec<RunConfig>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("no .toml files in {}", path.display())));
        }
        return files.iter().map(|f| RunConfig::load(f)).collect();
    }
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    if !table.contains_key("run") {
        return Ok(vec![RunConfig::from_toml(&text)?]);
    }
    let batch: BatchFile = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    batch
        .run
        .into_iter()
        .map(|run| {
            let mut merged = batch.defaults.clone();
            merge(&mut merged, run);
            let cfg: RunConfig = toml::Value::Table(merged)
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAZE: &str = r#"
planner = "mldm"
seed = 3
step_budget = 600

[world]
generator = "maze"
width = 31
height = 31
deadend_fraction = 0.5
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_toml(MAZE).unwrap();
        assert_eq!(c.planner, PlannerKind::Mldm);
        assert_eq!(c.replan_interval, 5);
        assert_eq!(c.local.horizon, 10);
        assert!(c.switch.j_max.is_none());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::from_toml(MAZE).unwrap();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml(&MAZE.replace("600", "0")).is_err());
        assert!(RunConfig::from_toml(&MAZE.replace("mldm", "greedy")).is_err());
        assert!(RunConfig::from_toml(&format!("{MAZE}\n[reward]\ngamma_local = 1.5\n")).is_err());
        assert!(RunConfig::from_toml(&format!("bogus = 1\n{MAZE}")).is_err());
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = RunConfig::from_toml(MAZE).unwrap();
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
