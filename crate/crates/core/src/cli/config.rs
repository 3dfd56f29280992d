//! Experiment configuration: a sectioned `key = value` file, every field
//! overridable from the command line (flag wins).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::params::{ModelParams, ParamError};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub run: RunSection,
    pub explore: ExploreSection,
    pub weights: WeightsSection,
    pub sde: SdeSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub sigma: f64,
    pub theta: f64,
    pub gamma: f64,
    pub n: u32,
    pub x: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            sigma: 1.0,
            theta: 0.3,
            gamma: 0.2,
            n: 4,
            x: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub replicates: u64,
    pub master_seed: u64,
    /// 0 means: take LRK_WORKERS from the environment, else all cores.
    pub workers: usize,
    pub t_grid: Vec<f64>,
    pub output_dir: PathBuf,
    /// Cap on jump events / turning points per path.
    pub event_budget: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            replicates: 100,
            master_seed: 1280723762,
            workers: 0,
            t_grid: vec![0.25, 0.5, 1.0],
            output_dir: PathBuf::from("out"),
            event_budget: crate::mass::DEFAULT_EVENT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSection {
    /// Export turning points for the first `dump_paths` replicates.
    pub dump_paths: u64,
}

impl Default for ExploreSection {
    fn default() -> Self {
        ExploreSection { dump_paths: 2 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    /// Stop at τ = S_{trees/N} ∧ stop_s; 0 means ⌊Nx⌋ trees.
    pub stop_trees: u64,
    pub stop_s: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection {
            stop_trees: 0,
            stop_s: 100.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    /// "feller" or "reflected".
    pub solver: String,
    pub dt: f64,
    pub eps_bin: f64,
    pub s_max: f64,
    pub t_max: f64,
    /// Export full paths for the first `dump_paths` replicates, thinned to
    /// at most `dump_points` samples each.
    pub dump_paths: u64,
    pub dump_points: usize,
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            solver: "feller".into(),
            dt: 1e-3,
            eps_bin: 0.0, // 0 = dt^(1/3)
            s_max: 1.0,
            t_max: 50.0,
            dump_paths: 2,
            dump_points: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse config {}: {e}", path.display()))
    }

    pub fn params(&self) -> Result<ModelParams, ParamError> {
        ModelParams::new(
            self.model.sigma,
            self.model.theta,
            self.model.gamma,
            self.model.n,
            self.model.x,
        )
    }

    /// Worker-count resolution: explicit config/flag value, else the
    /// LRK_WORKERS environment variable, else all cores.
    pub fn resolve_workers(&self) -> usize {
        if self.run.workers >= 1 {
            return self.run.workers;
        }
        if let Ok(v) = std::env::var("LRK_WORKERS") {
            if let Ok(w) = v.trim().parse::<usize>() {
                if w >= 1 {
                    return w;
                }
            }
        }
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}
