use std::path::{Path, PathBuf};

use serde::Deserialize;

use cyclenet_core::learning::beta1_from_beta;
use cyclenet_core::NetworkParams;

use crate::commands::Failure;

/// How the constant initial history is built.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// `a` times column `start_pattern` of the cycle.
    #[default]
    Pattern,
    /// Independent uniform values in `[-a, a]` drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cycle_file: PathBuf,
    pub c0: f64,
    pub beta: Option<f64>,
    pub beta1: Option<f64>,
    pub lambda: f64,
    pub tau_ms: f64,
    pub t_end_ms: f64,
    pub dt_ms: Option<f64>,
    /// Initial amplitude; defaults to the memory amplitude.
    pub a: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub initial: InitialKind,
    #[serde(default)]
    pub start_pattern: usize,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        if cfg.cycle_file.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.cycle_file = dir.join(&cfg.cycle_file);
            }
        }
        Ok(cfg)
    }

    pub fn params(&self) -> Result<NetworkParams, Failure> {
        let beta1 = match (self.beta, self.beta1) {
            (Some(b), None) => beta1_from_beta(b)?,
            (None, Some(b1)) => b1,
            _ => return Err(Failure::input("give exactly one of `beta` and `beta1`")),
        };
        Ok(NetworkParams::new(self.c0, beta1, self.lambda, self.tau_ms)?)
    }

    pub fn dt(&self) -> f64 {
        self.dt_ms
            .unwrap_or_else(|| cyclenet_core::sim::default_dt(self.tau_ms))
    }
}
