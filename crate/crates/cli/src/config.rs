//! JSON run configuration. Any flag can instead be supplied here; explicit
//! flags win. Unknown keys are rejected so typos cannot silently change a
//! run.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Option<String>,
    pub q: Option<f64>,

    pub rho: Option<f64>,
    pub beta: Option<f64>,

    pub s0: Option<f64>,
    pub sigma0: Option<f64>,
    pub omega: Option<f64>,
    pub tau: Option<f64>,
    pub n: Option<u32>,
    pub corr: Option<f64>,

    pub n_paths: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub antithetic: Option<bool>,
    pub statistic: Option<String>,
    pub dump_paths: Option<PathBuf>,
    pub dump_limit: Option<u64>,

    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub points: Option<usize>,
    pub rho_grid: Option<Vec<f64>>,
    pub mean_field: Option<bool>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,

    pub target: Option<String>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Flag value if present, else the config value.
pub fn pick<T: Clone>(flag: &Option<T>, cfg: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| cfg.clone())
}

/// Like [`pick`] but required.
pub fn need<T: Clone>(name: &str, flag: &Option<T>, cfg: &Option<T>) -> Result<T, CliError> {
    pick(flag, cfg).ok_or_else(|| {
        CliError::Config(format!("missing required parameter '{name}' (flag or config)"))
    })
}
