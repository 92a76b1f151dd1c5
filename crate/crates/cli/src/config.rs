//! Optional TOML config file. Every key is optional; command-line flags win.

use std::path::Path;

use lens_core::learning::ForestParams;
use lens_core::neighborhood::SelectorConfig;
use lens_core::repair::RepairConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub n1: Option<usize>,
    pub runs: Option<usize>,
    pub jobs: Option<usize>,
    pub threshold: Option<f64>,
    pub split: Option<f64>,
    pub selector: Option<SelectorConfig>,
    pub repair: Option<RepairConfig>,
    pub forest: Option<ForestParams>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::input(path, e))
    }
}

/// Flag, then config file, then `LENS_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file.seed) {
        return Ok(s);
    }
    match std::env::var("LENS_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Input(format!("LENS_SEED is not a u64: {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Settings that shape the outputs; hashed into each manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Effective<'a, T: Serialize> {
    pub command: &'a str,
    pub seed: u64,
    pub settings: T,
}
