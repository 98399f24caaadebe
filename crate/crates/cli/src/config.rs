use std::path::{Path, PathBuf};

use dfs_core::data::DatasetDescriptor;
use dfs_core::engine::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides `engine.seed`.
pub const SEED_ENV: &str = "DFS_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Directory for every file a command writes.
    pub out_dir: PathBuf,
    /// Seeds swept by `ablate`; empty means just `engine.seed`.
    pub seeds: Vec<u64>,
    /// Seed of the synthetic data; defaults to `engine.seed`.
    pub data_seed: Option<u64>,
    /// Metrics reported by `ablate`.
    pub metrics: Vec<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seeds: Vec::new(),
            data_seed: None,
            metrics: vec!["frechet".into(), "sliced-w2".into()],
        }
    }
}

/// Everything a run needs, read from a TOML file. Every key is optional;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub dataset: DatasetDescriptor,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            dataset: DatasetDescriptor::mixture_default(),
            run: RunSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(e.message()))?;
        cfg.engine.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and applies the `DFS_SEED` override.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(seed) = seed_override()? {
            cfg.engine.seed = seed;
        }
        Ok(cfg)
    }

    pub fn data_seed(&self) -> u64 {
        self.run.data_seed.unwrap_or(self.engine.seed)
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.run.seeds.is_empty() {
            vec![self.engine.seed]
        } else {
            self.run.seeds.clone()
        }
    }
}

pub fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
