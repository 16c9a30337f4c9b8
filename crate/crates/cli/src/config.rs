//! Run configuration: a JSON file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use exact_core::backend::RemoteConfig;
use exact_core::fixture::DEFAULT_NOISE;
use exact_core::inference::{DecodingParams, DEFAULT_SPLIT_RATIO};
use exact_core::retrieval::EmbedderSpec;
use exact_core::scoring::Interaction;
use exact_core::selection::SelectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Synthetic,
    Remote,
}

/// Parameters of the synthetic oracle used when `backend = synthetic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub seed: u64,
    pub topics: usize,
    pub noise: f64,
    pub interaction: Option<Interaction>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { seed: 0, topics: 2, noise: DEFAULT_NOISE, interaction: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub library: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub remote: RemoteConfig,
    pub oracle: OracleConfig,
    pub embedder: EmbedderSpec,
    pub selection: SelectionConfig,
    pub decoding: DecodingParams,
    pub beta: f64,
    pub split_ratio: f64,
    pub split_seed: u64,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    /// Concurrent HTTP requests for remote backends.
    pub max_in_flight: usize,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Synthetic,
            remote: RemoteConfig::default(),
            oracle: OracleConfig::default(),
            embedder: EmbedderSpec::default(),
            selection: SelectionConfig::default(),
            decoding: DecodingParams::default(),
            beta: 1.0,
            split_ratio: DEFAULT_SPLIT_RATIO,
            split_seed: 0,
            jobs: None,
            max_in_flight: 8,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            bail!("split_ratio must lie in (0, 1), got {}", self.split_ratio);
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            bail!("beta must be positive, got {}", self.beta);
        }
        if self.embedder.dimension < 2 {
            bail!("embedding dimension must be at least 2");
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        self.decoding.validate()?;
        for p in [&self.paths.library, &self.paths.pairs].into_iter().flatten() {
            if !p.exists() {
                bail!("path {} does not exist", p.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"selection":{"budget":2},"split_seed":4}"#).unwrap();
        assert_eq!(cfg.selection.budget, 2);
        assert!(cfg.selection.nonneg_filter);
        assert_eq!(cfg.split_seed, 4);
        assert_eq!(cfg.split_ratio, 0.8);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig { backend: BackendKind::Remote, jobs: Some(2), ..Default::default() };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_ratio() {
        let cfg = RunConfig { split_ratio: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
