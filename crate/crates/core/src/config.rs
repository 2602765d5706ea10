//! Pipeline configuration file (TOML).
//!
//! Every section has defaults, so a minimal config only names the
//! source manifest and output directory. Relative paths are resolved
//! against the config file's own directory, like manifest entries.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bbpe::{PackingConfig, FIRST_MERGE_ID};
use crate::corpus_io::SourceRole;
use crate::embed::EmbeddingHyperparams;
use crate::shuffle::ShuffleConfig;
use crate::textstats::PenaltyConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSettings {
    /// Retention threshold on final score; the boundary is kept.
    pub tau: f64,
    /// Reference lines sampled for the centroid.
    pub centroid_sample_size: usize,
    pub centroid_seed: u64,
    /// Rows in each of the report's best/worst lists.
    pub extremes_k: usize,
    /// Which source roles the filter applies to; others pass through.
    pub apply_to_roles: Vec<SourceRole>,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            tau: 0.1,
            centroid_sample_size: 50_000,
            centroid_seed: 2,
            extremes_k: 5,
            apply_to_roles: vec![SourceRole::Auxiliary],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShuffleSettings {
    pub seed: u64,
    pub bucket_count: usize,
}

impl Default for ShuffleSettings {
    fn default() -> Self {
        ShuffleSettings {
            seed: 3,
            bucket_count: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BbpeSettings {
    pub vocab_size: usize,
    /// Packing window in token positions.
    pub window: usize,
}

impl Default for BbpeSettings {
    fn default() -> Self {
        BbpeSettings {
            vocab_size: 32_000,
            window: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scratch_dir: Option<PathBuf>,
    pub penalty: PenaltyConfig,
    pub embedding: EmbeddingHyperparams,
    pub filter: FilterSettings,
    pub shuffle: ShuffleSettings,
    pub bbpe: BbpeSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::from("sources.toml"),
            output_dir: PathBuf::from("out"),
            scratch_dir: None,
            penalty: PenaltyConfig::default(),
            embedding: EmbeddingHyperparams::default(),
            filter: FilterSettings::default(),
            shuffle: ShuffleSettings::default(),
            bbpe: BbpeSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.manifest, &mut self.output_dir]
            .into_iter()
            .chain(self.scratch_dir.as_mut())
        {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        self.embedding.validate()?;
        if !self.filter.tau.is_finite() {
            return Err(Error::Config(format!(
                "filter tau must be finite, got {}",
                self.filter.tau
            )));
        }
        if self.filter.centroid_sample_size == 0 {
            return Err(Error::Config(
                "centroid sample size must be at least 1".to_string(),
            ));
        }
        ShuffleConfig {
            seed: self.shuffle.seed,
            bucket_count: self.shuffle.bucket_count,
            scratch_dir: None,
        }
        .validate()?;
        if self.bbpe.vocab_size < FIRST_MERGE_ID as usize {
            return Err(Error::Config(format!(
                "bbpe vocab size {} is below the minimum {}",
                self.bbpe.vocab_size, FIRST_MERGE_ID
            )));
        }
        PackingConfig {
            window: self.bbpe.window,
        }
        .validate()?;
        Ok(())
    }

    /// The manifest must exist before a run starts; output and scratch
    /// directories are created on demand.
    pub fn check_paths(&self) -> Result<()> {
        if !self.manifest.is_file() {
            return Err(Error::Config(format!(
                "manifest {} does not exist",
                self.manifest.display()
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}
