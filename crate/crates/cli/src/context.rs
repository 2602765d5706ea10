//! Effective run context: configuration plus global flag overrides,
//! output layout, and report serialization.

use std::path::{Path, PathBuf};

use saaf_core::config::PipelineConfig;
use saaf_core::corpus_io::SourceManifest;
use saaf_core::{Error, Result};
use serde::Serialize;

use crate::{Failure, GlobalArgs, Phase};

pub struct Ctx {
    pub config: PipelineConfig,
}

impl Ctx {
    pub fn new(global: &GlobalArgs) -> std::result::Result<Ctx, Failure> {
        let mut config = match &global.config {
            Some(path) => PipelineConfig::load(path).usage()?,
            None => PipelineConfig::default(),
        };
        if let Some(dir) = &global.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(dir) = &global.scratch_dir {
            config.scratch_dir = Some(dir.clone());
        }
        if let Some(seed) = global.seed {
            config.embedding.seed = seed;
            config.filter.centroid_seed = seed.wrapping_add(1);
            config.shuffle.seed = seed.wrapping_add(2);
        }
        Ok(Ctx { config })
    }

    pub fn manifest(&self) -> std::result::Result<SourceManifest, Failure> {
        let manifest = SourceManifest::load(&self.config.manifest).usage()?;
        manifest.check_paths().usage()?;
        Ok(manifest)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    /// Output path with the directory created; for corpus/model files.
    pub fn create_out_path(&self, name: &str) -> Result<PathBuf> {
        let path = self.out_path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        }
        Ok(path)
    }

    /// Writes `reports/<name>.json`: the report body wrapped in an
    /// envelope naming the stage and every seed the stage consumed.
    /// Reports carry no timestamps, so identical runs serialize
    /// identically.
    pub fn write_report<T: Serialize>(
        &self,
        stage: &str,
        seeds: &[(&str, u64)],
        body: &T,
    ) -> Result<PathBuf> {
        let dir = self.config.output_dir.join("reports");
        std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let path = dir.join(format!("{}.json", stage.replace('-', "_")));
        let text = render_report(stage, seeds, body)?;
        std::fs::write(&path, text).map_err(Error::io(&path))?;
        Ok(path)
    }
}

pub fn render_report<T: Serialize>(
    stage: &str,
    seeds: &[(&str, u64)],
    body: &T,
) -> Result<String> {
    let value = serde_json::to_value(body)
        .map_err(|e| Error::Input(format!("report for stage {stage}: {e}")))?;
    let mut map = serde_json::Map::new();
    map.insert("stage".into(), stage.into());
    let seed_map: serde_json::Map<String, serde_json::Value> = seeds
        .iter()
        .map(|(name, seed)| (name.to_string(), (*seed).into()))
        .collect();
    map.insert("seeds".into(), seed_map.into());
    match value {
        serde_json::Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("report".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(map))
        .map_err(|e| Error::Input(format!("report for stage {stage}: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// One diffable progress line: `stage=<name> key=value ...`.
pub fn stage_line(stage: &str, pairs: &[(&str, String)]) {
    let mut line = format!("stage={stage}");
    for (key, value) in pairs {
        line.push(' ');
        line.push_str(key);
        line.push('=');
        line.push_str(value);
    }
    println!("{line}");
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
