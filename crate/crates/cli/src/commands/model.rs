//! Embedding, centroid, and similarity-filter stages.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use saaf_core::corpus_io::{merge_sources, SourceEntry, SourceManifest};
use saaf_core::embed::{
    load_centroid, load_model, reference_centroid, save_centroid, save_model, train_embeddings,
    EmbeddingHyperparams, EmbeddingModel, ReferenceCentroid, TrainSource,
};
use saaf_core::filter::{filter_stream, FilterConfig, FilterReport, LineScorer};
use saaf_core::{Error, Result};
use serde::Serialize;

use crate::context::{display, stage_line, Ctx};
use crate::{Failure, Phase};

#[derive(Args)]
pub struct EmbedTrainArgs {
    /// Model destination (default: <output-dir>/model.bin)
    #[arg(long, value_name = "PATH")]
    pub model_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EmbedTrainReport {
    model_path: String,
    vocab_words: usize,
    reference_sources: Vec<String>,
    hyperparams: EmbeddingHyperparams,
}

pub fn embed_train(ctx: &Ctx, args: &EmbedTrainArgs) -> std::result::Result<(), Failure> {
    let manifest = ctx.manifest()?;
    let sources = reference_sources(&manifest)?;
    let out = match &args.model_out {
        Some(path) => path.clone(),
        None => ctx.create_out_path("model.bin").runtime()?,
    };

    let paths: Vec<PathBuf> = sources.iter().map(|e| e.path.clone()).collect();
    let hyperparams = ctx.config.embedding.clone();
    let model = train_embeddings(&TrainSource::Files(&paths), &hyperparams).runtime()?;
    save_model(&model, &out).runtime()?;

    let report = EmbedTrainReport {
        model_path: display(&out),
        vocab_words: model.vocab().len(),
        reference_sources: sources.iter().map(|e| e.id.clone()).collect(),
        hyperparams: hyperparams.clone(),
    };
    let report_path = ctx
        .write_report("embed-train", &[("embedding", hyperparams.seed)], &report)
        .runtime()?;
    stage_line(
        "embed-train",
        &[
            ("vocab_words", report.vocab_words.to_string()),
            ("dimension", hyperparams.dimension.to_string()),
            ("seed", hyperparams.seed.to_string()),
            ("output", display(&out)),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}

#[derive(Args)]
pub struct CentroidArgs {
    /// Trained embedding model (default: <output-dir>/model.bin)
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,

    /// Centroid destination (default: <output-dir>/centroid.bin)
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Reference lines to sample (default: from config)
    #[arg(long, value_name = "M")]
    pub sample_size: Option<u64>,
}

#[derive(Serialize)]
struct CentroidReport {
    centroid_path: String,
    dimension: usize,
    /// Lines actually averaged; less than requested on small corpora.
    sample_size: u64,
}

pub fn centroid(ctx: &Ctx, args: &CentroidArgs) -> std::result::Result<(), Failure> {
    let manifest = ctx.manifest()?;
    let sources = reference_sources(&manifest)?;
    let model_path = args.model.clone().unwrap_or_else(|| ctx.out_path("model.bin"));
    let out = match &args.output {
        Some(path) => path.clone(),
        None => ctx.create_out_path("centroid.bin").runtime()?,
    };
    let sample_size = args
        .sample_size
        .unwrap_or(ctx.config.filter.centroid_sample_size as u64);
    let seed = ctx.config.filter.centroid_seed;

    let model = load_model(&model_path).runtime()?;
    let reference = SourceManifest { sources };
    let lines = merge_sources(&reference, false)
        .runtime()?
        .map(|item| item.map(|line| line.text));
    let centroid = reference_centroid(&model, lines, sample_size, seed).runtime()?;
    save_centroid(&centroid, &out).runtime()?;

    let report = CentroidReport {
        centroid_path: display(&out),
        dimension: centroid.vector.len(),
        sample_size: centroid.sample_size,
    };
    let report_path = ctx
        .write_report("centroid", &[("centroid", seed)], &report)
        .runtime()?;
    stage_line(
        "centroid",
        &[
            ("sample_size", centroid.sample_size.to_string()),
            ("seed", seed.to_string()),
            ("output", display(&out)),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}

#[derive(Args)]
pub struct FilterArgs {
    /// Trained embedding model (default: <output-dir>/model.bin)
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,

    /// Reference centroid (default: <output-dir>/centroid.bin)
    #[arg(long, value_name = "PATH")]
    pub centroid: Option<PathBuf>,

    /// Retention threshold override
    #[arg(long, value_name = "TAU")]
    pub tau: Option<f64>,

    /// Also write per-line score sidecars (final, sim, penalty TSV)
    #[arg(long)]
    pub sidecar: bool,
}

pub struct FilterRun {
    pub report: FilterReport,
    /// Source id and retained-lines path, in manifest order.
    pub retained: Vec<(String, PathBuf)>,
}

/// Streams every source whose role the config filters through one
/// scorer, so the report aggregates all of them while retained lines
/// land in one file per source.
pub fn run_filter(
    ctx: &Ctx,
    entries: &[SourceEntry],
    model: &EmbeddingModel,
    centroid: &ReferenceCentroid,
    tau: f64,
    sidecar: bool,
) -> Result<FilterRun> {
    let scorer = LineScorer::new(model, centroid, &ctx.config.penalty)?;
    let config = FilterConfig {
        tau,
        extremes_k: ctx.config.filter.extremes_k,
    };

    let dir = ctx.config.output_dir.join("filtered");
    std::fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
    let mut outputs: HashMap<String, (BufWriter<File>, Option<BufWriter<File>>)> = HashMap::new();
    let mut retained = Vec::new();
    for (i, entry) in entries.iter().enumerate() {
        let base = format!("{i:02}_{}", sanitize(&entry.id));
        let path = dir.join(format!("{base}.txt"));
        let writer = BufWriter::new(File::create(&path).map_err(Error::io(&path))?);
        let scores = if sidecar {
            let side_path = dir.join(format!("{base}.scores.tsv"));
            Some(BufWriter::new(
                File::create(&side_path).map_err(Error::io(&side_path))?,
            ))
        } else {
            None
        };
        outputs.insert(entry.id.clone(), (writer, scores));
        retained.push((entry.id.clone(), path));
    }

    let input = SourceManifest {
        sources: entries.to_vec(),
    };
    let stream = merge_sources(&input, false)?;
    let report = filter_stream(stream, &scorer, &config, |scored, keep| {
        let (writer, scores) = outputs
            .get_mut(&*scored.line.source_id)
            .expect("stream only yields lines from the opened sources");
        if keep {
            writer
                .write_all(scored.line.text.as_bytes())
                .and_then(|_| writer.write_all(b"\n"))
                .map_err(|e| Error::Input(format!("retained output: {e}")))?;
        }
        if let Some(w) = scores {
            writeln!(
                w,
                "{}\t{}\t{}",
                scored.scores.final_score, scored.scores.sim, scored.scores.penalty
            )
            .map_err(|e| Error::Input(format!("score sidecar: {e}")))?;
        }
        Ok(())
    })?;
    for (mut writer, scores) in outputs.into_values() {
        writer
            .flush()
            .map_err(|e| Error::Input(format!("retained output: {e}")))?;
        if let Some(mut w) = scores {
            w.flush()
                .map_err(|e| Error::Input(format!("score sidecar: {e}")))?;
        }
    }
    Ok(FilterRun { report, retained })
}

/// Loads the model and centroid, filters the configured roles, writes
/// the stage report, and returns the run so `pipeline` can chain it.
pub fn filter_with(
    ctx: &Ctx,
    entries: &[SourceEntry],
    model_path: &Path,
    centroid_path: &Path,
    tau: f64,
    sidecar: bool,
) -> std::result::Result<FilterRun, Failure> {
    let model = load_model(model_path).runtime()?;
    let centroid = load_centroid(centroid_path).runtime()?;
    let run = run_filter(ctx, entries, &model, &centroid, tau, sidecar).runtime()?;

    let seeds = [
        ("embedding", model.hyperparams().seed),
        ("centroid", centroid.seed),
    ];
    let report_path = ctx.write_report("filter", &seeds, &run.report).runtime()?;
    stage_line(
        "filter",
        &[
            ("tau", tau.to_string()),
            ("processed", run.report.processed.to_string()),
            ("retained", run.report.retained.to_string()),
            ("discarded", run.report.discarded.to_string()),
            ("retention_rate", format!("{:.4}", run.report.retention_rate)),
            ("report", display(&report_path)),
        ],
    );
    for (id, path) in &run.retained {
        stage_line(
            "filter",
            &[("source", id.clone()), ("output", display(path))],
        );
    }
    Ok(run)
}

pub fn filter(ctx: &Ctx, args: &FilterArgs) -> std::result::Result<(), Failure> {
    let manifest = ctx.manifest()?;
    let entries = filtered_entries(ctx, &manifest)?;
    let model_path = args.model.clone().unwrap_or_else(|| ctx.out_path("model.bin"));
    let centroid_path = args
        .centroid
        .clone()
        .unwrap_or_else(|| ctx.out_path("centroid.bin"));
    let tau = args.tau.unwrap_or(ctx.config.filter.tau);
    filter_with(ctx, &entries, &model_path, &centroid_path, tau, args.sidecar).map(|_| ())
}

pub fn reference_sources(
    manifest: &SourceManifest,
) -> std::result::Result<Vec<SourceEntry>, Failure> {
    let sources: Vec<SourceEntry> = manifest
        .with_role(saaf_core::corpus_io::SourceRole::Reference)
        .cloned()
        .collect();
    if sources.is_empty() {
        return Err(Failure::Usage(Error::Config(
            "manifest lists no reference sources to train on".to_string(),
        )));
    }
    Ok(sources)
}

pub fn filtered_entries(
    ctx: &Ctx,
    manifest: &SourceManifest,
) -> std::result::Result<Vec<SourceEntry>, Failure> {
    let roles = &ctx.config.filter.apply_to_roles;
    let entries: Vec<SourceEntry> = manifest
        .sources
        .iter()
        .filter(|e| roles.contains(&e.role))
        .cloned()
        .collect();
    if entries.is_empty() {
        let names: Vec<&str> = roles.iter().map(|r| r.name()).collect();
        return Err(Failure::Usage(Error::Config(format!(
            "manifest has no sources with the filtered roles [{}]",
            names.join(", ")
        ))));
    }
    Ok(entries)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
