//! The end-to-end curation pipeline and config inspection.

use clap::Args;
use saaf_core::corpus_io::{merge_to_path, SourceManifest};
use saaf_core::{Error, Result};
use serde::Serialize;

use crate::commands::{corpus, model};
use crate::context::{display, stage_line, Ctx};
use crate::{Failure, Phase};

#[derive(Args)]
pub struct PipelineArgs {
    /// Apply NFC normalization during the merge stage
    #[arg(long)]
    pub nfc: bool,

    /// Write per-line score sidecars next to the retained files
    #[arg(long)]
    pub sidecar: bool,
}

#[derive(Serialize)]
struct PipelineSummary {
    final_corpus: String,
    unfiltered_lines: u64,
    filter_processed: u64,
    filter_retained: u64,
    filter_discarded: u64,
    merged_lines: u64,
    dedup_input_lines: u64,
    dedup_unique_lines: u64,
    duplicates_removed: u64,
    shuffled_lines: u64,
}

fn ensure(condition: bool, message: &str) -> Result<()> {
    if condition {
        Ok(())
    } else {
        Err(Error::Input(format!("pipeline consistency: {message}")))
    }
}

/// Curation order: train embeddings on the reference sources, build the
/// centroid, filter the configured roles, merge everything (filtered
/// sources swapped for their retained files), dedup, shuffle. Count
/// identities across the stage reports are checked before the summary
/// is written.
pub fn pipeline(ctx: &Ctx, args: &PipelineArgs) -> std::result::Result<(), Failure> {
    let manifest = ctx.manifest()?;
    let filtered = model::filtered_entries(ctx, &manifest)?;

    model::embed_train(ctx, &model::EmbedTrainArgs { model_out: None })?;
    model::centroid(
        ctx,
        &model::CentroidArgs {
            model: None,
            output: None,
            sample_size: None,
        },
    )?;
    let run = model::filter_with(
        ctx,
        &filtered,
        &ctx.out_path("model.bin"),
        &ctx.out_path("centroid.bin"),
        ctx.config.filter.tau,
        args.sidecar,
    )?;

    // Merge with each filtered source replaced by its retained file;
    // ids, roles, and ordering are preserved.
    let mut merged_manifest = SourceManifest {
        sources: manifest.sources.clone(),
    };
    for entry in &mut merged_manifest.sources {
        if let Some((_, path)) = run.retained.iter().find(|(id, _)| *id == entry.id) {
            entry.path = path.clone();
        }
    }
    let merged_path = ctx.create_out_path("merged.txt").runtime()?;
    let composition = merge_to_path(&merged_manifest, &merged_path, args.nfc).runtime()?;
    let merge_report_path = ctx.write_report("merge", &[], &composition).runtime()?;
    stage_line(
        "merge",
        &[
            ("sources", composition.per_source.len().to_string()),
            ("lines", composition.total_lines.to_string()),
            ("output", display(&merged_path)),
            ("report", display(&merge_report_path)),
        ],
    );

    let dedup = corpus::dedup(
        ctx,
        &corpus::DedupArgs {
            input: Some(merged_path),
            output: None,
            hash_only: false,
        },
    )?;
    let shuffle = corpus::shuffle(
        ctx,
        &corpus::ShuffleArgs {
            input: None,
            output: None,
        },
    )?;

    let filtered_merged: u64 = composition
        .per_source
        .iter()
        .filter(|s| run.retained.iter().any(|(id, _)| *id == s.id))
        .map(|s| s.line_count)
        .sum();
    let unfiltered_lines = composition.total_lines - filtered_merged;
    ensure(
        filtered_merged == run.report.retained,
        "merged filtered-source lines must equal the filter's retained count",
    )
    .runtime()?;
    ensure(
        run.report.retained + unfiltered_lines == dedup.input_lines,
        "retained plus pass-through lines must equal the dedup input",
    )
    .runtime()?;
    ensure(
        dedup.unique_lines == shuffle.lines,
        "dedup output must equal the shuffle line count",
    )
    .runtime()?;

    let final_corpus = ctx.out_path("shuffled.txt");
    let summary = PipelineSummary {
        final_corpus: display(&final_corpus),
        unfiltered_lines,
        filter_processed: run.report.processed,
        filter_retained: run.report.retained,
        filter_discarded: run.report.discarded,
        merged_lines: composition.total_lines,
        dedup_input_lines: dedup.input_lines,
        dedup_unique_lines: dedup.unique_lines,
        duplicates_removed: dedup.duplicates_removed,
        shuffled_lines: shuffle.lines,
    };
    let seeds = [
        ("embedding", ctx.config.embedding.seed),
        ("centroid", ctx.config.filter.centroid_seed),
        ("shuffle", ctx.config.shuffle.seed),
    ];
    let summary_path = ctx.write_report("pipeline", &seeds, &summary).runtime()?;
    stage_line(
        "pipeline",
        &[
            ("final_corpus", display(&final_corpus)),
            ("lines", shuffle.lines.to_string()),
            ("report", display(&summary_path)),
        ],
    );
    Ok(())
}

pub fn dump_config(ctx: &Ctx) -> std::result::Result<(), Failure> {
    print!("{}", ctx.config.to_toml());
    Ok(())
}
