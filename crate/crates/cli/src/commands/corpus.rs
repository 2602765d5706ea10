//! Corpus-level stages: ingest (merge), dedup, shuffle.

use std::path::PathBuf;

use clap::Args;
use saaf_core::corpus_io::merge_to_path;
use saaf_core::dedup::{dedup_file, DedupMode, DedupReport};
use saaf_core::shuffle::{shuffle_file, ShuffleConfig, ShuffleReport};

use crate::context::{display, stage_line, Ctx};
use crate::{Failure, Phase};

#[derive(Args)]
pub struct IngestArgs {
    /// Merged corpus destination (default: <output-dir>/merged.txt)
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Apply NFC normalization while reading
    #[arg(long)]
    pub nfc: bool,
}

pub fn ingest(ctx: &Ctx, args: &IngestArgs) -> Result<(), Failure> {
    let manifest = ctx.manifest()?;
    let out = match &args.output {
        Some(path) => path.clone(),
        None => ctx.create_out_path("merged.txt").runtime()?,
    };
    let report = merge_to_path(&manifest, &out, args.nfc).runtime()?;
    let report_path = ctx.write_report("ingest", &[], &report).runtime()?;
    stage_line(
        "ingest",
        &[
            ("sources", report.per_source.len().to_string()),
            ("lines", report.total_lines.to_string()),
            ("bytes", report.total_bytes.to_string()),
            ("output", display(&out)),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}

#[derive(Args)]
pub struct DedupArgs {
    /// Input corpus (default: <output-dir>/merged.txt)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Deduplicated destination (default: <output-dir>/deduped.txt)
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Trust 128-bit hashes instead of re-reading lines to verify
    #[arg(long)]
    pub hash_only: bool,
}

pub fn dedup(ctx: &Ctx, args: &DedupArgs) -> Result<DedupReport, Failure> {
    let input = args.input.clone().unwrap_or_else(|| ctx.out_path("merged.txt"));
    let output = match &args.output {
        Some(path) => path.clone(),
        None => ctx.create_out_path("deduped.txt").runtime()?,
    };
    let mode = if args.hash_only {
        DedupMode::HashOnly
    } else {
        DedupMode::Verified
    };
    let report = dedup_file(&input, &output, mode).runtime()?;
    let report_path = ctx.write_report("dedup", &[], &report).runtime()?;
    stage_line(
        "dedup",
        &[
            ("input_lines", report.input_lines.to_string()),
            ("unique_lines", report.unique_lines.to_string()),
            ("duplicates_removed", report.duplicates_removed.to_string()),
            ("output", display(&output)),
            ("report", display(&report_path)),
        ],
    );
    Ok(report)
}

#[derive(Args)]
pub struct ShuffleArgs {
    /// Input corpus (default: <output-dir>/deduped.txt)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Shuffled destination (default: <output-dir>/shuffled.txt)
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

pub fn shuffle(ctx: &Ctx, args: &ShuffleArgs) -> Result<ShuffleReport, Failure> {
    let input = args.input.clone().unwrap_or_else(|| ctx.out_path("deduped.txt"));
    let output = match &args.output {
        Some(path) => path.clone(),
        None => ctx.create_out_path("shuffled.txt").runtime()?,
    };
    let config = ShuffleConfig {
        seed: ctx.config.shuffle.seed,
        bucket_count: ctx.config.shuffle.bucket_count,
        scratch_dir: ctx.config.scratch_dir.clone(),
    };
    let report = shuffle_file(&input, &output, &config).runtime()?;
    let report_path = ctx
        .write_report("shuffle", &[("shuffle", config.seed)], &report)
        .runtime()?;
    stage_line(
        "shuffle",
        &[
            ("lines", report.lines.to_string()),
            ("seed", config.seed.to_string()),
            ("buckets", config.bucket_count.to_string()),
            ("output", display(&output)),
            ("report", display(&report_path)),
        ],
    );
    Ok(report)
}
