//! `saaf`: corpus curation and tokenizer evaluation pipeline.
//!
//! Every stage is a subcommand; `pipeline` chains the curation stages
//! in order (filter auxiliary sources, merge, dedup, shuffle). Each
//! stage writes a JSON report recording the seeds it consumed and
//! prints diffable `stage=<name> key=value` lines. All randomness comes
//! from config seeds, so reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 runtime failure (single-line JSON error
//! record on stderr), 2 usage or configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod context;

use context::Ctx;

#[derive(Parser)]
#[command(
    name = "saaf",
    version,
    about = "Corpus curation and tokenizer ablation toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Pipeline configuration file (TOML); built-in defaults when absent
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Master seed overriding the config: embedding trains with S,
    /// centroid sampling uses S+1, shuffling uses S+2
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    /// Directory for corpora, models, and reports (overrides config)
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Scratch space for shuffle buckets (overrides config)
    #[arg(long, global = true, env = "SAAF_SCRATCH_DIR", value_name = "DIR")]
    scratch_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Merge all manifest sources into one corpus with composition stats
    Ingest(commands::corpus::IngestArgs),
    /// Train subword embeddings on the reference sources
    EmbedTrain(commands::model::EmbedTrainArgs),
    /// Average sampled reference sentence vectors into a centroid
    Centroid(commands::model::CentroidArgs),
    /// Score and filter the configured source roles against the centroid
    Filter(commands::model::FilterArgs),
    /// Remove exact duplicate lines, keeping first occurrences
    Dedup(commands::corpus::DedupArgs),
    /// Shuffle a corpus reproducibly via scratch buckets
    Shuffle(commands::corpus::ShuffleArgs),
    /// Learn a byte-level BPE vocabulary from a corpus
    BbpeTrain(commands::tokenize::BbpeTrainArgs),
    /// Encode a corpus to token ids, one space-separated line each
    Encode(commands::tokenize::EncodeArgs),
    /// Tokenization and sentence-packing statistics for a corpus
    Stats(commands::tokenize::StatsArgs),
    /// Score minimal pairs and report per-category accuracy
    EvalPairs(commands::eval::EvalPairsArgs),
    /// Normalized efficiency scores for one benchmark's results
    EvalNormEff(commands::eval::EvalNormEffArgs),
    /// Macro-F1 of a confusion matrix file
    #[command(name = "macro-f1")]
    MacroF1(commands::eval::MacroF1Args),
    /// Run filter, merge, dedup, and shuffle end to end
    Pipeline(commands::pipeline::PipelineArgs),
    /// Print the effective configuration as TOML
    DumpConfig,
}

/// Usage-phase failures (bad config, unreadable manifest) exit 2 like
/// clap's own errors; failures past validation exit 1.
pub enum Failure {
    Usage(saaf_core::Error),
    Runtime(saaf_core::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e.to_string(),
        }
    }
}

/// Tags a core result with the phase it failed in.
pub trait Phase<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T> Phase<T> for saaf_core::Result<T> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(Failure::Usage)
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(Failure::Runtime)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(workers) = cli.global.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Usage(saaf_core::Error::Config(format!("workers: {e}"))))?;
    }
    let ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Ingest(args) => commands::corpus::ingest(&ctx, &args),
        Command::EmbedTrain(args) => commands::model::embed_train(&ctx, &args),
        Command::Centroid(args) => commands::model::centroid(&ctx, &args),
        Command::Filter(args) => commands::model::filter(&ctx, &args),
        Command::Dedup(args) => commands::corpus::dedup(&ctx, &args).map(|_| ()),
        Command::Shuffle(args) => commands::corpus::shuffle(&ctx, &args).map(|_| ()),
        Command::BbpeTrain(args) => commands::tokenize::bbpe_train(&ctx, &args),
        Command::Encode(args) => commands::tokenize::encode(&ctx, &args),
        Command::Stats(args) => commands::tokenize::stats(&ctx, &args),
        Command::EvalPairs(args) => commands::eval::eval_pairs(&ctx, &args),
        Command::EvalNormEff(args) => commands::eval::eval_norm_eff(&ctx, &args),
        Command::MacroF1(args) => commands::eval::macro_f1(&ctx, &args),
        Command::Pipeline(args) => commands::pipeline::pipeline(&ctx, &args),
        Command::DumpConfig => commands::pipeline::dump_config(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default())
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let record = serde_json::json!({ "error": failure.message() });
            eprintln!("{record}");
            ExitCode::from(failure.exit_code())
        }
    }
}
