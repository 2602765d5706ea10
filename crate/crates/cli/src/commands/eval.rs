//! Evaluation stages: minimal pairs, normalized efficiency, macro-F1.

use std::path::{Path, PathBuf};

use clap::Args;
use saaf_core::metrics::{
    attach_scores_tsv, load_pairs_tsv, load_results_json, load_results_tsv, minimal_pair_eval,
    norm_eff, score_pairs,
};
use saaf_core::ngram::{NgramScorer, DEFAULT_K, DEFAULT_ORDER};
use saaf_core::{Error, Result};
use serde::Serialize;

use crate::context::{display, stage_line, Ctx};
use crate::{Failure, Phase};

#[derive(Args)]
pub struct EvalPairsArgs {
    /// Minimal pairs TSV: category, good_text, bad_text
    #[arg(long, value_name = "PATH")]
    pub pairs: PathBuf,

    /// Sidecar TSV with one `good_score TAB bad_score` row per pair
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "train_corpus",
        required_unless_present = "train_corpus"
    )]
    pub scores: Option<PathBuf>,

    /// Corpus to train the built-in character n-gram scorer on
    #[arg(long, value_name = "PATH")]
    pub train_corpus: Option<PathBuf>,

    /// n-gram order for the built-in scorer
    #[arg(long, value_name = "N", default_value_t = DEFAULT_ORDER)]
    pub order: usize,

    /// Add-k smoothing constant for the built-in scorer
    #[arg(long, value_name = "K", default_value_t = DEFAULT_K)]
    pub k: f64,
}

pub fn eval_pairs(ctx: &Ctx, args: &EvalPairsArgs) -> std::result::Result<(), Failure> {
    let mut pairs = load_pairs_tsv(&args.pairs).runtime()?;
    match (&args.scores, &args.train_corpus) {
        (Some(scores), _) => attach_scores_tsv(scores, &mut pairs).runtime()?,
        (None, Some(corpus)) => {
            let lines = saaf_core::corpus_io::read_lines(corpus, "corpus")
                .runtime()?
                .map(|item| item.map(|line| line.text));
            let scorer = NgramScorer::train(lines, args.order, args.k).runtime()?;
            score_pairs(&mut pairs, &scorer);
        }
        (None, None) => unreachable!("clap enforces one scoring source"),
    }
    let report = minimal_pair_eval(&pairs).runtime()?;

    let report_path = ctx.write_report("eval-pairs", &[], &report).runtime()?;
    for category in &report.categories {
        stage_line(
            "eval-pairs",
            &[
                ("category", category.category.clone()),
                ("pairs", category.pairs.to_string()),
                ("correct", category.correct.to_string()),
                ("accuracy", format!("{:.2}", category.accuracy)),
            ],
        );
    }
    stage_line(
        "eval-pairs",
        &[
            ("pairs", report.pairs.to_string()),
            ("overall", format!("{:.2}", report.overall)),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}

#[derive(Args)]
pub struct EvalNormEffArgs {
    /// Benchmark results: TSV, or JSON when the extension is .json
    #[arg(long, value_name = "PATH")]
    pub results: PathBuf,
}

#[derive(Serialize)]
struct ModelScore {
    model: String,
    norm_eff: f64,
}

#[derive(Serialize)]
struct NormEffReport {
    benchmark: String,
    models: Vec<ModelScore>,
}

pub fn eval_norm_eff(ctx: &Ctx, args: &EvalNormEffArgs) -> std::result::Result<(), Failure> {
    let results = if args.results.extension().is_some_and(|e| e == "json") {
        load_results_json(&args.results).runtime()?
    } else {
        load_results_tsv(&args.results).runtime()?
    };
    let scores = norm_eff(&results).runtime()?;

    let report = NormEffReport {
        benchmark: results[0].benchmark.clone(),
        models: scores
            .into_iter()
            .map(|(model, norm_eff)| ModelScore { model, norm_eff })
            .collect(),
    };
    let report_path = ctx.write_report("eval-norm-eff", &[], &report).runtime()?;
    for entry in &report.models {
        stage_line(
            "eval-norm-eff",
            &[
                ("benchmark", report.benchmark.clone()),
                ("model", entry.model.clone()),
                ("norm_eff", format!("{:.3}", entry.norm_eff)),
            ],
        );
    }
    stage_line(
        "eval-norm-eff",
        &[
            ("models", report.models.len().to_string()),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}

#[derive(Args)]
pub struct MacroF1Args {
    /// Confusion matrix file: one row per line, whitespace-separated
    /// counts, rows = actual classes, columns = predicted
    #[arg(long, value_name = "PATH")]
    pub matrix: PathBuf,

    /// Exclude classes with zero support and zero predictions from the
    /// mean instead of counting them as F1 = 0
    #[arg(long = "macro-f1-skip-empty", visible_alias = "skip-empty")]
    pub skip_empty: bool,
}

#[derive(Serialize)]
struct MacroF1Report {
    classes: usize,
    skip_empty: bool,
    macro_f1: f64,
}

fn load_matrix(path: &Path) -> Result<Vec<Vec<u64>>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut matrix = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<u64>, _> =
            line.split_whitespace().map(str::parse).collect();
        matrix.push(row.map_err(|e| {
            Error::Input(format!("{}:{}: bad count: {e}", path.display(), i + 1))
        })?);
    }
    Ok(matrix)
}

pub fn macro_f1(ctx: &Ctx, args: &MacroF1Args) -> std::result::Result<(), Failure> {
    let matrix = load_matrix(&args.matrix).runtime()?;
    let value = saaf_core::metrics::macro_f1(&matrix, args.skip_empty).runtime()?;

    let report = MacroF1Report {
        classes: matrix.len(),
        skip_empty: args.skip_empty,
        macro_f1: value,
    };
    let report_path = ctx.write_report("macro-f1", &[], &report).runtime()?;
    stage_line(
        "macro-f1",
        &[
            ("classes", matrix.len().to_string()),
            ("macro_f1", format!("{value:.4}")),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}
