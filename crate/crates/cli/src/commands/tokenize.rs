//! Tokenizer stages: BPE training, encoding, corpus statistics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use saaf_core::bbpe::{
    corpus_token_stats, load_vocab, save_vocab, train_bbpe, PackingConfig, SpecialTokens,
};
use saaf_core::corpus_io::read_lines;
use saaf_core::{Error, Result};
use serde::Serialize;

use crate::context::{display, stage_line, Ctx};
use crate::{Failure, Phase};

fn corpus_lines(path: &Path) -> Result<impl Iterator<Item = Result<String>>> {
    Ok(read_lines(path, "corpus")?.map(|item| item.map(|line| line.text)))
}

fn default_vocab_path(ctx: &Ctx) -> PathBuf {
    ctx.out_path(&format!("bbpe_{}.vocab", ctx.config.bbpe.vocab_size))
}

#[derive(Args)]
pub struct BbpeTrainArgs {
    /// Training corpus (default: <output-dir>/shuffled.txt)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Target vocabulary size including bytes and specials
    #[arg(long, value_name = "V")]
    pub vocab_size: Option<usize>,

    /// Vocabulary destination (default: <output-dir>/bbpe_<V>.vocab)
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct BbpeTrainReport {
    vocab_path: String,
    requested_vocab_size: usize,
    /// Smaller than requested when merges ran out first.
    vocab_size: usize,
    merges: usize,
}

pub fn bbpe_train(ctx: &Ctx, args: &BbpeTrainArgs) -> std::result::Result<(), Failure> {
    let input = args.input.clone().unwrap_or_else(|| ctx.out_path("shuffled.txt"));
    let requested = args.vocab_size.unwrap_or(ctx.config.bbpe.vocab_size);
    let out = match &args.output {
        Some(path) => path.clone(),
        None => ctx
            .create_out_path(&format!("bbpe_{requested}.vocab"))
            .runtime()?,
    };

    let lines = corpus_lines(&input).runtime()?;
    let vocab = train_bbpe(lines, requested, SpecialTokens::default()).runtime()?;
    save_vocab(&vocab, &out).runtime()?;

    let report = BbpeTrainReport {
        vocab_path: display(&out),
        requested_vocab_size: requested,
        vocab_size: vocab.vocab_size(),
        merges: vocab.merges().len(),
    };
    let report_path = ctx.write_report("bbpe-train", &[], &report).runtime()?;
    stage_line(
        "bbpe-train",
        &[
            ("vocab_size", vocab.vocab_size().to_string()),
            ("merges", vocab.merges().len().to_string()),
            ("output", display(&out)),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Vocabulary file (default: <output-dir>/bbpe_<configured V>.vocab)
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,

    /// Corpus to encode (default: <output-dir>/shuffled.txt)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Id-sequence destination; standard output when omitted
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

pub fn encode(ctx: &Ctx, args: &EncodeArgs) -> std::result::Result<(), Failure> {
    let vocab_path = args.vocab.clone().unwrap_or_else(|| default_vocab_path(ctx));
    let input = args.input.clone().unwrap_or_else(|| ctx.out_path("shuffled.txt"));
    let vocab = load_vocab(&vocab_path).runtime()?;

    let stdout = std::io::stdout();
    let mut sink: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(Error::io(path)).runtime()?,
        )),
        None => Box::new(BufWriter::new(stdout.lock())),
    };

    let mut lines_encoded = 0u64;
    let mut tokens = 0u64;
    let mut row = String::new();
    for item in corpus_lines(&input).runtime()? {
        let line = item.runtime()?;
        let ids = vocab.encode(&line);
        row.clear();
        for (i, id) in ids.iter().enumerate() {
            if i > 0 {
                row.push(' ');
            }
            row.push_str(&id.to_string());
        }
        row.push('\n');
        sink.write_all(row.as_bytes())
            .map_err(|e| Error::Input(format!("encode output: {e}")))
            .runtime()?;
        lines_encoded += 1;
        tokens += ids.len() as u64;
    }
    sink.flush()
        .map_err(|e| Error::Input(format!("encode output: {e}")))
        .runtime()?;
    drop(sink);

    // Progress lines would corrupt the id stream when it goes to stdout.
    if let Some(path) = &args.output {
        stage_line(
            "encode",
            &[
                ("lines", lines_encoded.to_string()),
                ("tokens", tokens.to_string()),
                ("output", display(path)),
            ],
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct StatsArgs {
    /// Vocabulary file (default: <output-dir>/bbpe_<configured V>.vocab)
    #[arg(long, value_name = "PATH")]
    pub vocab: Option<PathBuf>,

    /// Corpus to measure (default: <output-dir>/shuffled.txt)
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Packing window override in token positions
    #[arg(long, value_name = "W")]
    pub window: Option<usize>,
}

pub fn stats(ctx: &Ctx, args: &StatsArgs) -> std::result::Result<(), Failure> {
    let vocab_path = args.vocab.clone().unwrap_or_else(|| default_vocab_path(ctx));
    let input = args.input.clone().unwrap_or_else(|| ctx.out_path("shuffled.txt"));
    let window = args.window.unwrap_or(ctx.config.bbpe.window);

    let vocab = load_vocab(&vocab_path).runtime()?;
    let config = PackingConfig { window };
    let lines = corpus_lines(&input).runtime()?;
    let token_stats = corpus_token_stats(&vocab, lines, &config).runtime()?;

    let report_path = ctx.write_report("stats", &[], &token_stats).runtime()?;
    stage_line(
        "stats",
        &[
            ("documents", token_stats.documents.to_string()),
            ("total_tokens", token_stats.total_tokens.to_string()),
            ("fertility", format!("{:.4}", token_stats.fertility)),
            (
                "packing_efficiency",
                format!("{:.4}", token_stats.packing_efficiency),
            ),
            ("sequences", token_stats.sequences_produced.to_string()),
            ("truncated", token_stats.truncated_sentences.to_string()),
            ("report", display(&report_path)),
        ],
    );
    Ok(())
}
