//! Distributional line filtering.
//!
//! A line's final score is its cosine similarity to the reference
//! centroid minus its heuristic penalty; lines scoring at or above the
//! threshold are retained. Scoring is parallel per line, while counts,
//! extremes, and emission stay in input order, so reports are identical
//! regardless of worker count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::DocumentLine;
use crate::embed::{cosine_sim, EmbeddingModel, ReferenceCentroid};
use crate::textstats::{penalty, PenaltyConfig};
use crate::{Error, Result};

/// Lines scored per parallel batch before sequential accounting.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub tau: f64,
    /// Rows kept in each of the report's best/worst lists.
    pub extremes_k: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            tau: 0.1,
            extremes_k: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineScores {
    pub sim: f64,
    pub penalty: f64,
    /// Exactly `sim - penalty`.
    #[serde(rename = "final")]
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredLine {
    pub line: DocumentLine,
    pub scores: LineScores,
}

/// Immutable scoring context; cheap to share across threads.
pub struct LineScorer<'a> {
    model: &'a EmbeddingModel,
    centroid: &'a ReferenceCentroid,
    penalty_config: &'a PenaltyConfig,
}

impl<'a> LineScorer<'a> {
    pub fn new(
        model: &'a EmbeddingModel,
        centroid: &'a ReferenceCentroid,
        penalty_config: &'a PenaltyConfig,
    ) -> Result<Self> {
        if centroid.vector.len() != model.hyperparams().dimension {
            return Err(Error::Model(format!(
                "centroid dimension {} does not match model dimension {}",
                centroid.vector.len(),
                model.hyperparams().dimension
            )));
        }
        penalty_config.validate()?;
        Ok(LineScorer {
            model,
            centroid,
            penalty_config,
        })
    }

    pub fn score(&self, text: &str) -> LineScores {
        let v = self.model.sentence_vector(text);
        let sim = cosine_sim(&v, &self.centroid.vector)
            .expect("dimension checked in LineScorer::new");
        let pen = penalty(text, self.penalty_config).total;
        LineScores {
            sim,
            penalty: pen,
            final_score: sim - pen,
        }
    }
}

pub fn score_line(line: DocumentLine, scorer: &LineScorer) -> ScoredLine {
    let scores = scorer.score(&line.text);
    ScoredLine { line, scores }
}

/// One row of the report's qualitative extremes, laid out like the
/// score/similarity/penalty/text table the filter is audited with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeRow {
    #[serde(rename = "final")]
    pub final_score: f64,
    pub sim: f64,
    pub penalty: f64,
    pub text: String,
    pub source_id: String,
    pub line_index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub tau: f64,
    pub processed: u64,
    pub retained: u64,
    pub discarded: u64,
    /// retained / processed; 0 when nothing was processed.
    pub retention_rate: f64,
    /// Highest-scoring rows, best first.
    pub top_k: Vec<ExtremeRow>,
    /// Lowest-scoring rows, worst first.
    pub bottom_k: Vec<ExtremeRow>,
}

/// Heap entry ranked by score with first-occurrence tie-breaking. `TOP`
/// selects whether high scores (true) or low scores (false) are "better".
struct Entry<const TOP: bool> {
    score: f64,
    seq: u64,
    row: ExtremeRow,
}

impl<const TOP: bool> Entry<TOP> {
    fn better(&self, other: &Self) -> Ordering {
        let by_score = if TOP {
            self.score.total_cmp(&other.score)
        } else {
            other.score.total_cmp(&self.score)
        };
        by_score.then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<const TOP: bool> PartialEq for Entry<TOP> {
    fn eq(&self, other: &Self) -> bool {
        self.better(other) == Ordering::Equal
    }
}
impl<const TOP: bool> Eq for Entry<TOP> {}
impl<const TOP: bool> PartialOrd for Entry<TOP> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const TOP: bool> Ord for Entry<TOP> {
    // Reversed so the BinaryHeap peeks at the weakest kept entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other.better(self)
    }
}

struct BestK<const TOP: bool> {
    k: usize,
    heap: BinaryHeap<Entry<TOP>>,
}

impl<const TOP: bool> BestK<TOP> {
    fn new(k: usize) -> Self {
        BestK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn push(&mut self, scored: &ScoredLine, seq: u64) {
        if self.k == 0 {
            return;
        }
        let entry = Entry {
            score: scored.scores.final_score,
            seq,
            row: ExtremeRow {
                final_score: scored.scores.final_score,
                sim: scored.scores.sim,
                penalty: scored.scores.penalty,
                text: scored.line.text.clone(),
                source_id: scored.line.source_id.to_string(),
                line_index: scored.line.line_index,
            },
        };
        if self.heap.len() < self.k {
            self.heap.push(entry);
        } else if let Some(weakest) = self.heap.peek() {
            if entry.better(weakest) == Ordering::Greater {
                self.heap.pop();
                self.heap.push(entry);
            }
        }
    }

    /// Rows best-first.
    fn into_rows(self) -> Vec<ExtremeRow> {
        let mut entries: Vec<Entry<TOP>> = self.heap.into_vec();
        entries.sort_by(|a, b| b.better(a));
        entries.into_iter().map(|e| e.row).collect()
    }
}

/// Scores every line, calling `on_line` in input order with the retained
/// flag, and returns the report. Workers only affect throughput.
pub fn filter_stream<I, F>(
    lines: I,
    scorer: &LineScorer,
    config: &FilterConfig,
    mut on_line: F,
) -> Result<FilterReport>
where
    I: IntoIterator<Item = Result<DocumentLine>>,
    F: FnMut(&ScoredLine, bool) -> Result<()>,
{
    let mut report = FilterReport {
        tau: config.tau,
        processed: 0,
        retained: 0,
        discarded: 0,
        retention_rate: 0.0,
        top_k: Vec::new(),
        bottom_k: Vec::new(),
    };
    let mut top: BestK<true> = BestK::new(config.extremes_k);
    let mut bottom: BestK<false> = BestK::new(config.extremes_k);
    let mut seq = 0u64;
    let mut chunk: Vec<DocumentLine> = Vec::with_capacity(CHUNK);
    let mut lines = lines.into_iter();

    loop {
        chunk.clear();
        for line in lines.by_ref().take(CHUNK) {
            chunk.push(line?);
        }
        if chunk.is_empty() {
            break;
        }
        let scored: Vec<ScoredLine> = chunk
            .par_drain(..)
            .map(|line| score_line(line, scorer))
            .collect();
        for s in scored {
            let retained = s.scores.final_score >= config.tau;
            report.processed += 1;
            if retained {
                report.retained += 1;
            } else {
                report.discarded += 1;
            }
            top.push(&s, seq);
            bottom.push(&s, seq);
            on_line(&s, retained)?;
            seq += 1;
        }
    }

    if report.processed > 0 {
        report.retention_rate = report.retained as f64 / report.processed as f64;
    }
    report.top_k = top.into_rows();
    report.bottom_k = bottom.into_rows();
    Ok(report)
}

/// Filters a stream to a retained-lines file, with an optional per-line
/// score sidecar (`final TAB sim TAB penalty`, one row per input line).
pub fn filter_to_path<I>(
    lines: I,
    scorer: &LineScorer,
    config: &FilterConfig,
    retained_path: &Path,
    sidecar_path: Option<&Path>,
) -> Result<FilterReport>
where
    I: IntoIterator<Item = Result<DocumentLine>>,
{
    let retained_file = File::create(retained_path).map_err(Error::io(retained_path))?;
    let mut retained = BufWriter::new(retained_file);
    let mut sidecar = match sidecar_path {
        Some(p) => Some(BufWriter::new(File::create(p).map_err(Error::io(p))?)),
        None => None,
    };

    let report = filter_stream(lines, scorer, config, |scored, keep| {
        if keep {
            retained
                .write_all(scored.line.text.as_bytes())
                .and_then(|_| retained.write_all(b"\n"))
                .map_err(Error::io(retained_path))?;
        }
        if let Some(w) = sidecar.as_mut() {
            writeln!(
                w,
                "{}\t{}\t{}",
                scored.scores.final_score, scored.scores.sim, scored.scores.penalty
            )
            .map_err(Error::io(sidecar_path.unwrap_or(retained_path)))?;
        }
        Ok(())
    })?;

    retained.flush().map_err(Error::io(retained_path))?;
    if let Some(mut w) = sidecar {
        w.flush()
            .map_err(Error::io(sidecar_path.unwrap_or(retained_path)))?;
    }
    Ok(report)
}
