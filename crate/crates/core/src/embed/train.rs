//! Skip-gram training with negative sampling over words plus hashed
//! subword n-grams.
//!
//! Single-threaded by design: the determinism guarantee (same seed, same
//! corpus, bitwise-identical vectors) holds only without update races,
//! and filtering-scale reference corpora train in minutes. Inference
//! parallelism lives downstream.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingHyperparams, EmbeddingModel, VocabEntry};
use crate::corpus_io::read_lines;
use crate::{Error, Result};

const NEGATIVE_TABLE_SIZE: usize = 1 << 22;

/// Where training lines come from. Training makes one pass per epoch plus
/// one for the vocabulary, so the source must be re-iterable.
pub enum TrainSource<'a> {
    Memory(&'a [String]),
    Files(&'a [PathBuf]),
}

impl TrainSource<'_> {
    fn for_each_line(&self, f: &mut dyn FnMut(&str)) -> Result<()> {
        match self {
            TrainSource::Memory(lines) => {
                for line in *lines {
                    f(line);
                }
                Ok(())
            }
            TrainSource::Files(paths) => {
                for path in *paths {
                    let id = path.display().to_string();
                    for line in read_lines(path, &id)? {
                        f(&line?.text);
                    }
                }
                Ok(())
            }
        }
    }
}

/// Trains a model on whitespace-tokenized lines. Deterministic for a
/// fixed seed and source.
pub fn train_embeddings(
    source: &TrainSource,
    hp: &EmbeddingHyperparams,
) -> Result<EmbeddingModel> {
    hp.validate()?;
    let (vocab, index, kept_tokens) = build_vocab(source, hp)?;
    let d = hp.dimension;
    let rows = vocab.len() + hp.bucket_count;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut input = vec![0.0f32; rows * d];
    let bound = 1.0f32 / d as f32;
    for v in &mut input {
        *v = rng.gen_range(-bound..bound);
    }
    let mut output = vec![0.0f32; vocab.len() * d];

    // Input rows per vocabulary word, precomputed once: the word row plus
    // its hashed subword rows.
    let word_inputs: Vec<Vec<u32>> = vocab
        .iter()
        .map(|e| EmbeddingModel::input_ids_for(&e.word, &index, vocab.len(), hp))
        .collect();

    let negative_table = build_negative_table(&vocab);

    let total_updates = kept_tokens.saturating_mul(hp.epochs as u64).max(1);
    let mut processed = 0u64;
    let lr0 = hp.learning_rate;
    let mut hidden = vec![0.0f32; d];
    let mut grad = vec![0.0f32; d];
    let mut ids: Vec<u32> = Vec::new();

    for epoch in 0..hp.epochs {
        source.for_each_line(&mut |line| {
            ids.clear();
            ids.extend(
                line.split_whitespace()
                    .filter_map(|t| index.get(t).copied()),
            );
            for i in 0..ids.len() {
                processed += 1;
                let progress = processed as f64 / total_updates as f64;
                let lr = (lr0 * (1.0 - progress)).max(0.0) as f32;
                let radius = rng.gen_range(1..=hp.window);
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(ids.len() - 1);
                let inputs = &word_inputs[ids[i] as usize];
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    update(
                        &mut input,
                        &mut output,
                        &mut hidden,
                        &mut grad,
                        inputs,
                        ids[j],
                        lr,
                        hp,
                        &negative_table,
                        &mut rng,
                    );
                }
            }
        })?;
        log::debug!("embedding epoch {} of {} done", epoch + 1, hp.epochs);
    }

    EmbeddingModel::from_parts(hp.clone(), vocab, input)
}

fn build_vocab(
    source: &TrainSource,
    hp: &EmbeddingHyperparams,
) -> Result<(Vec<VocabEntry>, HashMap<String, u32>, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut any_line = false;
    source.for_each_line(&mut |line| {
        any_line = true;
        for token in line.split_whitespace() {
            *counts.entry(token.to_string()).or_insert(0) += 1;
        }
    })?;
    if !any_line {
        return Err(Error::Input("training corpus is empty".into()));
    }

    let mut vocab: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|(_, c)| *c >= hp.min_word_count)
        .map(|(word, count)| VocabEntry { word, count })
        .collect();
    if vocab.is_empty() {
        return Err(Error::Model(format!(
            "no word occurs at least {} times; lower min_word_count",
            hp.min_word_count
        )));
    }
    vocab.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    if vocab.len() + hp.bucket_count > u32::MAX as usize {
        return Err(Error::Config("vocabulary plus buckets exceeds row id space".into()));
    }
    let kept_tokens: u64 = vocab.iter().map(|e| e.count).sum();
    let index = vocab
        .iter()
        .enumerate()
        .map(|(i, e)| (e.word.clone(), i as u32))
        .collect();
    Ok((vocab, index, kept_tokens))
}

/// Word draw table for negative sampling, proportional to count^0.5.
fn build_negative_table(vocab: &[VocabEntry]) -> Vec<u32> {
    let z: f64 = vocab.iter().map(|e| (e.count as f64).sqrt()).sum();
    let mut table = Vec::with_capacity(NEGATIVE_TABLE_SIZE);
    for (i, e) in vocab.iter().enumerate() {
        let share = (e.count as f64).sqrt() / z;
        let slots = (share * NEGATIVE_TABLE_SIZE as f64) as usize;
        for _ in 0..slots {
            table.push(i as u32);
        }
    }
    if table.is_empty() {
        table.push(0);
    }
    table
}

#[allow(clippy::too_many_arguments)]
fn update(
    input: &mut [f32],
    output: &mut [f32],
    hidden: &mut [f32],
    grad: &mut [f32],
    input_ids: &[u32],
    target: u32,
    lr: f32,
    hp: &EmbeddingHyperparams,
    negative_table: &[u32],
    rng: &mut ChaCha8Rng,
) {
    let d = hp.dimension;
    hidden.fill(0.0);
    for &id in input_ids {
        let row = &input[id as usize * d..(id as usize + 1) * d];
        for (h, x) in hidden.iter_mut().zip(row) {
            *h += x;
        }
    }
    let inv = 1.0 / input_ids.len() as f32;
    for h in hidden.iter_mut() {
        *h *= inv;
    }

    grad.fill(0.0);
    for s in 0..=hp.negative_samples {
        let (label, out_id) = if s == 0 {
            (1.0f32, target)
        } else {
            match sample_negative(negative_table, target, rng) {
                Some(id) => (0.0f32, id),
                None => continue,
            }
        };
        let row = &mut output[out_id as usize * d..(out_id as usize + 1) * d];
        let mut dot = 0.0f32;
        for (h, x) in hidden.iter().zip(row.iter()) {
            dot += h * x;
        }
        let score = 1.0 / (1.0 + (-dot).exp());
        let alpha = lr * (label - score);
        for ((g, x), h) in grad.iter_mut().zip(row.iter_mut()).zip(hidden.iter()) {
            *g += alpha * *x;
            *x += alpha * h;
        }
    }

    for &id in input_ids {
        let row = &mut input[id as usize * d..(id as usize + 1) * d];
        for (x, g) in row.iter_mut().zip(grad.iter()) {
            *x += g;
        }
    }
}

/// Draws from the table until the sample differs from the target. A
/// single-word vocabulary has no valid negatives; those samples are
/// skipped.
fn sample_negative(table: &[u32], target: u32, rng: &mut ChaCha8Rng) -> Option<u32> {
    for _ in 0..100 {
        let id = table[rng.gen_range(0..table.len())];
        if id != target {
            return Some(id);
        }
    }
    None
}
