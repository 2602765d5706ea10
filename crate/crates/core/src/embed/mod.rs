//! Subword skip-gram embeddings, sentence vectors, and the reference
//! centroid that anchors similarity scoring.
//!
//! Words are represented by their own vector plus hashed character
//! n-gram vectors, so unseen words still map to a usable point in the
//! space. Inference is pure: a trained model is immutable and safe to
//! share across threads.

mod io;
mod train;

pub use io::{load_centroid, load_model, save_centroid, save_model};
pub use train::{train_embeddings, TrainSource};

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Identifier of the subword hash baked into model files. Loading rejects
/// anything else, so scores stay reproducible across runs and builds.
pub const SUBWORD_HASH_ID: &str = "fnv1a32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingHyperparams {
    pub dimension: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub min_word_count: u64,
    pub subword_ngram_min: usize,
    pub subword_ngram_max: usize,
    pub bucket_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingHyperparams {
    fn default() -> Self {
        EmbeddingHyperparams {
            dimension: 100,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            min_word_count: 5,
            subword_ngram_min: 3,
            subword_ngram_max: 6,
            bucket_count: 2_000_000,
            learning_rate: 0.05,
            seed: 1,
        }
    }
}

impl EmbeddingHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        if self.subword_ngram_min == 0 || self.subword_ngram_min > self.subword_ngram_max {
            return Err(Error::Config(
                "require 1 <= subword_ngram_min <= subword_ngram_max".into(),
            ));
        }
        if self.window == 0 || self.negative_samples == 0 || self.epochs == 0 {
            return Err(Error::Config(
                "window, negative_samples, and epochs must be >= 1".into(),
            ));
        }
        if self.bucket_count == 0 {
            return Err(Error::Config("bucket_count must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub word: String,
    pub count: u64,
}

/// Trained model: vocabulary plus the input matrix over word rows and
/// hashed subword rows. Only input vectors are kept; the trainer's output
/// matrix exists solely to shape them.
pub struct EmbeddingModel {
    hyperparams: EmbeddingHyperparams,
    vocab: Vec<VocabEntry>,
    index: HashMap<String, u32>,
    /// Row-major (vocab.len() + bucket_count) x dimension.
    input: Vec<f32>,
}

impl std::fmt::Debug for EmbeddingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingModel")
            .field("hyperparams", &self.hyperparams)
            .field("vocab_len", &self.vocab.len())
            .finish_non_exhaustive()
    }
}

impl EmbeddingModel {
    pub(crate) fn from_parts(
        hyperparams: EmbeddingHyperparams,
        vocab: Vec<VocabEntry>,
        input: Vec<f32>,
    ) -> Result<Self> {
        hyperparams.validate()?;
        let rows = vocab.len() + hyperparams.bucket_count;
        if input.len() != rows * hyperparams.dimension {
            return Err(Error::Model(format!(
                "input matrix has {} values, expected {} rows x {}",
                input.len(),
                rows,
                hyperparams.dimension
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("input matrix contains non-finite values".into()));
        }
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i as u32))
            .collect();
        Ok(EmbeddingModel {
            hyperparams,
            vocab,
            index,
            input,
        })
    }

    pub fn hyperparams(&self) -> &EmbeddingHyperparams {
        &self.hyperparams
    }

    pub fn vocab(&self) -> &[VocabEntry] {
        &self.vocab
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub(crate) fn input_matrix(&self) -> &[f32] {
        &self.input
    }

    fn row(&self, idx: usize) -> &[f32] {
        let d = self.hyperparams.dimension;
        &self.input[idx * d..(idx + 1) * d]
    }

    /// Input row indices for a word: its vocabulary row when in-vocabulary
    /// plus one hashed row per subword n-gram. Shared by training and
    /// inference so both see the same representation.
    pub(crate) fn input_ids_for(
        word: &str,
        index: &HashMap<String, u32>,
        vocab_len: usize,
        hp: &EmbeddingHyperparams,
    ) -> Vec<u32> {
        let mut ids = Vec::new();
        if let Some(&id) = index.get(word) {
            ids.push(id);
        }
        for_each_subword(word, hp.subword_ngram_min, hp.subword_ngram_max, |ngram| {
            let bucket = fnv1a32(ngram) as usize % hp.bucket_count;
            ids.push((vocab_len + bucket) as u32);
        });
        ids
    }

    /// Query-time word vector: the sum of the word's own vector and its
    /// subword vectors. Out-of-vocabulary words fall back to subwords
    /// alone; a word with no rows at all yields the zero vector.
    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        let d = self.hyperparams.dimension;
        let ids = Self::input_ids_for(word, &self.index, self.vocab.len(), &self.hyperparams);
        let mut v = vec![0.0f64; d];
        for id in ids {
            let row = self.row(id as usize);
            for (acc, x) in v.iter_mut().zip(row) {
                *acc += *x as f64;
            }
        }
        v
    }

    /// Mean of per-token unit-normalized word vectors over whitespace
    /// tokens. Zero-norm tokens are skipped; empty or all-skipped text
    /// yields the zero vector.
    pub fn sentence_vector(&self, text: &str) -> Vec<f64> {
        let d = self.hyperparams.dimension;
        let mut acc = vec![0.0f64; d];
        let mut used = 0usize;
        for token in text.split_whitespace() {
            let v = self.word_vector(token);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (a, x) in acc.iter_mut().zip(&v) {
                    *a += x / norm;
                }
                used += 1;
            }
        }
        if used > 0 {
            for a in &mut acc {
                *a /= used as f64;
            }
        }
        acc
    }
}

/// FNV-1a over raw bytes. The subword hash recorded in model files.
pub(crate) fn fnv1a32(bytes: &[u8]) -> u32 {
    let mut h: u32 = 0x811C_9DC5;
    for &b in bytes {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

/// Calls `f` with every character n-gram (as bytes) of `<word>` whose
/// character length lies in [min, max].
pub(crate) fn for_each_subword(word: &str, min: usize, max: usize, mut f: impl FnMut(&[u8])) {
    let decorated = format!("<{word}>");
    let mut boundaries: Vec<usize> = decorated.char_indices().map(|(i, _)| i).collect();
    boundaries.push(decorated.len());
    let nchars = boundaries.len() - 1;
    for start in 0..nchars {
        for n in min..=max {
            let end = start + n;
            if end > nchars {
                break;
            }
            f(&decorated.as_bytes()[boundaries[start]..boundaries[end]]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCentroid {
    pub vector: Vec<f64>,
    /// Lines actually averaged (min of the requested sample size and the
    /// corpus size).
    pub sample_size: u64,
    pub seed: u64,
}

/// Samples up to `sample_size` lines uniformly without replacement
/// (single-pass reservoir, seeded) and returns the mean of their sentence
/// vectors.
pub fn reference_centroid<I>(
    model: &EmbeddingModel,
    lines: I,
    sample_size: u64,
    seed: u64,
) -> Result<ReferenceCentroid>
where
    I: IntoIterator<Item = Result<String>>,
{
    if sample_size == 0 {
        return Err(Error::Config("centroid sample_size must be >= 1".into()));
    }
    let m = usize::try_from(sample_size)
        .map_err(|_| Error::Config("centroid sample_size too large".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<String> = Vec::with_capacity(m.min(4096));
    for (i, line) in lines.into_iter().enumerate() {
        let line = line?;
        if i < m {
            reservoir.push(line);
        } else {
            let j = rng.gen_range(0..=i);
            if j < m {
                reservoir[j] = line;
            }
        }
    }
    if reservoir.is_empty() {
        return Err(Error::Input("reference corpus has no lines".into()));
    }

    let d = model.hyperparams().dimension;
    let mut acc = vec![0.0f64; d];
    for line in &reservoir {
        let v = model.sentence_vector(line);
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x;
        }
    }
    for a in &mut acc {
        *a /= reservoir.len() as f64;
    }
    Ok(ReferenceCentroid {
        vector: acc,
        sample_size: reservoir.len() as u64,
        seed,
    })
}

/// Cosine similarity in [-1, 1]. Either vector having zero norm yields 0:
/// a line with no usable tokens carries no evidence of reference-likeness.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!(
            "cosine dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}
