//! Corpus curation and tokenizer ablation primitives for low-resource
//! pretraining pipelines.
//!
//! The crate covers the full data path from raw one-document-per-line
//! sources to a training-ready corpus: source ingestion and merging,
//! character-level quality penalties, subword skip-gram embeddings with a
//! reference centroid, distributional filtering, exact deduplication,
//! seeded external-memory shuffling, byte-level BPE training with packing
//! statistics, and the evaluation metrics used to compare tokenizer
//! ablations.

pub mod bbpe;
pub mod config;
pub mod corpus_io;
pub mod dedup;
pub mod embed;
pub mod filter;
pub mod metrics;
pub mod ngram;
pub mod shuffle;
pub mod textstats;

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scratch storage at {} failed (estimated need {needed} bytes): {source}", path.display())]
    Storage {
        path: PathBuf,
        needed: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("model error: {0}")]
    Model(String),
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    /// Adapter for `map_err` so IO failures always name the file involved.
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |source| Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
