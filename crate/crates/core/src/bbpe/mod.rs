//! Byte-level BPE tokenization.
//!
//! The base alphabet is the 256 byte values, so any input round-trips
//! exactly, valid UTF-8 or not. Ids are laid out as: special tokens
//! first (0..5, in the order begin/pad/end/unknown/mask), then the 256
//! byte tokens (id = 5 + byte value), then learned merges in priority
//! order. Text is pre-tokenized on ASCII whitespace with each run
//! attached as a prefix of the following pre-token; a trailing run
//! becomes its own pre-token so concatenation stays lossless.

mod io;
mod packing;
mod train;

pub use io::{load_vocab, save_vocab};
pub use packing::{
    corpus_token_stats, split_sentences, PackingConfig, TokenDistribution, TokenStats,
};
pub use train::train_bbpe;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const BEGIN_ID: u32 = 0;
pub const PAD_ID: u32 = 1;
pub const END_ID: u32 = 2;
pub const UNKNOWN_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

/// First byte token; byte `b` has id `FIRST_BYTE_ID + b`.
pub const FIRST_BYTE_ID: u32 = SpecialTokens::COUNT as u32;
/// First learned merge token.
pub const FIRST_MERGE_ID: u32 = FIRST_BYTE_ID + 256;

/// Vocabulary sizes used by the standard ablation grid.
pub const VOCAB_PRESETS: [usize; 3] = [32_000, 52_000, 96_000];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpecialTokens {
    pub begin: String,
    pub pad: String,
    pub end: String,
    pub unknown: String,
    pub mask: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        SpecialTokens {
            begin: "<s>".to_string(),
            pad: "<pad>".to_string(),
            end: "</s>".to_string(),
            unknown: "<unk>".to_string(),
            mask: "<mask>".to_string(),
        }
    }
}

impl SpecialTokens {
    pub const COUNT: usize = 5;

    /// (role, name) pairs in reserved-id order.
    pub fn roles(&self) -> [(&'static str, &str); Self::COUNT] {
        [
            ("begin", &self.begin),
            ("pad", &self.pad),
            ("end", &self.end),
            ("unknown", &self.unknown),
            ("mask", &self.mask),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.roles();
        for (role, name) in names {
            if name.is_empty() {
                return Err(Error::Config(format!("special token {role} is empty")));
            }
        }
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                if names[i].1 == names[j].1 {
                    return Err(Error::Config(format!(
                        "special tokens {} and {} share the name {:?}",
                        names[i].0, names[j].0, names[i].1
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbpeVocab {
    specials: SpecialTokens,
    /// Byte sequence per id; specials decode to nothing and sit at the
    /// front as empty entries.
    tokens: Vec<Vec<u8>>,
    merges: Vec<(u32, u32)>,
    /// (left, right) -> merged id; rank is implicit in the id.
    pair_to_merged: HashMap<(u32, u32), u32>,
}

impl BbpeVocab {
    /// Builds the full token table from a merge list, checking that it
    /// is a valid derivation (every merge references earlier ids).
    pub fn from_merges(specials: SpecialTokens, merges: Vec<(u32, u32)>) -> Result<Self> {
        specials.validate()?;
        let mut tokens: Vec<Vec<u8>> =
            Vec::with_capacity(FIRST_MERGE_ID as usize + merges.len());
        for _ in 0..FIRST_BYTE_ID {
            tokens.push(Vec::new());
        }
        for b in 0..=255u8 {
            tokens.push(vec![b]);
        }
        let mut pair_to_merged = HashMap::with_capacity(merges.len());
        for (i, &(left, right)) in merges.iter().enumerate() {
            let new_id = FIRST_MERGE_ID + i as u32;
            for side in [left, right] {
                if side < FIRST_BYTE_ID || side >= new_id {
                    return Err(Error::Model(format!(
                        "merge {i} ({left}, {right}) references id {side}, \
                         which is not an earlier byte or merge token"
                    )));
                }
            }
            if pair_to_merged.insert((left, right), new_id).is_some() {
                return Err(Error::Model(format!(
                    "merge {i} repeats the pair ({left}, {right})"
                )));
            }
            let mut bytes = tokens[left as usize].clone();
            bytes.extend_from_slice(&tokens[right as usize]);
            tokens.push(bytes);
        }
        Ok(BbpeVocab {
            specials,
            tokens,
            merges,
            pair_to_merged,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.tokens.get(id as usize).map(Vec::as_slice)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.encode_bytes(text.as_bytes())
    }

    pub fn encode_bytes(&self, bytes: &[u8]) -> Vec<u32> {
        let mut out = Vec::new();
        for pre_token in pre_tokenize(bytes) {
            self.merge_pre_token(pre_token, &mut out);
        }
        out
    }

    /// Applies the merge list to one pre-token, earliest-learned merge
    /// first. Merging never uncovers a lower-ranked pair (a new pair
    /// involves the freshly created id, and every merge consuming that
    /// id was learned later), so taking the minimum merged id each
    /// round applies merges in exact priority order.
    fn merge_pre_token(&self, pre_token: &[u8], out: &mut Vec<u32>) {
        let start = out.len();
        out.extend(
            pre_token
                .iter()
                .map(|&b| FIRST_BYTE_ID + u32::from(b)),
        );
        if self.merges.is_empty() {
            return;
        }
        let ids = &mut out[start..];
        let mut len = ids.len();
        loop {
            let mut best: Option<((u32, u32), u32)> = None;
            for w in 0..len.saturating_sub(1) {
                let pair = (ids[w], ids[w + 1]);
                if let Some(&merged) = self.pair_to_merged.get(&pair) {
                    if best.map_or(true, |(_, m)| merged < m) {
                        best = Some((pair, merged));
                    }
                }
            }
            let Some((pair, merged)) = best else { break };
            // Left-to-right, non-overlapping replacement.
            let mut write = 0;
            let mut read = 0;
            while read < len {
                if read + 1 < len && (ids[read], ids[read + 1]) == pair {
                    ids[write] = merged;
                    read += 2;
                } else {
                    ids[write] = ids[read];
                    read += 1;
                }
                write += 1;
            }
            len = write;
        }
        out.truncate(start + len);
    }

    /// Concatenates token byte sequences; special ids decode to nothing.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in ids {
            match self.tokens.get(id as usize) {
                Some(bytes) => out.extend_from_slice(bytes),
                None => {
                    return Err(Error::Input(format!(
                        "token id {id} is out of range for a vocabulary of {}",
                        self.tokens.len()
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// Splits bytes into pre-tokens: each run of ASCII whitespace is glued
/// to the non-whitespace run that follows it; a trailing whitespace run
/// stands alone. Concatenating the pre-tokens reproduces the input.
pub fn pre_tokenize(bytes: &[u8]) -> PreTokens<'_> {
    PreTokens { rest: bytes }
}

pub struct PreTokens<'a> {
    rest: &'a [u8],
}

impl<'a> Iterator for PreTokens<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.rest.is_empty() {
            return None;
        }
        let mut end = 0;
        while end < self.rest.len() && self.rest[end].is_ascii_whitespace() {
            end += 1;
        }
        while end < self.rest.len() && !self.rest[end].is_ascii_whitespace() {
            end += 1;
        }
        let (token, rest) = self.rest.split_at(end);
        self.rest = rest;
        Some(token)
    }
}
