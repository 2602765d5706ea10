//! BPE merge learning.
//!
//! Greedy trainer over distinct pre-tokens: each round merges the
//! highest-frequency adjacent pair, breaking ties toward the lowest
//! (left id, right id). Pair frequencies count every adjacency (so
//! "aaa" holds two of (a, a)) weighted by pre-token multiplicity, and
//! replacement is left-to-right non-overlapping, matching encoding.
//!
//! Counts live in a map; the heap holds possibly stale snapshots that
//! are re-validated on pop. Adjacencies between two existing ids are
//! only ever destroyed by a merge (created ones involve the fresh id),
//! so a popped entry is at worst an overcount and re-pushing the
//! current value keeps the heap honest.

use std::collections::{BinaryHeap, HashMap, HashSet};

use super::{pre_tokenize, BbpeVocab, SpecialTokens, FIRST_BYTE_ID, FIRST_MERGE_ID};
use crate::{Error, Result};

struct Word {
    ids: Vec<u32>,
    count: u64,
}

#[derive(PartialEq, Eq)]
struct HeapEntry {
    count: u64,
    pair: (u32, u32),
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn replace_pair(ids: &[u32], pair: (u32, u32), new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(ids.len());
    let mut i = 0;
    while i < ids.len() {
        if i + 1 < ids.len() && (ids[i], ids[i + 1]) == pair {
            out.push(new_id);
            i += 2;
        } else {
            out.push(ids[i]);
            i += 1;
        }
    }
    out
}

pub fn train_bbpe<I>(lines: I, vocab_size: usize, specials: SpecialTokens) -> Result<BbpeVocab>
where
    I: IntoIterator<Item = Result<String>>,
{
    specials.validate()?;
    let base = FIRST_MERGE_ID as usize;
    if vocab_size < base {
        return Err(Error::Config(format!(
            "vocab size {vocab_size} is below the {base} tokens needed \
             for {} specials plus the byte alphabet",
            SpecialTokens::COUNT
        )));
    }

    let mut pre_counts: HashMap<Vec<u8>, u64> = HashMap::new();
    for line in lines {
        let line = line?;
        for pre_token in pre_tokenize(line.as_bytes()) {
            *pre_counts.entry(pre_token.to_vec()).or_insert(0) += 1;
        }
    }
    if pre_counts.is_empty() {
        return Err(Error::Input("training corpus is empty".to_string()));
    }
    let mut entries: Vec<(Vec<u8>, u64)> = pre_counts.into_iter().collect();
    entries.sort();
    let mut words: Vec<Word> = entries
        .into_iter()
        .map(|(bytes, count)| Word {
            ids: bytes
                .iter()
                .map(|&b| FIRST_BYTE_ID + u32::from(b))
                .collect(),
            count,
        })
        .collect();

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
    for (wi, word) in words.iter().enumerate() {
        for w in word.ids.windows(2) {
            let pair = (w[0], w[1]);
            *pair_counts.entry(pair).or_insert(0) += word.count;
            pair_words.entry(pair).or_default().insert(wi as u32);
        }
    }
    let mut heap: BinaryHeap<HeapEntry> = pair_counts
        .iter()
        .map(|(&pair, &count)| HeapEntry { count, pair })
        .collect();

    let mut merges: Vec<(u32, u32)> = Vec::with_capacity(vocab_size - base);
    while base + merges.len() < vocab_size {
        let best = loop {
            let Some(entry) = heap.pop() else {
                break None;
            };
            match pair_counts.get(&entry.pair) {
                Some(&current) if current == entry.count => break Some(entry.pair),
                Some(&current) => heap.push(HeapEntry {
                    count: current,
                    pair: entry.pair,
                }),
                None => {}
            }
        };
        let Some(best_pair) = best else {
            log::warn!(
                "pair supply exhausted after {} merges; vocabulary stops at {} tokens \
                 instead of {vocab_size}",
                merges.len(),
                base + merges.len()
            );
            break;
        };

        let new_id = FIRST_MERGE_ID + merges.len() as u32;
        pair_counts.remove(&best_pair);
        let mut affected: Vec<u32> = pair_words
            .remove(&best_pair)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        affected.sort_unstable();

        let mut fresh_pairs: HashSet<(u32, u32)> = HashSet::new();
        let mut delta: HashMap<(u32, u32), i64> = HashMap::new();
        for wi in affected {
            let word = &mut words[wi as usize];
            let new_ids = replace_pair(&word.ids, best_pair, new_id);
            if new_ids.len() == word.ids.len() {
                // Stale index: an earlier merge already destroyed this
                // word's occurrences.
                continue;
            }
            delta.clear();
            for w in word.ids.windows(2) {
                *delta.entry((w[0], w[1])).or_insert(0) -= word.count as i64;
            }
            for w in new_ids.windows(2) {
                *delta.entry((w[0], w[1])).or_insert(0) += word.count as i64;
            }
            for (&pair, &d) in &delta {
                if pair == best_pair || d == 0 {
                    continue;
                }
                if d > 0 {
                    debug_assert!(pair.0 == new_id || pair.1 == new_id);
                    *pair_counts.entry(pair).or_insert(0) += d as u64;
                    pair_words.entry(pair).or_default().insert(wi);
                    fresh_pairs.insert(pair);
                } else {
                    let slot = pair_counts
                        .get_mut(&pair)
                        .expect("decremented pair must be counted");
                    *slot -= (-d) as u64;
                    if *slot == 0 {
                        pair_counts.remove(&pair);
                        pair_words.remove(&pair);
                    }
                }
            }
            word.ids = new_ids;
        }
        for pair in fresh_pairs {
            if let Some(&count) = pair_counts.get(&pair) {
                heap.push(HeapEntry { count, pair });
            }
        }
        merges.push(best_pair);
    }

    BbpeVocab::from_merges(specials, merges)
}
