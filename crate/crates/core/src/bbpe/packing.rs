//! Sentence-boundary-preserving sequence packing statistics.
//!
//! Documents are split into sentences, sentences are packed whole into
//! fixed-size windows (streaming across document boundaries), and only
//! a sentence longer than the window itself is truncated, alone and
//! counted. Sentence splits land on pre-token boundaries (the enders
//! are non-whitespace and the split sits where whitespace follows), so
//! per-sentence token counts sum exactly to the document's count.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{pre_tokenize, BbpeVocab};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PackingConfig {
    pub window: usize,
}

impl Default for PackingConfig {
    fn default() -> Self {
        PackingConfig { window: 512 }
    }
}

impl PackingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("packing window must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Nearest-rank percentiles over per-document token counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TokenDistribution {
    pub min: u64,
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub documents: u64,
    pub total_tokens: u64,
    /// Whitespace-separated words across the corpus.
    pub total_words: u64,
    pub mean_tokens_per_document: f64,
    pub tokens_per_document: TokenDistribution,
    /// total_tokens / total_words; 0 when the corpus has no words.
    pub fertility: f64,
    pub window: usize,
    pub sequences_produced: u64,
    pub non_pad_positions: u64,
    /// non_pad / (sequences x window); vacuously 1 with no sequences.
    pub packing_efficiency: f64,
    pub truncated_sentences: u64,
    pub tokens_truncated_away: u64,
}

/// Splits after any of "۔", "؟", "!", "." when ASCII whitespace
/// follows; the whitespace opens the next sentence. Concatenating the
/// sentences reproduces the document.
pub fn split_sentences(text: &str) -> Vec<&str> {
    const ENDERS: [char; 4] = ['۔', '؟', '!', '.'];
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if ENDERS.contains(&c) {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_ascii_whitespace() {
                    let end = i + c.len_utf8();
                    out.push(&text[start..end]);
                    start = end;
                }
            }
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out
}

struct Packer {
    window: u64,
    fill: u64,
    sequences: u64,
    non_pad: u64,
    truncated_sentences: u64,
    tokens_truncated_away: u64,
}

impl Packer {
    fn new(window: u64) -> Self {
        Packer {
            window,
            fill: 0,
            sequences: 0,
            non_pad: 0,
            truncated_sentences: 0,
            tokens_truncated_away: 0,
        }
    }

    fn push_sentence(&mut self, tokens: u64) {
        if tokens == 0 {
            return;
        }
        if tokens > self.window {
            self.close();
            self.sequences += 1;
            self.non_pad += self.window;
            self.truncated_sentences += 1;
            self.tokens_truncated_away += tokens - self.window;
        } else if self.fill + tokens <= self.window {
            self.fill += tokens;
        } else {
            self.close();
            self.fill = tokens;
        }
    }

    fn close(&mut self) {
        if self.fill > 0 {
            self.sequences += 1;
            self.non_pad += self.fill;
            self.fill = 0;
        }
    }
}

fn percentile(sorted: &[u64], q: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as u64).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

fn pre_token_count(
    vocab: &BbpeVocab,
    cache: &mut HashMap<Box<[u8]>, u64>,
    scratch: &mut Vec<u32>,
    pre_token: &[u8],
) -> u64 {
    if let Some(&count) = cache.get(pre_token) {
        return count;
    }
    scratch.clear();
    vocab.merge_pre_token(pre_token, scratch);
    let count = scratch.len() as u64;
    cache.insert(pre_token.into(), count);
    count
}

/// Tokenizes a one-document-per-line corpus and reports exact token,
/// fertility, and packing statistics for the given window.
pub fn corpus_token_stats<I>(
    vocab: &BbpeVocab,
    lines: I,
    config: &PackingConfig,
) -> Result<TokenStats>
where
    I: IntoIterator<Item = Result<String>>,
{
    config.validate()?;
    let mut cache: HashMap<Box<[u8]>, u64> = HashMap::new();
    let mut scratch: Vec<u32> = Vec::new();
    let mut doc_tokens: Vec<u64> = Vec::new();
    let mut total_words = 0u64;
    let mut packer = Packer::new(config.window as u64);

    for line in lines {
        let line = line?;
        total_words += line.split_ascii_whitespace().count() as u64;
        let mut doc_total = 0u64;
        for sentence in split_sentences(&line) {
            let mut sentence_tokens = 0u64;
            for pre_token in pre_tokenize(sentence.as_bytes()) {
                sentence_tokens += pre_token_count(vocab, &mut cache, &mut scratch, pre_token);
            }
            doc_total += sentence_tokens;
            packer.push_sentence(sentence_tokens);
        }
        doc_tokens.push(doc_total);
    }
    packer.close();

    let documents = doc_tokens.len() as u64;
    let total_tokens: u64 = doc_tokens.iter().sum();
    debug_assert_eq!(
        packer.non_pad,
        total_tokens - packer.tokens_truncated_away,
        "packed positions must account for every non-truncated token"
    );
    doc_tokens.sort_unstable();
    let distribution = TokenDistribution {
        min: doc_tokens.first().copied().unwrap_or(0),
        p50: percentile(&doc_tokens, 50),
        p90: percentile(&doc_tokens, 90),
        p99: percentile(&doc_tokens, 99),
        max: doc_tokens.last().copied().unwrap_or(0),
    };

    Ok(TokenStats {
        documents,
        total_tokens,
        total_words,
        mean_tokens_per_document: if documents == 0 {
            0.0
        } else {
            total_tokens as f64 / documents as f64
        },
        tokens_per_document: distribution,
        fertility: if total_words == 0 {
            0.0
        } else {
            total_tokens as f64 / total_words as f64
        },
        window: config.window,
        sequences_produced: packer.sequences,
        non_pad_positions: packer.non_pad,
        packing_efficiency: if packer.sequences == 0 {
            1.0
        } else {
            packer.non_pad as f64 / (packer.sequences * packer.window) as f64
        },
        truncated_sentences: packer.truncated_sentences,
        tokens_truncated_away: packer.tokens_truncated_away,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbpe::SpecialTokens;

    fn raw_vocab() -> BbpeVocab {
        BbpeVocab::from_merges(SpecialTokens::default(), Vec::new()).unwrap()
    }

    fn stats(lines: &[&str], window: usize) -> TokenStats {
        corpus_token_stats(
            &raw_vocab(),
            lines.iter().map(|l| Ok(l.to_string())),
            &PackingConfig { window },
        )
        .unwrap()
    }

    #[test]
    fn sentences_split_after_enders_followed_by_whitespace() {
        assert_eq!(split_sentences("اب۔ دو"), vec!["اب۔", " دو"]);
        assert_eq!(split_sentences("ایک؟ دو! تین"), vec!["ایک؟", " دو!", " تین"]);
        assert_eq!(split_sentences("a.b"), vec!["a.b"]);
        assert_eq!(split_sentences("end."), vec!["end."]);
        assert_eq!(split_sentences(""), Vec::<&str>::new());
        for text in ["اب۔ دو۔ ", "x. y. z", "۔ ۔ "] {
            assert_eq!(split_sentences(text).concat(), text);
        }
    }

    #[test]
    fn exact_window_documents_pack_perfectly() {
        let s = stats(&["aaaaaaaa", "bbbbbbbb"], 8);
        assert_eq!(s.sequences_produced, 2);
        assert_eq!(s.packing_efficiency, 1.0);
        assert_eq!(s.non_pad_positions, 16);
        assert_eq!(s.truncated_sentences, 0);
    }

    #[test]
    fn single_small_document_efficiency_is_fractional() {
        let s = stats(&["aaaaaaaaaa"], 512);
        assert_eq!(s.sequences_produced, 1);
        assert!((s.packing_efficiency - 10.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn packing_streams_across_document_boundaries() {
        let s = stats(&["aaa", "bbb"], 10);
        assert_eq!(s.sequences_produced, 1);
        assert_eq!(s.non_pad_positions, 6);
        assert!((s.packing_efficiency - 0.6).abs() < 1e-15);
    }

    #[test]
    fn oversize_sentence_is_truncated_alone() {
        let s = stats(&["aa", "bbbbbbbb"], 4);
        assert_eq!(s.sequences_produced, 2);
        assert_eq!(s.non_pad_positions, 6);
        assert_eq!(s.truncated_sentences, 1);
        assert_eq!(s.tokens_truncated_away, 4);
        assert_eq!(s.non_pad_positions, s.total_tokens - s.tokens_truncated_away);
    }

    #[test]
    fn sentence_boundaries_open_fresh_packing_decisions() {
        // 10 byte tokens on one line ("۔" is two bytes); unsplit it
        // would overflow a 6-token window, but the sentences "aaaa۔"
        // (6) and " bbb" (4) pack whole with no truncation.
        let s = stats(&["aaaa۔ bbb"], 6);
        assert_eq!(s.truncated_sentences, 0);
        assert_eq!(s.sequences_produced, 2);
        assert_eq!(s.total_tokens, 10);
        assert_eq!(s.non_pad_positions, 10);
    }

    #[test]
    fn fertility_counts_tokens_per_whitespace_word() {
        let s = stats(&["ab cd"], 512);
        assert_eq!(s.total_words, 2);
        assert_eq!(s.total_tokens, 5);
        assert!((s.fertility - 2.5).abs() < 1e-15);
    }

    #[test]
    fn empty_corpus_reports_identity_values() {
        let s = stats(&[], 512);
        assert_eq!(s.documents, 0);
        assert_eq!(s.sequences_produced, 0);
        assert_eq!(s.packing_efficiency, 1.0);
        assert_eq!(s.fertility, 0.0);
        assert_eq!(s.tokens_per_document, TokenDistribution::default());
    }

    #[test]
    fn distribution_uses_nearest_rank_percentiles() {
        let lines: Vec<String> = (1..=100).map(|k| "a".repeat(k)).collect();
        let s = corpus_token_stats(
            &raw_vocab(),
            lines.iter().map(|l| Ok(l.clone())),
            &PackingConfig { window: 512 },
        )
        .unwrap();
        assert_eq!(s.tokens_per_document.min, 1);
        assert_eq!(s.tokens_per_document.p50, 50);
        assert_eq!(s.tokens_per_document.p90, 90);
        assert_eq!(s.tokens_per_document.p99, 99);
        assert_eq!(s.tokens_per_document.max, 100);
        assert!((s.mean_tokens_per_document - 50.5).abs() < 1e-12);
    }
}
