//! Character n-gram language model scoring.
//!
//! Desk-scale stand-in for a masked-LM pseudo-log-likelihood: an add-k
//! smoothed character model good enough to rank a grammatical string
//! above a scrambled one on toy data. Probabilities for a context are
//! normalized over the training alphabet, so they sum to 1; characters
//! never seen in training fall back to the same smoothed floor.

use std::collections::{BTreeSet, HashMap};

use crate::{Error, Result};

pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_K: f64 = 0.01;

/// Start-of-text padding for the first n-1 positions.
const BOS: char = '\u{2}';

#[derive(Debug, Clone)]
struct ContextCounts {
    next: HashMap<char, u64>,
    total: u64,
}

#[derive(Debug, Clone)]
pub struct NgramScorer {
    order: usize,
    k: f64,
    alphabet: BTreeSet<char>,
    contexts: HashMap<Vec<char>, ContextCounts>,
}

impl NgramScorer {
    pub fn train<I>(lines: I, order: usize, k: f64) -> Result<Self>
    where
        I: IntoIterator<Item = Result<String>>,
    {
        if order == 0 {
            return Err(Error::Config("n-gram order must be at least 1".to_string()));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config(format!(
                "smoothing constant must be a positive finite number, got {k}"
            )));
        }
        let mut scorer = NgramScorer {
            order,
            k,
            alphabet: BTreeSet::new(),
            contexts: HashMap::new(),
        };
        let mut padded: Vec<char> = Vec::new();
        for line in lines {
            let line = line?;
            padded.clear();
            padded.extend(std::iter::repeat(BOS).take(order - 1));
            padded.extend(line.chars());
            for i in 0..padded.len() - (order - 1) {
                let next = padded[i + order - 1];
                scorer.alphabet.insert(next);
                let entry = scorer
                    .contexts
                    .entry(padded[i..i + order - 1].to_vec())
                    .or_insert_with(|| ContextCounts {
                        next: HashMap::new(),
                        total: 0,
                    });
                *entry.next.entry(next).or_insert(0) += 1;
                entry.total += 1;
            }
        }
        if scorer.alphabet.is_empty() {
            return Err(Error::Input("training corpus is empty".to_string()));
        }
        Ok(scorer)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    /// (count(ctx, c) + k) / (total(ctx) + k * |alphabet|); an unseen
    /// context degrades to the uniform 1 / |alphabet|.
    fn prob(&self, context: &[char], c: char) -> f64 {
        let (count, total) = match self.contexts.get(context) {
            Some(entry) => (entry.next.get(&c).copied().unwrap_or(0), entry.total),
            None => (0, 0),
        };
        (count as f64 + self.k) / (total as f64 + self.k * self.alphabet.len() as f64)
    }

    /// Sum of ln P(char | previous n-1 chars) over every position;
    /// the empty string scores 0.
    pub fn score(&self, text: &str) -> f64 {
        let padded: Vec<char> = std::iter::repeat(BOS)
            .take(self.order - 1)
            .chain(text.chars())
            .collect();
        let mut total = 0.0;
        for i in 0..padded.len() - (self.order - 1) {
            let context = &padded[i..i + self.order - 1];
            total += self.prob(context, padded[i + self.order - 1]).ln();
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train(lines: &[&str], order: usize, k: f64) -> NgramScorer {
        NgramScorer::train(lines.iter().map(|l| Ok(l.to_string())), order, k).unwrap()
    }

    #[test]
    fn empty_text_scores_zero() {
        let scorer = train(&["اردو"], 5, 0.01);
        assert_eq!(scorer.score(""), 0.0);
    }

    #[test]
    fn unigram_scores_add_over_concatenation() {
        let scorer = train(&["ab ba aab"], 1, 0.01);
        let joint = scorer.score("ab");
        let split = scorer.score("a") + scorer.score("b");
        assert_eq!(joint, split);
    }

    #[test]
    fn context_probabilities_sum_to_one() {
        let scorer = train(&["اردو زبان", "اردو متن", "abc"], 3, 0.01);
        for context in scorer.contexts.keys() {
            let sum: f64 = scorer
                .alphabet
                .iter()
                .map(|&c| scorer.prob(context, c))
                .sum();
            assert!((sum - 1.0).abs() < 1e-9, "context {context:?} sums to {sum}");
        }
    }

    #[test]
    fn unseen_context_is_uniform_over_alphabet() {
        let scorer = train(&["abc"], 3, 0.01);
        let uniform = 1.0 / scorer.alphabet_size() as f64;
        let p = scorer.prob(&['z', 'z'], 'a');
        assert!((p - uniform).abs() < 1e-12);
    }

    #[test]
    fn unseen_character_gets_the_smoothed_floor() {
        let scorer = train(&["aaab"], 2, 0.01);
        let p_common = scorer.prob(&['a'], 'a');
        let p_rare = scorer.prob(&['a'], 'z');
        assert!(p_common > p_rare);
        assert!(p_rare > 0.0);
    }

    #[test]
    fn training_string_outscores_a_scramble() {
        let text = "یہ ایک صاف جملہ ہے";
        let scorer = train(&[text], 5, 0.01);
        let scrambled: String = text.chars().rev().collect();
        assert!(scorer.score(text) > scorer.score(&scrambled));
    }

    #[test]
    fn degenerate_parameters_are_rejected() {
        let lines = |v: &[&str]| v.iter().map(|l| Ok(l.to_string())).collect::<Vec<_>>();
        assert!(NgramScorer::train(lines(&["x"]), 0, 0.01).is_err());
        assert!(NgramScorer::train(lines(&["x"]), 2, 0.0).is_err());
        assert!(NgramScorer::train(lines(&["x"]), 2, f64::NAN).is_err());
        assert!(NgramScorer::train(lines(&[]), 2, 0.01).is_err());
        assert!(NgramScorer::train(lines(&["", ""]), 2, 0.01).is_err());
    }

    #[test]
    fn scoring_is_deterministic() {
        let s1 = train(&["اردو زبان کا متن"], 4, 0.01);
        let s2 = train(&["اردو زبان کا متن"], 4, 0.01);
        let text = "زبان کا";
        assert_eq!(s1.score(text), s2.score(text));
    }
}
