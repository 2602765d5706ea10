//! Evaluation metrics: macro-F1 over confusion matrices, normalized
//! efficiency (quality x relative throughput), and minimal-pair
//! acceptability accuracy with per-category macro-averaging.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ngram::NgramScorer;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub model: String,
    pub benchmark: String,
    /// Percentage in [0, 100].
    pub macro_f1: f64,
    /// Percentage in [0, 100]; absent when the benchmark reports none.
    #[serde(default)]
    pub accuracy: Option<f64>,
    /// Test samples processed per second; must be positive.
    pub sps: f64,
}

impl BenchmarkResult {
    pub fn validate(&self) -> Result<()> {
        if self.model.is_empty() || self.benchmark.is_empty() {
            return Err(Error::Input(
                "benchmark result with empty model or benchmark name".to_string(),
            ));
        }
        if !(0.0..=100.0).contains(&self.macro_f1) {
            return Err(Error::Input(format!(
                "{}: macro_f1 {} is outside [0, 100]",
                self.model, self.macro_f1
            )));
        }
        if let Some(acc) = self.accuracy {
            if !(0.0..=100.0).contains(&acc) {
                return Err(Error::Input(format!(
                    "{}: accuracy {acc} is outside [0, 100]",
                    self.model
                )));
            }
        }
        if !(self.sps > 0.0) || !self.sps.is_finite() {
            return Err(Error::Input(format!(
                "{}: sps must be positive and finite, got {}",
                self.model, self.sps
            )));
        }
        Ok(())
    }
}

/// Unweighted mean of per-class F1 over a square confusion matrix
/// (rows = actual, columns = predicted), as a percentage.
///
/// A class with zero support and zero predictions contributes F1 = 0
/// unless `skip_empty` excludes such classes from the mean.
pub fn macro_f1(matrix: &[Vec<u64>], skip_empty: bool) -> Result<f64> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Input("confusion matrix is empty".to_string()));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Input(format!(
                "confusion matrix is not square: row {i} has {} columns, expected {n}",
                row.len()
            )));
        }
    }
    if matrix.iter().flatten().all(|&c| c == 0) {
        return Err(Error::Input("confusion matrix is all zeros".to_string()));
    }

    let mut sum = 0.0;
    let mut classes = 0u64;
    for i in 0..n {
        let tp = matrix[i][i];
        let support: u64 = matrix[i].iter().sum();
        let predicted: u64 = matrix.iter().map(|row| row[i]).sum();
        if support == 0 && predicted == 0 {
            if skip_empty {
                continue;
            }
            classes += 1;
            continue;
        }
        let precision = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if support == 0 {
            0.0
        } else {
            tp as f64 / support as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        sum += f1;
        classes += 1;
    }
    debug_assert!(classes > 0, "all-zero matrices were rejected above");
    Ok(100.0 * sum / classes as f64)
}

/// (macro_f1 / 100) x (sps / max sps over the list), per model, in
/// input order. All results must belong to one benchmark.
pub fn norm_eff(results: &[BenchmarkResult]) -> Result<Vec<(String, f64)>> {
    if results.is_empty() {
        return Err(Error::Input(
            "normalized efficiency needs at least one result".to_string(),
        ));
    }
    let benchmark = &results[0].benchmark;
    let mut seen: HashSet<&str> = HashSet::new();
    for r in results {
        r.validate()?;
        if &r.benchmark != benchmark {
            return Err(Error::Input(format!(
                "results mix benchmarks {benchmark:?} and {:?}; \
                 normalized efficiency compares models on one benchmark",
                r.benchmark
            )));
        }
        if !seen.insert(&r.model) {
            return Err(Error::Input(format!(
                "model {:?} appears twice for benchmark {benchmark:?}",
                r.model
            )));
        }
    }
    let max_sps = results.iter().map(|r| r.sps).fold(f64::MIN, f64::max);
    Ok(results
        .iter()
        .map(|r| (r.model.clone(), (r.macro_f1 / 100.0) * (r.sps / max_sps)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalPair {
    pub category: String,
    pub good_text: String,
    pub bad_text: String,
    #[serde(default)]
    pub good_score: Option<f64>,
    #[serde(default)]
    pub bad_score: Option<f64>,
}

impl MinimalPair {
    pub fn validate(&self) -> Result<()> {
        if self.category.is_empty() || self.good_text.is_empty() || self.bad_text.is_empty() {
            return Err(Error::Input(
                "minimal pair with empty category or text".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub category: String,
    pub pairs: u64,
    pub correct: u64,
    /// Percentage.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalPairReport {
    /// First-appearance order.
    pub categories: Vec<CategoryAccuracy>,
    pub pairs: u64,
    /// Unweighted mean of category accuracies, as a percentage.
    pub overall: f64,
}

/// Attaches n-gram scores to every pair, in parallel.
pub fn score_pairs(pairs: &mut [MinimalPair], scorer: &NgramScorer) {
    pairs.par_iter_mut().for_each(|pair| {
        pair.good_score = Some(scorer.score(&pair.good_text));
        pair.bad_score = Some(scorer.score(&pair.bad_text));
    });
}

/// A pair is correct iff good_score > bad_score, strictly; a tie is
/// incorrect. Every pair must carry both scores.
pub fn minimal_pair_eval(pairs: &[MinimalPair]) -> Result<MinimalPairReport> {
    if pairs.is_empty() {
        return Err(Error::Input(
            "minimal-pair evaluation needs at least one pair".to_string(),
        ));
    }
    let mut categories: Vec<CategoryAccuracy> = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        pair.validate()?;
        let (Some(good), Some(bad)) = (pair.good_score, pair.bad_score) else {
            return Err(Error::Input(format!(
                "pair {} (category {:?}, good text {:?}) has no scores attached",
                i + 1,
                pair.category,
                pair.good_text
            )));
        };
        let slot = match categories.iter_mut().find(|c| c.category == pair.category) {
            Some(slot) => slot,
            None => {
                categories.push(CategoryAccuracy {
                    category: pair.category.clone(),
                    pairs: 0,
                    correct: 0,
                    accuracy: 0.0,
                });
                categories.last_mut().expect("just pushed")
            }
        };
        slot.pairs += 1;
        if good > bad {
            slot.correct += 1;
        }
    }
    for c in &mut categories {
        c.accuracy = 100.0 * c.correct as f64 / c.pairs as f64;
    }
    let overall = categories.iter().map(|c| c.accuracy).sum::<f64>() / categories.len() as f64;
    Ok(MinimalPairReport {
        categories,
        pairs: pairs.len() as u64,
        overall,
    })
}

const RESULTS_HEADER: &str = "model\tbenchmark\tmacro_f1\taccuracy\tsps";

/// Tab-separated results with a fixed header; accuracy may be empty
/// or "-" for benchmarks that report none.
pub fn load_results_tsv(path: &Path) -> Result<Vec<BenchmarkResult>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let fail = |lineno: usize, msg: String| {
        Error::Input(format!("{}:{}: {msg}", path.display(), lineno))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        Some((_, header)) => {
            return Err(fail(1, format!(
                "expected header {RESULTS_HEADER:?}, found {header:?}"
            )))
        }
        None => return Err(fail(1, "file is empty".to_string())),
    }
    let mut results = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(fail(lineno, format!("expected 5 columns, found {}", fields.len())));
        }
        let number = |name: &str, s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| fail(lineno, format!("{name} {s:?} is not a number")))
        };
        let accuracy = match fields[3] {
            "" | "-" => None,
            s => Some(number("accuracy", s)?),
        };
        let result = BenchmarkResult {
            model: fields[0].to_string(),
            benchmark: fields[1].to_string(),
            macro_f1: number("macro_f1", fields[2])?,
            accuracy,
            sps: number("sps", fields[4])?,
        };
        result.validate()?;
        results.push(result);
    }
    Ok(results)
}

pub fn load_results_json(path: &Path) -> Result<Vec<BenchmarkResult>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let results: Vec<BenchmarkResult> = serde_json::from_str(&text)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    for r in &results {
        r.validate()?;
    }
    Ok(results)
}

const PAIRS_HEADER: &str = "category\tgood_text\tbad_text";

/// Tab-separated pairs: category, good text, bad text. A first line
/// exactly matching the canonical header is skipped.
pub fn load_pairs_tsv(path: &Path) -> Result<Vec<MinimalPair>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() || (idx == 0 && line == PAIRS_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Input(format!(
                "{}:{}: expected 3 columns, found {}",
                path.display(),
                idx + 1,
                fields.len()
            )));
        }
        let pair = MinimalPair {
            category: fields[0].to_string(),
            good_text: fields[1].to_string(),
            bad_text: fields[2].to_string(),
            good_score: None,
            bad_score: None,
        };
        pair.validate()
            .map_err(|e| Error::Input(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Sidecar scores: one "good TAB bad" row per pair, same order as the
/// pairs file.
pub fn attach_scores_tsv(path: &Path, pairs: &mut [MinimalPair]) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    if rows.len() != pairs.len() {
        return Err(Error::Input(format!(
            "{}: {} score rows for {} pairs",
            path.display(),
            rows.len(),
            pairs.len()
        )));
    }
    for (i, (row, pair)) in rows.iter().zip(pairs.iter_mut()).enumerate() {
        let mut fields = row.split('\t');
        let mut number = || -> Result<f64> {
            fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| {
                    Error::Input(format!(
                        "{}:{}: expected two tab-separated numbers",
                        path.display(),
                        i + 1
                    ))
                })
        };
        pair.good_score = Some(number()?);
        pair.bad_score = Some(number()?);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(model: &str, benchmark: &str, f1: f64, sps: f64) -> BenchmarkResult {
        BenchmarkResult {
            model: model.to_string(),
            benchmark: benchmark.to_string(),
            macro_f1: f1,
            accuracy: None,
            sps,
        }
    }

    #[test]
    fn perfect_diagonal_scores_one_hundred() {
        let m = vec![vec![3, 0, 0], vec![0, 5, 0], vec![0, 0, 2]];
        assert_eq!(macro_f1(&m, false).unwrap(), 100.0);
    }

    #[test]
    fn symmetric_binary_confusion_scores_fifty() {
        let m = vec![vec![1, 1], vec![1, 1]];
        assert_eq!(macro_f1(&m, false).unwrap(), 50.0);
    }

    #[test]
    fn never_predicted_class_matches_hand_computation() {
        // class 0: p = 2/3, r = 1, f1 = 0.8; class 1: p = r = 1/2,
        // f1 = 0.5; class 2: support 1, never predicted, f1 = 0.
        let m = vec![vec![2, 0, 0], vec![1, 1, 0], vec![0, 1, 0]];
        let got = macro_f1(&m, false).unwrap();
        assert!((got - 100.0 * (0.8 + 0.5) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_class_convention_and_skip_flag() {
        let m = vec![vec![4, 0], vec![0, 0]];
        assert_eq!(macro_f1(&m, false).unwrap(), 50.0);
        assert_eq!(macro_f1(&m, true).unwrap(), 100.0);
    }

    #[test]
    fn degenerate_matrices_are_rejected() {
        assert!(macro_f1(&[], false).is_err());
        assert!(macro_f1(&[vec![0, 0], vec![0, 0]], false).is_err());
        assert!(macro_f1(&[vec![1, 0], vec![0]], false).is_err());
    }

    #[test]
    fn label_permutation_leaves_macro_f1_unchanged() {
        let m = vec![vec![5, 2, 0], vec![1, 3, 1], vec![0, 2, 4]];
        // Swap classes 0 and 2 in both rows and columns.
        let p = vec![vec![4, 2, 0], vec![1, 3, 1], vec![0, 2, 5]];
        let a = macro_f1(&m, false).unwrap();
        let b = macro_f1(&p, false).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn max_sps_model_scores_f1_over_one_hundred() {
        let results = vec![
            result("model_01", "task_a", 94.44, 668.26),
            result("model_02", "task_a", 95.67, 413.68),
        ];
        let scores = norm_eff(&results).unwrap();
        assert_eq!(scores[0].0, "model_01");
        assert!((scores[0].1 - 0.9444).abs() < 1e-12);
        assert!(scores[1].1 < scores[0].1);
    }

    #[test]
    fn single_result_scores_f1_over_one_hundred() {
        let scores = norm_eff(&[result("model_01", "task_a", 80.0, 123.0)]).unwrap();
        assert!((scores[0].1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn common_sps_scaling_leaves_scores_unchanged() {
        let base = vec![
            result("model_01", "task_a", 90.0, 100.0),
            result("model_02", "task_a", 70.0, 250.0),
        ];
        let scaled: Vec<BenchmarkResult> = base
            .iter()
            .map(|r| result(&r.model, &r.benchmark, r.macro_f1, r.sps * 7.0))
            .collect();
        let a = norm_eff(&base).unwrap();
        let b = norm_eff(&scaled).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_benchmarks_and_duplicates_are_rejected() {
        let mixed = vec![
            result("model_01", "task_a", 90.0, 10.0),
            result("model_02", "task_b", 90.0, 10.0),
        ];
        assert!(norm_eff(&mixed).is_err());
        let duplicated = vec![
            result("model_01", "task_a", 90.0, 10.0),
            result("model_01", "task_a", 80.0, 20.0),
        ];
        assert!(norm_eff(&duplicated).is_err());
        assert!(norm_eff(&[]).is_err());
    }

    fn pair(category: &str, good: f64, bad: f64) -> MinimalPair {
        MinimalPair {
            category: category.to_string(),
            good_text: "اچھا جملہ".to_string(),
            bad_text: "جملہ برا".to_string(),
            good_score: Some(good),
            bad_score: Some(bad),
        }
    }

    #[test]
    fn strict_comparison_decides_pairs() {
        let report = minimal_pair_eval(&[pair("agr", -5.0, -7.0)]).unwrap();
        assert_eq!(report.overall, 100.0);
        let report = minimal_pair_eval(&[pair("agr", -5.0, -5.0)]).unwrap();
        assert_eq!(report.overall, 0.0);
    }

    #[test]
    fn overall_is_the_unweighted_category_mean() {
        let pairs = vec![
            pair("agr", 1.0, 0.0),
            pair("agr", 2.0, 0.0),
            pair("order", 1.0, 0.0),
            pair("order", 0.0, 1.0),
        ];
        let report = minimal_pair_eval(&pairs).unwrap();
        assert_eq!(report.categories.len(), 2);
        assert_eq!(report.categories[0].category, "agr");
        assert_eq!(report.categories[0].accuracy, 100.0);
        assert_eq!(report.categories[1].accuracy, 50.0);
        assert_eq!(report.overall, 75.0);
        assert_eq!(report.pairs, 4);
    }

    #[test]
    fn unscored_pair_error_identifies_the_pair() {
        let mut unscored = pair("agr", 0.0, 0.0);
        unscored.good_score = None;
        let err = minimal_pair_eval(&[pair("agr", 1.0, 0.0), unscored]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pair 2"));
        assert!(msg.contains("agr"));
    }

    #[test]
    fn category_order_follows_first_appearance() {
        let pairs = vec![
            pair("z_last", 1.0, 0.0),
            pair("a_first", 1.0, 0.0),
            pair("z_last", 1.0, 0.0),
        ];
        let report = minimal_pair_eval(&pairs).unwrap();
        let names: Vec<&str> = report.categories.iter().map(|c| c.category.as_str()).collect();
        assert_eq!(names, vec!["z_last", "a_first"]);
    }

    #[test]
    fn results_tsv_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.tsv");
        std::fs::write(
            &path,
            "model\tbenchmark\tmacro_f1\taccuracy\tsps\n\
             model_01\ttask_a\t94.44\t-\t668.26\n\
             model_02\ttask_a\t95.67\t91.2\t413.68\n",
        )
        .unwrap();
        let results = load_results_tsv(&path).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].accuracy, None);
        assert_eq!(results[1].accuracy, Some(91.2));
        assert_eq!(results[1].sps, 413.68);

        std::fs::write(&path, "wrong\theader\n").unwrap();
        assert!(load_results_tsv(&path).is_err());
        std::fs::write(
            &path,
            "model\tbenchmark\tmacro_f1\taccuracy\tsps\nmodel_01\ttask_a\t101\t-\t5\n",
        )
        .unwrap();
        assert!(load_results_tsv(&path).is_err());
    }

    #[test]
    fn pairs_tsv_loads_with_or_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.tsv");
        let body = "agr\tیہ اچھا ہے\tیہ برا ہوں\n";
        std::fs::write(&path, format!("category\tgood_text\tbad_text\n{body}")).unwrap();
        let with_header = load_pairs_tsv(&path).unwrap();
        std::fs::write(&path, body).unwrap();
        let without = load_pairs_tsv(&path).unwrap();
        assert_eq!(with_header, without);
        assert_eq!(with_header.len(), 1);
        assert_eq!(with_header[0].category, "agr");
        assert_eq!(with_header[0].good_score, None);
    }

    #[test]
    fn score_sidecar_attaches_in_order() {
        let mut pairs = vec![pair("agr", 0.0, 0.0), pair("order", 0.0, 0.0)];
        for p in &mut pairs {
            p.good_score = None;
            p.bad_score = None;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.tsv");
        std::fs::write(&path, "-1.5\t-2.5\n-3\t-1\n").unwrap();
        attach_scores_tsv(&path, &mut pairs).unwrap();
        assert_eq!(pairs[0].good_score, Some(-1.5));
        assert_eq!(pairs[1].bad_score, Some(-1.0));

        std::fs::write(&path, "-1.5\t-2.5\n").unwrap();
        assert!(attach_scores_tsv(&path, &mut pairs).is_err());
    }

    #[test]
    fn ngram_scoring_fills_every_pair() {
        let scorer = crate::ngram::NgramScorer::train(
            ["یہ ایک اچھا جملہ ہے"].iter().map(|l| Ok(l.to_string())),
            3,
            0.01,
        )
        .unwrap();
        let mut pairs = vec![pair("agr", 0.0, 0.0)];
        pairs[0].good_score = None;
        pairs[0].bad_score = None;
        score_pairs(&mut pairs, &scorer);
        assert!(pairs[0].good_score.is_some());
        assert!(pairs[0].bad_score.is_some());
        assert!(minimal_pair_eval(&pairs).is_ok());
    }
}
