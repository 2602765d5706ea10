//! Property tests for embeddings, sentence vectors, and the centroid.

use proptest::prelude::*;
use saaf_core::embed::{
    cosine_sim, load_centroid, load_model, reference_centroid, save_centroid, save_model,
    train_embeddings, EmbeddingHyperparams, EmbeddingModel, TrainSource,
};

fn small_hyperparams(seed: u64) -> EmbeddingHyperparams {
    EmbeddingHyperparams {
        dimension: 16,
        window: 3,
        negative_samples: 3,
        epochs: 2,
        min_word_count: 1,
        subword_ngram_min: 3,
        subword_ngram_max: 5,
        bucket_count: 1_000,
        learning_rate: 0.05,
        seed,
    }
}

fn topic_corpus() -> Vec<String> {
    let words = ["دریا", "پانی", "کشتی", "ساحل", "موج", "طوفان"];
    (0..60)
        .map(|i| {
            format!(
                "{} {} {}",
                words[i % 6],
                words[(i + 1) % 6],
                words[(i + 3) % 6]
            )
        })
        .collect()
}

fn trained() -> EmbeddingModel {
    train_embeddings(&TrainSource::Memory(&topic_corpus()), &small_hyperparams(7)).unwrap()
}

proptest! {
    #[test]
    fn cosine_self_similarity_is_one(v in prop::collection::vec(-100.0f64..100.0, 1..20)) {
        prop_assume!(v.iter().any(|&x| x.abs() > 1e-6));
        let sim = cosine_sim(&v, &v).unwrap();
        prop_assert!((sim - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cosine_is_scale_invariant(
        (v, w) in (2usize..12).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        }),
        alpha in 0.001f64..1000.0,
    ) {
        prop_assume!(v.iter().any(|&x| x.abs() > 1e-6));
        prop_assume!(w.iter().any(|&x| x.abs() > 1e-6));
        let scaled: Vec<f64> = v.iter().map(|x| x * alpha).collect();
        let a = cosine_sim(&v, &w).unwrap();
        let b = cosine_sim(&scaled, &w).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn sentence_vector_ignores_token_order(perm in prop::sample::subsequence(vec![0usize, 1, 2, 3, 4, 5], 6)) {
        prop_assume!(!perm.is_empty());
        let model = trained();
        let words = ["دریا", "پانی", "کشتی", "ساحل", "موج", "طوفان"];
        let forward: Vec<&str> = perm.iter().map(|&i| words[i]).collect();
        let backward: Vec<&str> = perm.iter().rev().map(|&i| words[i]).collect();
        let a = model.sentence_vector(&forward.join(" "));
        let b = model.sentence_vector(&backward.join(" "));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn centroid_equals_the_brute_force_mean() {
    let model = trained();
    let lines = topic_corpus();
    // Sample capacity exceeds the corpus, so every line participates
    // in file order and the mean must match a direct summation.
    let centroid = reference_centroid(&model, lines.iter().map(|l| Ok(l.clone())), 1000, 3).unwrap();
    assert_eq!(centroid.sample_size, lines.len() as u64);

    let d = model.hyperparams().dimension;
    let mut mean = vec![0.0f64; d];
    for line in &lines {
        for (slot, x) in mean.iter_mut().zip(model.sentence_vector(line)) {
            *slot += x;
        }
    }
    for slot in &mut mean {
        *slot /= lines.len() as f64;
    }
    for (a, b) in centroid.vector.iter().zip(&mean) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn centroid_sampling_is_seed_deterministic() {
    let model = trained();
    let lines: Vec<String> = (0..500).map(|i| format!("سطر {} {}", i, i % 7)).collect();
    let run = |seed: u64| {
        reference_centroid(&model, lines.iter().map(|l| Ok(l.clone())), 100, seed).unwrap()
    };
    let a = run(9);
    let b = run(9);
    assert_eq!(a.vector, b.vector);
    assert_eq!(a.sample_size, 100u64);
    let c = run(10);
    assert_ne!(a.vector, c.vector);
}

#[test]
fn model_file_round_trip_preserves_scores() {
    let model = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    for text in ["دریا پانی", "کشتی", "انجان لفظ", ""] {
        assert_eq!(model.sentence_vector(text), loaded.sentence_vector(text));
    }
    assert_eq!(model.vocab().len(), loaded.vocab().len());
}

#[test]
fn centroid_file_round_trip_preserves_similarity() {
    let model = trained();
    let lines = topic_corpus();
    let centroid =
        reference_centroid(&model, lines.iter().map(|l| Ok(l.clone())), 50, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("centroid.txt");
    save_centroid(&centroid, &path).unwrap();
    let loaded = load_centroid(&path).unwrap();
    assert_eq!(centroid.vector, loaded.vector);
    let v = model.sentence_vector("دریا کشتی");
    assert_eq!(
        cosine_sim(&v, &centroid.vector).unwrap(),
        cosine_sim(&v, &loaded.vector).unwrap()
    );
}

#[test]
fn two_topic_corpus_separates_in_similarity() {
    // Disjoint token sets that co-occur only within their own topic;
    // within-topic similarity should beat cross-topic on average.
    let water = ["دریا", "پانی", "کشتی", "ساحل"];
    let sky = ["ستارہ", "چاند", "سورج", "بادل"];
    let mut lines = Vec::new();
    for i in 0..120 {
        lines.push(format!(
            "{} {} {}",
            water[i % 4],
            water[(i + 1) % 4],
            water[(i + 2) % 4]
        ));
        lines.push(format!(
            "{} {} {}",
            sky[i % 4],
            sky[(i + 1) % 4],
            sky[(i + 3) % 4]
        ));
    }
    let model =
        train_embeddings(&TrainSource::Memory(&lines), &small_hyperparams(21)).unwrap();
    let sim = |a: &str, b: &str| {
        cosine_sim(&model.sentence_vector(a), &model.sentence_vector(b)).unwrap()
    };
    let mut within = 0.0;
    let mut across = 0.0;
    let mut n = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                within += sim(water[i], water[j]) + sim(sky[i], sky[j]);
                n += 2.0;
            }
            across += sim(water[i], sky[j]);
        }
    }
    assert!(
        within / n > across / 16.0,
        "within {} vs across {}",
        within / n,
        across / 16.0
    );
}
