//! Black-box tests driving the compiled binary: exit codes, the JSON
//! error record on stderr, report files, and small end-to-end runs in
//! a throwaway workspace.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const TOPIC: [&str; 10] = [
    "طوفان", "بادل", "دریا", "بارش", "ساحل", "سمندر", "کشتی", "پانی", "ہوا", "موج",
];

// Every pattern scores a rule penalty of at least 0.9, so with tau 0.1
// a line is dropped whenever its similarity is below 1.0.
const NOISE: [&str; 5] = [
    "12345 67890 !!!!",
    "Copyright 2020 All rights reserved",
    "Read more at http://example.com :: posted 2021-01-01",
    "Tags: news, sports, breaking",
    "click here subscribe now FREE",
];

const MANIFEST: &str = r#"[[sources]]
id = "wiki_ref"
path = "ref.txt"
role = "reference"

[[sources]]
id = "news_core"
path = "core.txt"
role = "core"

[[sources]]
id = "web_aux"
path = "aux.txt"
role = "auxiliary"
"#;

const CONFIG: &str = r#"manifest = "sources.toml"
output_dir = "out"

[embedding]
dimension = 16
epochs = 2
min_word_count = 1
bucket_count = 1000

[filter]
centroid_sample_size = 300

[shuffle]
bucket_count = 8
"#;

/// Distinct topic lines, so exact-duplicate counts in the fixture are
/// exactly the duplicates we inject.
fn distinct_topic_lines(seed: u64, count: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut lines = Vec::with_capacity(count);
    while lines.len() < count {
        let n = rng.gen_range(5..12);
        let line = (0..n)
            .map(|_| *TOPIC.choose(&mut rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        if seen.insert(line.clone()) {
            lines.push(line);
        }
    }
    lines
}

struct Workspace {
    dir: TempDir,
    clean_pool: Vec<String>,
}

impl Workspace {
    /// 400 reference + 150 core + 355 auxiliary lines; the auxiliary
    /// file carries 40 noise lines and 15 exact duplicates of its own
    /// clean lines. All clean lines are globally distinct.
    fn new() -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let pool = distinct_topic_lines(5, 850);
        let w = Workspace {
            dir,
            clean_pool: pool.clone(),
        };
        w.write_lines("ref.txt", &pool[..400]);
        w.write_lines("core.txt", &pool[400..550]);

        let mut aux: Vec<String> = pool[550..].to_vec();
        for pattern in NOISE {
            aux.extend(std::iter::repeat(pattern.to_string()).take(8));
        }
        aux.extend(pool[550..565].iter().cloned());
        aux.shuffle(&mut ChaCha8Rng::seed_from_u64(8));
        w.write_lines("aux.txt", &aux);

        w.write("sources.toml", MANIFEST);
        w.write("config.toml", CONFIG);
        w
    }

    fn bare() -> Workspace {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
            clean_pool: Vec::new(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, content: &str) {
        fs::write(self.path(name), content).unwrap();
    }

    fn write_lines(&self, name: &str, lines: &[String]) {
        let mut text = lines.join("\n");
        text.push('\n');
        self.write(name, &text);
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_saaf"))
            .current_dir(self.dir.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn run_ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "saaf {args:?} exited with {:?}\nstderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    fn report(&self, name: &str) -> serde_json::Value {
        let path = self.path(&format!("out/reports/{name}.json"));
        let text = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        serde_json::from_str(&text).unwrap()
    }
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// The last stderr line must be a single JSON record with an "error" key.
fn error_record(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or("");
    let value: serde_json::Value = serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr is not a JSON record ({e}): {stderr}"));
    value["error"].as_str().expect("error key").to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in fs::read_dir(&current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                files.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn read_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let w = Workspace::bare();
    let out = w.run(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let w = Workspace::bare();
    let out = w.run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_every_subcommand() {
    let w = Workspace::bare();
    let out = w.run_ok(&["--help"]);
    let help = stdout(&out);
    for name in [
        "ingest",
        "embed-train",
        "centroid",
        "filter",
        "dedup",
        "shuffle",
        "bbpe-train",
        "encode",
        "stats",
        "eval-pairs",
        "eval-norm-eff",
        "macro-f1",
        "pipeline",
        "dump-config",
    ] {
        assert!(help.contains(name), "help does not mention {name}");
    }
}

#[test]
fn broken_config_is_a_usage_error_with_a_json_record() {
    let w = Workspace::bare();
    w.write("broken.toml", "manifest = [unterminated\n");
    let out = w.run(&["--config", "broken.toml", "dump-config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out).contains("broken.toml"));
}

#[test]
fn invalid_config_value_is_a_usage_error() {
    let w = Workspace::bare();
    w.write("zero.toml", "[embedding]\ndimension = 0\n");
    let out = w.run(&["--config", "zero.toml", "dump-config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!error_record(&out).is_empty());
}

#[test]
fn missing_input_is_a_runtime_error_with_a_json_record() {
    let w = Workspace::bare();
    let out = w.run(&["dedup", "--input", "nothere.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_record(&out).contains("nothere.txt"));
}

#[test]
fn dump_config_prints_parseable_toml() {
    let w = Workspace::bare();
    let out = w.run_ok(&["dump-config"]);
    let value: toml::Value = stdout(&out).parse().unwrap();
    assert_eq!(value["filter"]["tau"].as_float(), Some(0.1));
    assert_eq!(value["embedding"]["dimension"].as_integer(), Some(100));
    assert_eq!(value["shuffle"]["seed"].as_integer(), Some(3));
    assert_eq!(value["bbpe"]["vocab_size"].as_integer(), Some(32000));

    w.write("config.toml", CONFIG);
    let out = w.run_ok(&["--config", "config.toml", "dump-config"]);
    let value: toml::Value = stdout(&out).parse().unwrap();
    assert_eq!(value["embedding"]["dimension"].as_integer(), Some(16));
}

#[test]
fn ingest_merges_every_source_unfiltered() {
    let w = Workspace::new();
    w.run_ok(&["--config", "config.toml", "ingest"]);
    assert_eq!(read_lines(&w.path("out/merged.txt")).len(), 905);
    let report = w.report("ingest");
    assert_eq!(report["total_lines"].as_u64(), Some(905));
    assert_eq!(report["per_source"].as_array().unwrap().len(), 3);
}

#[test]
fn pipeline_retains_topic_lines_and_drops_noise() {
    let w = Workspace::new();
    let out = w.run_ok(&["--config", "config.toml", "pipeline"]);
    let log = stdout(&out);
    assert!(log.contains("stage=filter"), "missing filter stage line: {log}");
    assert!(log.contains("stage=pipeline"), "missing final stage line: {log}");

    let report = w.report("pipeline");
    assert_eq!(report["filter_processed"].as_u64(), Some(355));
    assert_eq!(report["filter_retained"].as_u64(), Some(315));
    assert_eq!(report["filter_discarded"].as_u64(), Some(40));
    assert_eq!(report["merged_lines"].as_u64(), Some(865));
    assert_eq!(report["dedup_input_lines"].as_u64(), Some(865));
    assert_eq!(report["dedup_unique_lines"].as_u64(), Some(850));
    assert_eq!(report["duplicates_removed"].as_u64(), Some(15));
    assert_eq!(report["shuffled_lines"].as_u64(), Some(850));
    assert_eq!(report["seeds"]["embedding"].as_u64(), Some(1));
    assert_eq!(report["seeds"]["centroid"].as_u64(), Some(2));
    assert_eq!(report["seeds"]["shuffle"].as_u64(), Some(3));

    // After filtering and dedup the corpus is exactly the clean pool.
    let mut got = read_lines(&w.path("out/shuffled.txt"));
    got.sort();
    let mut want = w.clean_pool.clone();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let w = Workspace::new();
    w.run_ok(&["--config", "config.toml", "pipeline"]);
    let first = snapshot(&w.path("out"));
    w.run_ok(&["--config", "config.toml", "pipeline"]);
    let second = snapshot(&w.path("out"));
    assert_eq!(
        first.keys().collect::<Vec<_>>(),
        second.keys().collect::<Vec<_>>()
    );
    for (path, bytes) in &first {
        assert_eq!(Some(bytes), second.get(path), "{} changed", path.display());
    }
}

#[test]
fn seed_flag_derives_stage_seeds() {
    let w = Workspace::new();
    w.run_ok(&["--config", "config.toml", "--seed", "100", "pipeline"]);
    let seeds = &w.report("pipeline")["seeds"];
    assert_eq!(seeds["embedding"].as_u64(), Some(100));
    assert_eq!(seeds["centroid"].as_u64(), Some(101));
    assert_eq!(seeds["shuffle"].as_u64(), Some(102));
}

#[test]
fn encode_round_trips_through_the_vocab_file() {
    let w = Workspace::bare();
    let lines = distinct_topic_lines(21, 100);
    w.write_lines("lines.txt", &lines);
    w.run_ok(&[
        "bbpe-train",
        "--input",
        "lines.txt",
        "--vocab-size",
        "300",
        "--output",
        "small.vocab",
    ]);
    w.run_ok(&[
        "encode",
        "--vocab",
        "small.vocab",
        "--input",
        "lines.txt",
        "--output",
        "ids.txt",
    ]);

    let vocab = saaf_core::bbpe::load_vocab(&w.path("small.vocab")).unwrap();
    let id_lines = read_lines(&w.path("ids.txt"));
    assert_eq!(id_lines.len(), lines.len());
    for (ids, line) in id_lines.iter().zip(&lines) {
        let ids: Vec<u32> = ids.split(' ').map(|t| t.parse().unwrap()).collect();
        let decoded = String::from_utf8(vocab.decode(&ids).unwrap()).unwrap();
        assert_eq!(&decoded, line);
    }

    // Without --output the ids go to stdout, uninterrupted by progress lines.
    let out = w.run_ok(&["encode", "--vocab", "small.vocab", "--input", "lines.txt"]);
    assert_eq!(stdout(&out), fs::read_to_string(w.path("ids.txt")).unwrap());
}

#[test]
fn eval_norm_eff_reports_three_decimal_scores() {
    let w = Workspace::bare();
    w.write(
        "results.tsv",
        "model\tbenchmark\tmacro_f1\taccuracy\tsps\n\
         model_03\ttask_a\t94.44\t-\t668.26\n\
         model_04\ttask_a\t95.67\t-\t413.68\n",
    );
    let out = w.run_ok(&["eval-norm-eff", "--results", "results.tsv"]);
    let log = stdout(&out);
    assert!(log.contains("norm_eff=0.944"), "{log}");
    assert!(log.contains("norm_eff=0.592"), "{log}");

    let report = w.report("eval_norm_eff");
    let models = report["models"].as_array().unwrap();
    assert_eq!(models.len(), 2);
    assert!((models[0]["norm_eff"].as_f64().unwrap() - 0.9444).abs() < 5e-4);
}

#[test]
fn macro_f1_handles_the_uniform_matrix() {
    let w = Workspace::bare();
    w.write("matrix.txt", "1 1\n1 1\n");
    let out = w.run_ok(&["macro-f1", "--matrix", "matrix.txt"]);
    assert!(stdout(&out).contains("macro_f1=50.0000"));
    let report = w.report("macro_f1");
    assert_eq!(report["macro_f1"].as_f64(), Some(50.0));
    assert_eq!(report["classes"].as_u64(), Some(2));
}

#[test]
fn eval_pairs_scores_with_builtin_and_sidecar_scorers() {
    let w = Workspace::bare();
    w.write_lines("train.txt", &distinct_topic_lines(31, 200));

    // Bad texts replace every word character with an unseen Latin
    // letter, keeping lengths equal so only familiarity separates them.
    let goods = ["دریا پانی کشتی", "پانی ساحل موج", "بادل طوفان بارش ہوا"];
    let mut pairs = String::from("category\tgood_text\tbad_text\n");
    for good in goods {
        let bad: String = good
            .chars()
            .map(|c| if c == ' ' { ' ' } else { 'z' })
            .collect();
        pairs.push_str(&format!("agreement\t{good}\t{bad}\n"));
    }
    w.write("pairs.tsv", &pairs);

    let out = w.run_ok(&[
        "eval-pairs",
        "--pairs",
        "pairs.tsv",
        "--train-corpus",
        "train.txt",
    ]);
    assert!(stdout(&out).contains("overall=100.00"), "{}", stdout(&out));

    // Sidecar scores override the built-in scorer; invert them.
    w.write("scores.tsv", "0.0\t1.0\n0.0\t1.0\n0.0\t1.0\n");
    let out = w.run_ok(&["eval-pairs", "--pairs", "pairs.tsv", "--scores", "scores.tsv"]);
    assert!(stdout(&out).contains("overall=0.00"), "{}", stdout(&out));
}
