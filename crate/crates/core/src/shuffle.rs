//! Seeded deterministic shuffling of line corpora.
//!
//! Two-pass external-memory scheme: pass one fans lines out to scratch
//! bucket files by a seeded hash of the running line index; pass two
//! shuffles each bucket in memory and concatenates the buckets in a
//! seeded permuted order. Peak memory is bounded by the largest bucket.
//! Identical (corpus, seed, bucket_count) always reproduces the same
//! output bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fan-out beyond this needs more open files than containers usually
/// allow, and buys nothing at the corpus sizes this tool targets.
pub const MAX_BUCKETS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleConfig {
    pub seed: u64,
    pub bucket_count: usize,
    /// Scratch root for bucket files; defaults to the output's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scratch_dir: Option<PathBuf>,
}

impl Default for ShuffleConfig {
    fn default() -> Self {
        ShuffleConfig {
            seed: 0,
            bucket_count: 64,
            scratch_dir: None,
        }
    }
}

impl ShuffleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bucket_count == 0 || self.bucket_count > MAX_BUCKETS {
            return Err(Error::Config(format!(
                "bucket_count must be in 1..={MAX_BUCKETS}, got {}",
                self.bucket_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleReport {
    pub lines: u64,
    pub bytes: u64,
    pub seed: u64,
    pub bucket_count: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Purpose constants keep the three random streams (bucket assignment,
/// per-bucket shuffle, bucket visit order) independent under one seed.
const PURPOSE_ASSIGN: u64 = 0x6275_636b_6574_3030;
const PURPOSE_ORDER: u64 = 0x6f72_6465_7230_3030;
const PURPOSE_BUCKET: u64 = 0x7368_7566_666c_6530;

fn derived_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ purpose))
}

fn bucket_of(seed: u64, index: u64, bucket_count: usize) -> usize {
    (splitmix64(seed ^ PURPOSE_ASSIGN ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        % bucket_count as u64) as usize
}

/// Shuffles `input` into `output`. The multiset of lines is preserved
/// byte-exactly; the ordering is a pure function of the config.
pub fn shuffle_file(input: &Path, output: &Path, cfg: &ShuffleConfig) -> Result<ShuffleReport> {
    cfg.validate()?;
    let input_size = std::fs::metadata(input).map_err(Error::io(input))?.len();
    let scratch_root = match &cfg.scratch_dir {
        Some(dir) => dir.clone(),
        None => output
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    // Scratch space is created on demand, like the output directory.
    std::fs::create_dir_all(&scratch_root).map_err(Error::io(&scratch_root))?;
    let scratch = tempfile::Builder::new()
        .prefix("shuffle-buckets-")
        .tempdir_in(&scratch_root)
        .map_err(|e| storage_error(&scratch_root, input_size, e))?;

    let mut writers = Vec::with_capacity(cfg.bucket_count);
    let mut bucket_paths = Vec::with_capacity(cfg.bucket_count);
    for i in 0..cfg.bucket_count {
        let path = scratch.path().join(format!("bucket-{i:04}"));
        let file = File::create(&path).map_err(|e| storage_error(&path, input_size, e))?;
        writers.push(BufWriter::new(file));
        bucket_paths.push(path);
    }

    let infile = File::open(input).map_err(Error::io(input))?;
    let mut reader = BufReader::new(infile);
    let mut report = ShuffleReport {
        lines: 0,
        bytes: 0,
        seed: cfg.seed,
        bucket_count: cfg.bucket_count,
    };
    let mut buf = Vec::new();
    let mut index = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(Error::io(input))?;
        if n == 0 {
            break;
        }
        if buf.last() != Some(&b'\n') {
            buf.push(b'\n');
        }
        let b = bucket_of(cfg.seed, index, cfg.bucket_count);
        writers[b]
            .write_all(&buf)
            .map_err(|e| storage_error(&bucket_paths[b], input_size, e))?;
        index += 1;
    }
    for (w, path) in writers.iter_mut().zip(&bucket_paths) {
        w.flush().map_err(|e| storage_error(path, input_size, e))?;
    }
    drop(writers);

    let mut order: Vec<usize> = (0..cfg.bucket_count).collect();
    order.shuffle(&mut derived_rng(cfg.seed, PURPOSE_ORDER));

    let outfile = File::create(output).map_err(|e| storage_error(output, input_size, e))?;
    let mut out = BufWriter::new(outfile);
    for &b in &order {
        let mut lines = read_bucket(&bucket_paths[b])?;
        lines.shuffle(&mut derived_rng(
            cfg.seed,
            PURPOSE_BUCKET.wrapping_add(b as u64),
        ));
        for line in &lines {
            out.write_all(line).map_err(|e| storage_error(output, input_size, e))?;
            out.write_all(b"\n").map_err(|e| storage_error(output, input_size, e))?;
            report.lines += 1;
            report.bytes += line.len() as u64 + 1;
        }
    }
    out.flush().map_err(|e| storage_error(output, input_size, e))?;
    Ok(report)
}

fn read_bucket(path: &Path) -> Result<Vec<Vec<u8>>> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut reader = BufReader::new(file);
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(Error::io(path))?;
        if n == 0 {
            return Ok(lines);
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        lines.push(buf.clone());
    }
}

fn storage_error(path: &Path, needed: u64, source: std::io::Error) -> Error {
    Error::Storage {
        path: path.to_path_buf(),
        needed,
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(content: &str, seed: u64, buckets: usize) -> (String, ShuffleReport) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, content).unwrap();
        let cfg = ShuffleConfig {
            seed,
            bucket_count: buckets,
            scratch_dir: None,
        };
        let report = shuffle_file(&input, &output, &cfg).unwrap();
        (std::fs::read_to_string(&output).unwrap(), report)
    }

    #[test]
    fn single_line_is_unchanged() {
        let (out, report) = run("only\n", 7, 4);
        assert_eq!(out, "only\n");
        assert_eq!(report.lines, 1);
    }

    #[test]
    fn same_seed_reproduces_output_exactly() {
        let content: String = (0..200).map(|i| format!("line {i}\n")).collect();
        let (a, _) = run(&content, 11, 8);
        let (b, _) = run(&content, 11, 8);
        assert_eq!(a, b);
    }

    #[test]
    fn output_is_a_permutation_and_not_the_identity() {
        let content: String = (0..1000).map(|i| format!("{i:04}\n")).collect();
        let (out, report) = run(&content, 3, 16);
        assert_ne!(out, content);
        let mut input_lines: Vec<&str> = content.lines().collect();
        let mut output_lines: Vec<&str> = out.lines().collect();
        assert_eq!(report.lines, 1000);
        input_lines.sort_unstable();
        output_lines.sort_unstable();
        assert_eq!(input_lines, output_lines);
    }

    #[test]
    fn different_seeds_give_different_orders() {
        let content: String = (0..500).map(|i| format!("{i}\n")).collect();
        let (a, _) = run(&content, 1, 8);
        let (b, _) = run(&content, 2, 8);
        assert_ne!(a, b);
    }

    #[test]
    fn one_bucket_still_shuffles() {
        let content: String = (0..100).map(|i| format!("{i}\n")).collect();
        let (out, _) = run(&content, 5, 1);
        assert_ne!(out, content);
    }

    #[test]
    fn bucket_count_is_validated() {
        let cfg = ShuffleConfig {
            seed: 0,
            bucket_count: 0,
            scratch_dir: None,
        };
        assert!(cfg.validate().is_err());
        let cfg = ShuffleConfig {
            seed: 0,
            bucket_count: MAX_BUCKETS + 1,
            scratch_dir: None,
        };
        assert!(cfg.validate().is_err());
    }
}
