//! Exact line-level deduplication, first occurrence wins.
//!
//! Lines are keyed by a 128-bit non-cryptographic hash. In the default
//! verified mode a hash hit is confirmed by comparing the actual bytes
//! (the file path re-reads stored offsets, bounding memory by the key
//! table), so duplicate detection is exact. The hash-only mode skips
//! verification and stores nothing but hashes; a false dedup then needs a
//! 128-bit collision, a ≈2⁻⁶⁴-scale risk at corpus scale.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_128;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupMode {
    Verified,
    HashOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupReport {
    pub input_lines: u64,
    pub unique_lines: u64,
    pub duplicates_removed: u64,
    pub input_bytes: u64,
    pub output_bytes: u64,
}

enum Store {
    /// hash → owned bytes of every distinct line seen with that hash.
    Verified(HashMap<u128, Vec<Box<[u8]>>>),
    HashOnly(HashSet<u128>),
}

/// In-memory duplicate tracker. Verified mode owns a copy of each distinct
/// line; for corpus-scale files prefer [`dedup_file`], which stores
/// offsets instead.
pub struct Deduper {
    hash: fn(&[u8]) -> u128,
    store: Store,
}

impl Deduper {
    pub fn new(mode: DedupMode) -> Self {
        Deduper::with_hasher(mode, xxh3_128)
    }

    /// Same behavior under any 128-bit hash. Exists so tests can force
    /// collisions and exercise the byte-verification path.
    pub fn with_hasher(mode: DedupMode, hash: fn(&[u8]) -> u128) -> Self {
        let store = match mode {
            DedupMode::Verified => Store::Verified(HashMap::new()),
            DedupMode::HashOnly => Store::HashOnly(HashSet::new()),
        };
        Deduper { hash, store }
    }

    /// True exactly when `line` has not been seen before.
    pub fn is_first(&mut self, line: &[u8]) -> bool {
        let h = (self.hash)(line);
        match &mut self.store {
            Store::Verified(map) => {
                let bucket = map.entry(h).or_default();
                if bucket.iter().any(|b| b.as_ref() == line) {
                    false
                } else {
                    bucket.push(line.into());
                    true
                }
            }
            Store::HashOnly(set) => set.insert(h),
        }
    }
}

/// Deduplicates an in-memory stream. Byte counts are serialized sizes
/// (line plus newline).
pub fn dedup_lines<'a, I>(lines: I, mode: DedupMode) -> (Vec<&'a str>, DedupReport)
where
    I: IntoIterator<Item = &'a str>,
{
    let mut deduper = Deduper::new(mode);
    let mut report = DedupReport::default();
    let mut kept = Vec::new();
    for line in lines {
        report.input_lines += 1;
        report.input_bytes += line.len() as u64 + 1;
        if deduper.is_first(line.as_bytes()) {
            report.unique_lines += 1;
            report.output_bytes += line.len() as u64 + 1;
            kept.push(line);
        } else {
            report.duplicates_removed += 1;
        }
    }
    (kept, report)
}

/// Streaming file deduplication. Lines are compared byte-exactly after
/// stripping the trailing `\n`; output lines are always `\n`-terminated.
///
/// Verified mode keeps only (offset, length) pairs per hash and re-reads
/// the input through a second handle to confirm duplicates, so memory
/// scales with the number of distinct hashes, not with line bytes.
pub fn dedup_file(input: &Path, output: &Path, mode: DedupMode) -> Result<DedupReport> {
    let infile = File::open(input).map_err(Error::io(input))?;
    let mut reader = BufReader::new(infile);
    let outfile = File::create(output).map_err(Error::io(output))?;
    let mut writer = BufWriter::new(outfile);

    let mut report = DedupReport::default();
    let mut offsets: HashMap<u128, Vec<(u64, u32)>> = HashMap::new();
    let mut hashes: HashSet<u128> = HashSet::new();
    let mut verify = match mode {
        DedupMode::Verified => Some(VerifyReader::new(input)?),
        DedupMode::HashOnly => None,
    };

    let mut buf = Vec::new();
    let mut offset = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(Error::io(input))?;
        if n == 0 {
            break;
        }
        let line_start = offset;
        offset += n as u64;
        report.input_lines += 1;
        report.input_bytes += n as u64;

        let line = match buf.last() {
            Some(b'\n') => &buf[..buf.len() - 1],
            _ => &buf[..],
        };
        let h = xxh3_128(line);
        let first = match verify.as_mut() {
            Some(v) => {
                let bucket = offsets.entry(h).or_default();
                let mut dup = false;
                for &(off, len) in bucket.iter() {
                    if len as usize == line.len() && v.matches(off, line)? {
                        dup = true;
                        break;
                    }
                }
                if !dup {
                    bucket.push((line_start, line.len() as u32));
                }
                !dup
            }
            None => hashes.insert(h),
        };

        if first {
            report.unique_lines += 1;
            writer.write_all(line).map_err(Error::io(output))?;
            writer.write_all(b"\n").map_err(Error::io(output))?;
            report.output_bytes += line.len() as u64 + 1;
        } else {
            report.duplicates_removed += 1;
        }
    }
    writer.flush().map_err(Error::io(output))?;
    Ok(report)
}

/// Second handle over the input for confirming hash hits byte-by-byte.
struct VerifyReader {
    file: File,
    path: std::path::PathBuf,
    scratch: Vec<u8>,
}

impl VerifyReader {
    fn new(path: &Path) -> Result<Self> {
        Ok(VerifyReader {
            file: File::open(path).map_err(Error::io(path))?,
            path: path.to_path_buf(),
            scratch: Vec::new(),
        })
    }

    fn matches(&mut self, offset: u64, line: &[u8]) -> Result<bool> {
        self.scratch.resize(line.len(), 0);
        self.file
            .seek(SeekFrom::Start(offset))
            .map_err(Error::io(&self.path))?;
        self.file
            .read_exact(&mut self.scratch)
            .map_err(Error::io(&self.path))?;
        Ok(self.scratch == line)
    }
}
