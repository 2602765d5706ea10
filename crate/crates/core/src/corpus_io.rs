//! Ingestion and merging of one-document-per-line sources.
//!
//! Reading is byte-preserving by default: lines are split on `\n`, one
//! preceding `\r` is stripped and counted, and invalid UTF-8 is repaired
//! with replacement characters and counted rather than dropped, leaving
//! the penalty scorer to decide a noisy line's fate. Optional NFC
//! normalization exists for pipelines that want it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use unicode_normalization::{is_nfc_quick, IsNormalized, UnicodeNormalization};

use crate::{Error, Result};

/// One document: a single text line with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentLine {
    pub text: String,
    pub source_id: Arc<str>,
    pub line_index: u64,
}

/// Counters accumulated while reading one source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    pub lines: u64,
    /// Raw bytes consumed, equal to the file size after a full read.
    pub bytes: u64,
    pub cr_stripped: u64,
    pub invalid_utf8_lines: u64,
}

/// Streaming reader yielding [`DocumentLine`]s in file order.
pub struct LineReader<R: BufRead> {
    reader: R,
    source_id: Arc<str>,
    next_index: u64,
    nfc: bool,
    stats: ReadStats,
    buf: Vec<u8>,
    done: bool,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(reader: R, source_id: &str) -> Self {
        LineReader {
            reader,
            source_id: Arc::from(source_id),
            next_index: 0,
            nfc: false,
            stats: ReadStats::default(),
            buf: Vec::new(),
            done: false,
        }
    }

    /// Enables NFC normalization of each decoded line.
    pub fn nfc(mut self, enabled: bool) -> Self {
        self.nfc = enabled;
        self
    }

    /// Valid once the iterator has returned `None`.
    pub fn stats(&self) -> ReadStats {
        self.stats
    }
}

impl<R: BufRead> Iterator for LineReader<R> {
    type Item = Result<DocumentLine>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => {
                self.done = true;
                None
            }
            Ok(n) => {
                self.stats.bytes += n as u64;
                let mut slice = self.buf.as_slice();
                if slice.last() == Some(&b'\n') {
                    slice = &slice[..slice.len() - 1];
                }
                if slice.last() == Some(&b'\r') {
                    slice = &slice[..slice.len() - 1];
                    self.stats.cr_stripped += 1;
                }
                let text = match String::from_utf8_lossy(slice) {
                    std::borrow::Cow::Borrowed(s) => s.to_string(),
                    std::borrow::Cow::Owned(s) => {
                        self.stats.invalid_utf8_lines += 1;
                        s
                    }
                };
                let text = if self.nfc && is_nfc_quick(text.chars()) != IsNormalized::Yes {
                    text.nfc().collect()
                } else {
                    text
                };
                let index = self.next_index;
                self.next_index += 1;
                self.stats.lines += 1;
                Some(Ok(DocumentLine {
                    text,
                    source_id: Arc::clone(&self.source_id),
                    line_index: index,
                }))
            }
            Err(e) => {
                self.done = true;
                Some(Err(Error::Io {
                    path: PathBuf::from(self.source_id.as_ref()),
                    source: e,
                }))
            }
        }
    }
}

/// Opens `path` for streaming line reads. Missing files fail here, naming
/// the path.
pub fn read_lines(path: &Path, source_id: &str) -> Result<LineReader<BufReader<File>>> {
    let file = File::open(path).map_err(Error::io(path))?;
    Ok(LineReader::new(BufReader::new(file), source_id))
}

/// Writes lines with `\n` terminators. Returns bytes written. Rejects
/// lines that contain a line break or end in `\r`, since those would not
/// read back identically.
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<u64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    let mut bytes = 0u64;
    for line in lines {
        let line = line.as_ref();
        if line.bytes().any(|b| b == b'\n') || line.ends_with('\r') {
            return Err(Error::Input(format!(
                "line is not round-trip safe (interior newline or trailing CR): {line:?}"
            )));
        }
        w.write_all(line.as_bytes()).map_err(Error::io(path))?;
        w.write_all(b"\n").map_err(Error::io(path))?;
        bytes += line.len() as u64 + 1;
    }
    w.flush().map_err(Error::io(path))?;
    Ok(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceRole {
    Core,
    Reference,
    Auxiliary,
}

impl SourceRole {
    pub fn name(&self) -> &'static str {
        match self {
            SourceRole::Core => "core",
            SourceRole::Reference => "reference",
            SourceRole::Auxiliary => "auxiliary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub id: String,
    pub path: PathBuf,
    pub role: SourceRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_size_bytes: Option<u64>,
}

/// Ordered list of input sources. Multiple sources may share a role;
/// several reference sources are simply concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceManifest {
    pub sources: Vec<SourceEntry>,
}

impl SourceManifest {
    /// Loads a TOML manifest. Relative source paths are resolved against
    /// the manifest's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut manifest: SourceManifest = toml::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            for entry in &mut manifest.sources {
                if entry.path.is_relative() {
                    entry.path = base.join(&entry.path);
                }
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for entry in &self.sources {
            if entry.id.is_empty() {
                return Err(Error::Config("source id must be non-empty".into()));
            }
            if !seen.insert(entry.id.as_str()) {
                return Err(Error::Config(format!("duplicate source id {:?}", entry.id)));
            }
        }
        Ok(())
    }

    /// Checks that every source path exists and is a file.
    pub fn check_paths(&self) -> Result<()> {
        for entry in &self.sources {
            if !entry.path.is_file() {
                return Err(Error::Config(format!(
                    "source {:?}: no such file {}",
                    entry.id,
                    entry.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn with_role(&self, role: SourceRole) -> impl Iterator<Item = &SourceEntry> {
        self.sources.iter().filter(move |e| e.role == role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStat {
    pub id: String,
    pub role: SourceRole,
    pub line_count: u64,
    /// Raw bytes as stored on disk.
    pub byte_count: u64,
    pub cr_stripped: u64,
    pub invalid_utf8_lines: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStat {
    pub role: SourceRole,
    pub line_count: u64,
    pub byte_count: u64,
}

/// Per-source and per-role counts for a merge, plus exact totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub per_source: Vec<SourceStat>,
    pub per_role: Vec<RoleStat>,
    pub total_lines: u64,
    /// Input bytes as stored on disk.
    pub total_bytes: u64,
    /// Bytes the merged stream serializes to (after `\r` stripping and any
    /// normalization).
    pub output_bytes: u64,
}

impl CompositionReport {
    fn push(&mut self, stat: SourceStat) {
        self.total_lines += stat.line_count;
        self.total_bytes += stat.byte_count;
        match self.per_role.iter_mut().find(|r| r.role == stat.role) {
            Some(r) => {
                r.line_count += stat.line_count;
                r.byte_count += stat.byte_count;
            }
            None => self.per_role.push(RoleStat {
                role: stat.role,
                line_count: stat.line_count,
                byte_count: stat.byte_count,
            }),
        }
        self.per_source.push(stat);
        self.per_role.sort_by_key(|r| r.role);
    }
}

/// Concatenates sources in manifest order while accumulating a
/// [`CompositionReport`]. Files open lazily, one at a time.
pub struct MergeStream {
    entries: std::vec::IntoIter<SourceEntry>,
    current: Option<(LineReader<BufReader<File>>, SourceEntry)>,
    nfc: bool,
    report: CompositionReport,
}

pub fn merge_sources(manifest: &SourceManifest, nfc: bool) -> Result<MergeStream> {
    manifest.validate()?;
    Ok(MergeStream {
        entries: manifest.sources.clone().into_iter(),
        current: None,
        nfc,
        report: CompositionReport::default(),
    })
}

impl MergeStream {
    /// Complete once the stream has been exhausted.
    pub fn report(&self) -> &CompositionReport {
        &self.report
    }

    pub fn into_report(self) -> CompositionReport {
        self.report
    }

    fn close_current(&mut self) {
        if let Some((reader, entry)) = self.current.take() {
            let stats = reader.stats();
            self.report.push(SourceStat {
                id: entry.id,
                role: entry.role,
                line_count: stats.lines,
                byte_count: stats.bytes,
                cr_stripped: stats.cr_stripped,
                invalid_utf8_lines: stats.invalid_utf8_lines,
            });
        }
    }
}

impl Iterator for MergeStream {
    type Item = Result<DocumentLine>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some((reader, _)) = &mut self.current {
                match reader.next() {
                    Some(item) => {
                        if let Ok(line) = &item {
                            self.report.output_bytes += line.text.len() as u64 + 1;
                        }
                        return Some(item);
                    }
                    None => self.close_current(),
                }
            }
            match self.entries.next() {
                Some(entry) => match read_lines(&entry.path, &entry.id) {
                    Ok(reader) => self.current = Some((reader.nfc(self.nfc), entry)),
                    Err(e) => return Some(Err(e)),
                },
                None => return None,
            }
        }
    }
}

/// Merges all sources into one file and returns the composition report.
pub fn merge_to_path(manifest: &SourceManifest, out: &Path, nfc: bool) -> Result<CompositionReport> {
    let mut stream = merge_sources(manifest, nfc)?;
    let file = File::create(out).map_err(Error::io(out))?;
    let mut w = BufWriter::new(file);
    for line in &mut stream {
        let line = line?;
        w.write_all(line.text.as_bytes()).map_err(Error::io(out))?;
        w.write_all(b"\n").map_err(Error::io(out))?;
    }
    w.flush().map_err(Error::io(out))?;
    Ok(stream.into_report())
}
