//! Vocabulary file format.
//!
//! Plain text, one record per line, in fixed section order:
//!
//! ```text
//! version 1
//! vocab_size 263
//! special 0 begin <s>
//! ...
//! token 5 \x00
//! token 261 ab
//! merge 102 103
//! ```
//!
//! Token bytes are escaped so every record stays single-line ASCII:
//! printable bytes other than backslash are literal, everything else
//! is \xNN. The token table is redundant with the merge list; loading
//! rebuilds from the merges and verifies the listed bytes, so a
//! corrupted or hand-edited table fails loudly.

use std::fmt::Write as _;
use std::path::Path;

use super::{BbpeVocab, SpecialTokens, FIRST_BYTE_ID};
use crate::{Error, Result};

const FORMAT_VERSION: u32 = 1;

fn escape_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if b.is_ascii_graphic() && b != b'\\' {
            out.push(b as char);
        } else {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
    out
}

fn unescape_bytes(s: &str, path: &Path) -> Result<Vec<u8>> {
    let malformed = || Error::Model(format!("{}: malformed byte escape in {s:?}", path.display()));
    let mut out = Vec::with_capacity(s.len());
    let mut chars = s.bytes();
    while let Some(b) = chars.next() {
        if b == b'\\' {
            let (x, hi, lo) = (chars.next(), chars.next(), chars.next());
            if x != Some(b'x') {
                return Err(malformed());
            }
            let hex = [hi.ok_or_else(malformed)?, lo.ok_or_else(malformed)?];
            let hex = std::str::from_utf8(&hex).map_err(|_| malformed())?;
            out.push(u8::from_str_radix(hex, 16).map_err(|_| malformed())?);
        } else if b.is_ascii_graphic() {
            out.push(b);
        } else {
            return Err(malformed());
        }
    }
    Ok(out)
}

pub fn save_vocab(vocab: &BbpeVocab, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "version {FORMAT_VERSION}");
    let _ = writeln!(out, "vocab_size {}", vocab.vocab_size());
    for (id, (role, name)) in vocab.specials().roles().iter().enumerate() {
        let _ = writeln!(out, "special {id} {role} {}", escape_bytes(name.as_bytes()));
    }
    for id in FIRST_BYTE_ID as usize..vocab.vocab_size() {
        let bytes = vocab.token_bytes(id as u32).expect("id below vocab_size");
        let _ = writeln!(out, "token {id} {}", escape_bytes(bytes));
    }
    for &(left, right) in vocab.merges() {
        let _ = writeln!(out, "merge {left} {right}");
    }
    std::fs::write(path, out).map_err(Error::io(path))
}

pub fn load_vocab(path: &Path) -> Result<BbpeVocab> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let fail = |msg: String| Error::Model(format!("{}: {msg}", path.display()));

    let mut version: Option<u32> = None;
    let mut vocab_size: Option<usize> = None;
    let mut special_names: [Option<String>; SpecialTokens::COUNT] = Default::default();
    let mut tokens: Vec<(u32, Vec<u8>)> = Vec::new();
    let mut merges: Vec<(u32, u32)> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad_line = || fail(format!("unparseable line {}: {line:?}", lineno + 1));
        let mut fields = line.split(' ');
        let kind = fields.next().unwrap_or("");
        let mut rest = || fields.next().ok_or_else(bad_line);
        match kind {
            "version" => version = Some(rest()?.parse().map_err(|_| bad_line())?),
            "vocab_size" => vocab_size = Some(rest()?.parse().map_err(|_| bad_line())?),
            "special" => {
                let id: usize = rest()?.parse().map_err(|_| bad_line())?;
                let role = rest()?;
                let name = unescape_bytes(rest()?, path)?;
                let expected_role = [
                    "begin", "pad", "end", "unknown", "mask",
                ]
                .get(id)
                .copied()
                .ok_or_else(bad_line)?;
                if role != expected_role {
                    return Err(fail(format!(
                        "special id {id} has role {role:?}, expected {expected_role:?}"
                    )));
                }
                let name = String::from_utf8(name)
                    .map_err(|_| fail(format!("special {id} name is not UTF-8")))?;
                special_names[id] = Some(name);
            }
            "token" => {
                let id: u32 = rest()?.parse().map_err(|_| bad_line())?;
                tokens.push((id, unescape_bytes(rest()?, path)?));
            }
            "merge" => {
                let left: u32 = rest()?.parse().map_err(|_| bad_line())?;
                let right: u32 = rest()?.parse().map_err(|_| bad_line())?;
                merges.push((left, right));
            }
            _ => return Err(bad_line()),
        }
        if fields.next().is_some() {
            return Err(bad_line());
        }
    }

    match version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(fail(format!("unsupported vocab format version {v}"))),
        None => return Err(fail("missing version record".to_string())),
    }
    let vocab_size = vocab_size.ok_or_else(|| fail("missing vocab_size record".to_string()))?;
    let [begin, pad, end, unknown, mask] = special_names;
    let specials = SpecialTokens {
        begin: begin.ok_or_else(|| fail("missing special 0".to_string()))?,
        pad: pad.ok_or_else(|| fail("missing special 1".to_string()))?,
        end: end.ok_or_else(|| fail("missing special 2".to_string()))?,
        unknown: unknown.ok_or_else(|| fail("missing special 3".to_string()))?,
        mask: mask.ok_or_else(|| fail("missing special 4".to_string()))?,
    };

    let vocab = BbpeVocab::from_merges(specials, merges)?;
    if vocab.vocab_size() != vocab_size {
        return Err(fail(format!(
            "vocab_size says {vocab_size} but specials + bytes + merges produce {}",
            vocab.vocab_size()
        )));
    }
    if tokens.len() != vocab_size - FIRST_BYTE_ID as usize {
        return Err(fail(format!(
            "token table lists {} entries, expected {}",
            tokens.len(),
            vocab_size - FIRST_BYTE_ID as usize
        )));
    }
    for (i, (id, bytes)) in tokens.iter().enumerate() {
        let expected_id = FIRST_BYTE_ID + i as u32;
        if *id != expected_id {
            return Err(fail(format!(
                "token table out of order: entry {i} has id {id}, expected {expected_id}"
            )));
        }
        if vocab.token_bytes(*id) != Some(bytes.as_slice()) {
            return Err(fail(format!(
                "token {id} bytes do not match the merge derivation"
            )));
        }
    }
    Ok(vocab)
}
