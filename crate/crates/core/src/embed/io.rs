//! Model and centroid persistence.
//!
//! The model container is little-endian binary: magic, version,
//! hyperparams, the subword hash identifier, the vocabulary with counts,
//! then the full input matrix. The centroid is a small text file whose
//! float components round-trip exactly through their shortest decimal
//! form.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{EmbeddingHyperparams, EmbeddingModel, ReferenceCentroid, VocabEntry, SUBWORD_HASH_ID};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SAAFEMB1";
const VERSION: u32 = 1;

pub fn save_model(model: &EmbeddingModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    let io = Error::io(path);
    (|| -> std::io::Result<()> {
        let hp = model.hyperparams();
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(hp.dimension as u64)?;
        w.write_u64::<LittleEndian>(hp.window as u64)?;
        w.write_u64::<LittleEndian>(hp.negative_samples as u64)?;
        w.write_u64::<LittleEndian>(hp.epochs as u64)?;
        w.write_u64::<LittleEndian>(hp.min_word_count)?;
        w.write_u64::<LittleEndian>(hp.subword_ngram_min as u64)?;
        w.write_u64::<LittleEndian>(hp.subword_ngram_max as u64)?;
        w.write_u64::<LittleEndian>(hp.bucket_count as u64)?;
        w.write_f64::<LittleEndian>(hp.learning_rate)?;
        w.write_u64::<LittleEndian>(hp.seed)?;
        let hash_id = SUBWORD_HASH_ID.as_bytes();
        w.write_u8(hash_id.len() as u8)?;
        w.write_all(hash_id)?;
        w.write_u64::<LittleEndian>(model.vocab().len() as u64)?;
        for entry in model.vocab() {
            let bytes = entry.word.as_bytes();
            w.write_u32::<LittleEndian>(bytes.len() as u32)?;
            w.write_all(bytes)?;
            w.write_u64::<LittleEndian>(entry.count)?;
        }
        for &v in model.input_matrix() {
            w.write_f32::<LittleEndian>(v)?;
        }
        w.flush()
    })()
    .map_err(io)
}

pub fn load_model(path: &Path) -> Result<EmbeddingModel> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(Error::io(path))?;
    if &magic != MAGIC {
        return Err(Error::Model(format!(
            "{} is not an embedding model file",
            path.display()
        )));
    }
    let version = r.read_u32::<LittleEndian>().map_err(Error::io(path))?;
    if version != VERSION {
        return Err(Error::Model(format!(
            "unsupported model version {version} (expected {VERSION})"
        )));
    }

    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dimension = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let window = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let negative_samples = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let epochs = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let min_word_count = r.read_u64::<LittleEndian>().map_err(io)?;
    let subword_ngram_min = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let subword_ngram_max = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let bucket_count = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let learning_rate = r.read_f64::<LittleEndian>().map_err(io)?;
    let seed = r.read_u64::<LittleEndian>().map_err(io)?;

    let hash_len = r.read_u8().map_err(io)? as usize;
    let mut hash_id = vec![0u8; hash_len];
    r.read_exact(&mut hash_id).map_err(io)?;
    if hash_id != SUBWORD_HASH_ID.as_bytes() {
        return Err(Error::Model(format!(
            "model uses subword hash {:?}, this build supports {SUBWORD_HASH_ID:?}",
            String::from_utf8_lossy(&hash_id)
        )));
    }

    let vocab_len = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let mut vocab = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let len = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut bytes = vec![0u8; len];
        r.read_exact(&mut bytes).map_err(io)?;
        let word = String::from_utf8(bytes)
            .map_err(|_| Error::Model("vocabulary entry is not UTF-8".into()))?;
        let count = r.read_u64::<LittleEndian>().map_err(io)?;
        vocab.push(VocabEntry { word, count });
    }

    let values = (vocab_len + bucket_count) * dimension;
    let mut input = vec![0.0f32; values];
    r.read_f32_into::<LittleEndian>(&mut input).map_err(io)?;

    let hp = EmbeddingHyperparams {
        dimension,
        window,
        negative_samples,
        epochs,
        min_word_count,
        subword_ngram_min,
        subword_ngram_max,
        bucket_count,
        learning_rate,
        seed,
    };
    EmbeddingModel::from_parts(hp, vocab, input)
}

pub fn save_centroid(centroid: &ReferenceCentroid, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    let io = Error::io(path);
    (|| -> std::io::Result<()> {
        writeln!(w, "dimension {}", centroid.vector.len())?;
        writeln!(w, "sample_size {}", centroid.sample_size)?;
        writeln!(w, "seed {}", centroid.seed)?;
        for v in &centroid.vector {
            writeln!(w, "{v}")?;
        }
        w.flush()
    })()
    .map_err(io)
}

pub fn load_centroid(path: &Path) -> Result<ReferenceCentroid> {
    let file = File::open(path).map_err(Error::io(path))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();
    let bad = |msg: &str| Error::Model(format!("{}: {msg}", path.display()));

    let mut header = |key: &str| -> Result<u64> {
        let line = match lines.next() {
            Some(l) => l.map_err(Error::io(path))?,
            None => return Err(bad("truncated header")),
        };
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| bad(&format!("expected `{key} <n>`")))?;
        Ok(value)
    };
    let dimension = header("dimension")? as usize;
    let sample_size = header("sample_size")?;
    let seed = header("seed")?;

    let mut vector = Vec::with_capacity(dimension);
    for line in lines {
        let line = line.map_err(Error::io(path))?;
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| bad("bad float component"))?;
        vector.push(v);
    }
    if vector.len() != dimension {
        return Err(bad(&format!(
            "expected {dimension} components, found {}",
            vector.len()
        )));
    }
    Ok(ReferenceCentroid {
        vector,
        sample_size,
        seed,
    })
}
