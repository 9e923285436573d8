//! Word vectors: WEB1 files hold one row per word; WES1 files hold a raw
//! subtoken stream plus the subtoken map, reduced with the first-subtoken
//! rule on load.
//!
//! WEB1: "WEB1", u32 n_words, u32 D, n_words·D f32.
//! WES1: "WES1", u32 S, u32 D, u32 n_words, per word (u32 k, k × u32
//! subtoken index), then S·D f32. All little-endian.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ProsodyError;
use crate::io::{label_of, read_file, u32_len, write_file, ByteReader, ByteWriter, FormatError};
use crate::nn::Mat;

const WEB_MAGIC: &[u8; 4] = b"WEB1";
const WES_MAGIC: &[u8; 4] = b"WES1";

/// Where the vectors came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Contextualized,
    Static,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddingTable {
    pub vectors: Mat<f32>,
    pub provenance: Provenance,
}

/// Per word, the indices of its subtokens in the raw stream.
pub type SubtokenMap = Vec<Vec<usize>>;

/// Keeps the first subtoken's vector for every word.
pub fn reduce_subtokens(raw: &Mat<f32>, map: &SubtokenMap) -> Result<Mat<f32>, ProsodyError> {
    let mut out = Mat::zeros(map.len(), raw.cols);
    let mut prev: Option<usize> = None;
    for (w, subs) in map.iter().enumerate() {
        let first = *subs.first().ok_or(ProsodyError::Subtokens(format!("word {w} has no subtokens")))?;
        for &s in subs {
            if s >= raw.rows {
                return Err(ProsodyError::Subtokens(format!(
                    "word {w}: subtoken {s} out of range for {} rows",
                    raw.rows
                )));
            }
            if prev.is_some_and(|p| s <= p) {
                return Err(ProsodyError::Subtokens(format!(
                    "word {w}: subtoken indices must increase across the utterance"
                )));
            }
            prev = Some(s);
        }
        out.row_mut(w).copy_from_slice(raw.row(first));
    }
    Ok(out)
}

/// Phoneme `i` gets the vector of its word, or zeros when it has none.
pub fn upsample_words_to_phonemes(
    word_vecs: &Mat<f32>,
    word_of_phoneme: &[Option<usize>],
) -> Result<Mat<f32>, ProsodyError> {
    let mut out = Mat::zeros(word_of_phoneme.len(), word_vecs.cols);
    for (i, w) in word_of_phoneme.iter().enumerate() {
        if let Some(w) = *w {
            if w >= word_vecs.rows {
                return Err(ProsodyError::Shape(format!(
                    "phoneme {i} points at word {w} but only {} word vectors exist",
                    word_vecs.rows
                )));
            }
            out.row_mut(i).copy_from_slice(word_vecs.row(w));
        }
    }
    Ok(out)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Deterministic per-word vectors in [-1, 1) seeded by the word's hash.
/// A stand-in when no contextual embeddings are available.
pub fn static_word_vectors<S: AsRef<str>>(words: &[S], dim: usize) -> WordEmbeddingTable {
    let mut m = Mat::zeros(words.len(), dim);
    for (i, w) in words.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(&w.as_ref().to_lowercase()));
        for v in m.row_mut(i) {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    WordEmbeddingTable {
        vectors: m,
        provenance: Provenance::Static,
    }
}

pub fn encode_web(vectors: &Mat<f32>) -> Result<Vec<u8>, FormatError> {
    let mut w = ByteWriter::new();
    w.magic(WEB_MAGIC);
    w.u32(u32_len(vectors.rows, "word count")?);
    w.u32(u32_len(vectors.cols, "dimension")?);
    w.f32s(&vectors.data);
    Ok(w.buf)
}

pub fn encode_wes(raw: &Mat<f32>, map: &SubtokenMap) -> Result<Vec<u8>, FormatError> {
    let mut w = ByteWriter::new();
    w.magic(WES_MAGIC);
    w.u32(u32_len(raw.rows, "subtoken count")?);
    w.u32(u32_len(raw.cols, "dimension")?);
    w.u32(u32_len(map.len(), "word count")?);
    for subs in map {
        w.u32(u32_len(subs.len(), "subtoken list")?);
        for &s in subs {
            w.u32(u32_len(s, "subtoken index")?);
        }
    }
    w.f32s(&raw.data);
    Ok(w.buf)
}

/// Raw stream and map from a WES1 buffer.
pub fn decode_wes(bytes: &[u8], label: &str) -> Result<(Mat<f32>, SubtokenMap), FormatError> {
    let mut r = ByteReader::new(bytes, label);
    r.expect_magic(WES_MAGIC)?;
    let s = r.u32()? as usize;
    let d = r.u32()? as usize;
    let n = r.u32()? as usize;
    let mut map = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let k = r.u32()? as usize;
        r.require(k.saturating_mul(4))?;
        map.push((0..k).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?);
    }
    let count = s.checked_mul(d).ok_or_else(|| r.invalid("size overflow"))?;
    let data = r.f32s(count)?;
    r.finish()?;
    Ok((Mat { rows: s, cols: d, data }, map))
}

/// Word vectors from either a WEB1 or a WES1 buffer.
pub fn decode_word_embeddings(bytes: &[u8], label: &str) -> Result<WordEmbeddingTable, ProsodyError> {
    if bytes.starts_with(WES_MAGIC) {
        let (raw, map) = decode_wes(bytes, label)?;
        return Ok(WordEmbeddingTable {
            vectors: reduce_subtokens(&raw, &map)?,
            provenance: Provenance::Contextualized,
        });
    }
    let mut r = ByteReader::new(bytes, label);
    r.expect_magic(WEB_MAGIC)?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let count = n.checked_mul(d).ok_or_else(|| r.invalid("size overflow"))?;
    let data = r.f32s(count)?;
    r.finish()?;
    Ok(WordEmbeddingTable {
        vectors: Mat { rows: n, cols: d, data },
        provenance: Provenance::Contextualized,
    })
}

pub fn write_web(path: &Path, vectors: &Mat<f32>) -> Result<(), FormatError> {
    write_file(path, &encode_web(vectors)?)
}

pub fn read_word_embeddings(path: &Path) -> Result<WordEmbeddingTable, ProsodyError> {
    decode_word_embeddings(&read_file(path)?, &label_of(path))
}
