//! Aligned corpus model: TextGrid alignments plus audio metadata, and the
//! conversion of segment times into integer frame durations.

mod audio;
mod textgrid;

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audio::{read_wav_mono16, wav_info, write_wav_mono16, Audio};
pub use textgrid::{parse_textgrid, to_long_text, to_short_text, Interval, TextGrid, Tier};

use crate::frames::seconds_to_frames;
use crate::par::Exec;

/// Label given to phone intervals with empty text.
pub const SILENCE: &str = "sil";

/// Slack allowed between the last segment end and the audio end.
pub const END_SLACK_S: f64 = 0.010;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("TextGrid line {line}: {msg}")]
    TextGrid { line: usize, msg: String },
    #[error("utterance {id}: {msg}")]
    Utterance { id: String, msg: String },
    #[error("manifest {path} line {line}: {msg}")]
    Manifest {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
    #[error("duplicate utterance id {0}")]
    DuplicateId(String),
    #[error("{0}")]
    Invalid(String),
}

impl CorpusError {
    fn utt(id: &str, msg: impl Into<String>) -> Self {
        CorpusError::Utterance {
            id: id.to_string(),
            msg: msg.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhonemeSegment {
    pub phoneme: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// Inclusive range of phoneme indices spoken as one word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word: String,
    pub first_phoneme_idx: usize,
    pub last_phoneme_idx: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub segments: Vec<PhonemeSegment>,
    pub words: Vec<WordSpan>,
    pub sample_rate: u32,
    pub n_samples: usize,
}

impl Utterance {
    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate as f64
    }

    /// Word index of each phoneme, `None` for phonemes outside every word.
    pub fn word_of_phoneme(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.segments.len()];
        for (w, span) in self.words.iter().enumerate() {
            for slot in &mut out[span.first_phoneme_idx..=span.last_phoneme_idx] {
                *slot = Some(w);
            }
        }
        out
    }

    pub fn phonemes(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.phoneme.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedCorpus {
    pub utterances: Vec<Utterance>,
    pub speakers: Vec<String>,
}

impl AlignedCorpus {
    /// Builds the corpus, deriving the sorted speaker set.
    pub fn new(utterances: Vec<Utterance>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for u in &utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(CorpusError::DuplicateId(u.id.clone()));
            }
        }
        let speakers: BTreeSet<String> = utterances.iter().map(|u| u.speaker.clone()).collect();
        Ok(AlignedCorpus {
            utterances,
            speakers: speakers.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// One JSON object per utterance per line.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        for u in &self.utterances {
            s.push_str(&serde_json::to_string(u).expect("utterance serializes"));
            s.push('\n');
        }
        s
    }
}

/// Builds an utterance from a phone tier and a word tier. Each phoneme
/// joins the word interval containing its midpoint; phonemes whose midpoint
/// is in no (non-empty) word interval belong to no word.
pub fn build_utterance(
    id: &str,
    phone_tier: &[Interval],
    word_tier: &[Interval],
    speaker: &str,
    sample_rate: u32,
    n_samples: usize,
) -> Result<Utterance, CorpusError> {
    if sample_rate == 0 {
        return Err(CorpusError::utt(id, "sample rate is zero"));
    }
    let mut segments = Vec::with_capacity(phone_tier.len());
    for iv in phone_tier {
        if iv.end_s <= iv.start_s {
            return Err(CorpusError::utt(
                id,
                format!("empty phone interval at {}", iv.start_s),
            ));
        }
        if let Some(prev) = segments.last().map(|s: &PhonemeSegment| s.end_s) {
            if iv.start_s < prev - 1e-9 {
                return Err(CorpusError::utt(
                    id,
                    format!("phone intervals overlap at {}", iv.start_s),
                ));
            }
        }
        let label = iv.label.trim();
        segments.push(PhonemeSegment {
            phoneme: if label.is_empty() { SILENCE.to_string() } else { label.to_string() },
            start_s: iv.start_s,
            end_s: iv.end_s,
        });
    }
    let duration = n_samples as f64 / sample_rate as f64;
    if let Some(last) = segments.last() {
        if last.end_s > duration + END_SLACK_S + 1e-9 {
            return Err(CorpusError::utt(
                id,
                format!("alignment ends at {} s but audio lasts {duration} s", last.end_s),
            ));
        }
    }

    let words: Vec<&Interval> = word_tier
        .iter()
        .filter(|w| !w.label.trim().is_empty())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; segments.len()];
    for (p, seg) in segments.iter().enumerate() {
        let mid = 0.5 * (seg.start_s + seg.end_s);
        let mut hits = words
            .iter()
            .enumerate()
            .filter(|(_, w)| w.start_s <= mid && mid < w.end_s);
        if let Some((w, _)) = hits.next() {
            if hits.next().is_some() {
                return Err(CorpusError::utt(
                    id,
                    format!("phoneme {p} at {mid} s falls inside two word intervals"),
                ));
            }
            owner[p] = Some(w);
        }
    }
    let mut spans: Vec<WordSpan> = Vec::new();
    for (w, iv) in words.iter().enumerate() {
        let idx: Vec<usize> = (0..segments.len()).filter(|&p| owner[p] == Some(w)).collect();
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            continue;
        };
        if idx.len() != last - first + 1 {
            return Err(CorpusError::utt(
                id,
                format!("word {:?} does not cover a contiguous phoneme range", iv.label),
            ));
        }
        spans.push(WordSpan {
            word: iv.label.trim().to_string(),
            first_phoneme_idx: first,
            last_phoneme_idx: last,
        });
    }
    Ok(Utterance {
        id: id.to_string(),
        speaker: speaker.to_string(),
        segments,
        words: spans,
        sample_rate,
        n_samples,
    })
}

/// Integer frame durations per segment.
///
/// The total is `round(span / hop)` where the span runs from the first
/// segment start to the last segment end. Each segment owns the time up to
/// the next segment's start; floors are taken first and the deficit goes to
/// the largest fractional remainders, earliest segment first on ties.
pub fn durations_in_frames(utt: &Utterance, hop_s: f64) -> Result<Vec<usize>, CorpusError> {
    if !(hop_s > 0.0) {
        return Err(CorpusError::utt(&utt.id, format!("hop must be positive, got {hop_s}")));
    }
    let segs = &utt.segments;
    let (Some(first), Some(last)) = (segs.first(), segs.last()) else {
        return Err(CorpusError::utt(&utt.id, "no segments"));
    };
    let total = seconds_to_frames(last.end_s - first.start_s, hop_s);
    let raw: Vec<f64> = segs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let end = segs.get(i + 1).map_or(s.end_s, |n| n.start_s);
            ((end - s.start_s) / hop_s).max(0.0)
        })
        .collect();
    Ok(largest_remainder(&raw, total))
}

/// Apportions `total` integer units in proportion to `raw`.
pub fn largest_remainder(raw: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    if assigned >= total {
        // floors can only exceed the total through rounding of the span
        let mut excess = assigned - total;
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by_key(|&i| (quantize(raw[i] - raw[i].floor()), std::cmp::Reverse(i)));
        for &i in order.iter().cycle().take(raw.len() * 2) {
            if excess == 0 {
                break;
            }
            if out[i] > 0 {
                out[i] -= 1;
                excess -= 1;
            }
        }
        return out;
    }
    let deficit = total - assigned;
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(quantize(raw[i] - raw[i].floor())), i));
    for k in 0..deficit {
        out[order[k % order.len()]] += 1;
    }
    out
}

/// Remainders compared at 1e-9 resolution so float noise does not break ties.
fn quantize(r: f64) -> i64 {
    (r * 1e9).round() as i64
}

/// One manifest record: `id<TAB>speaker<TAB>textgrid_path<TAB>audio_path`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub speaker: String,
    pub textgrid: PathBuf,
    pub audio: PathBuf,
}

/// Reads a manifest; relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::File {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(CorpusError::Manifest {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[0].trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId(id));
        }
        out.push(ManifestEntry {
            id,
            speaker: fields[1].trim().to_string(),
            textgrid: base.join(fields[2].trim()),
            audio: base.join(fields[3].trim()),
        });
    }
    Ok(out)
}

fn pick_tiers(tg: &TextGrid) -> Option<(&Tier, &Tier)> {
    let find = |names: &[&str]| {
        tg.tiers
            .iter()
            .find(|t| names.iter().any(|n| t.name.eq_ignore_ascii_case(n)))
    };
    let phones = find(&["phones", "phone", "phonemes", "phoneme", "segments"]);
    let words = find(&["words", "word"]);
    match (phones, words) {
        (Some(p), Some(w)) => Some((p, w)),
        // Montreal Forced Aligner order: words first, then phones
        _ if tg.tiers.len() == 2 => Some((&tg.tiers[1], &tg.tiers[0])),
        _ => None,
    }
}

pub fn load_utterance(entry: &ManifestEntry) -> Result<Utterance, CorpusError> {
    let tg_text = std::fs::read_to_string(&entry.textgrid).map_err(|e| CorpusError::File {
        path: entry.textgrid.display().to_string(),
        msg: e.to_string(),
    })?;
    let tg = parse_textgrid(&tg_text).map_err(|e| match e {
        CorpusError::TextGrid { line, msg } => CorpusError::File {
            path: entry.textgrid.display().to_string(),
            msg: format!("line {line}: {msg}"),
        },
        e => e,
    })?;
    let (phones, words) = pick_tiers(&tg).ok_or_else(|| CorpusError::File {
        path: entry.textgrid.display().to_string(),
        msg: "no phone/word tier pair found".into(),
    })?;
    let info = wav_info(&entry.audio)?;
    build_utterance(
        &entry.id,
        &phones.intervals,
        &words.intervals,
        &entry.speaker,
        info.sample_rate,
        info.n_samples,
    )
}

/// Loads every manifest entry, in manifest order.
pub fn load_corpus(manifest: &Path) -> Result<AlignedCorpus, CorpusError> {
    load_corpus_with(manifest, Exec::default())
}

pub fn load_corpus_with(manifest: &Path, exec: Exec) -> Result<AlignedCorpus, CorpusError> {
    let entries = read_manifest(manifest)?;
    let utts = exec
        .map(&entries, load_utterance)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    AlignedCorpus::new(utts)
}

/// Deterministic split into `(train, valid)`; the validation set has
/// `round(N · valid_fraction)` utterances. Utterances are ordered by id
/// before shuffling so manifest order does not matter.
pub fn split_corpus(
    corpus: &AlignedCorpus,
    valid_fraction: f64,
    seed: u64,
) -> Result<(AlignedCorpus, AlignedCorpus), CorpusError> {
    let ids: Vec<&str> = corpus.utterances.iter().map(|u| u.id.as_str()).collect();
    let (train, valid) = split_ids(&ids, valid_fraction, seed)?;
    let pick = |set: &HashSet<usize>| {
        AlignedCorpus::new(
            corpus
                .utterances
                .iter()
                .enumerate()
                .filter(|(i, _)| set.contains(i))
                .map(|(_, u)| u.clone())
                .collect(),
        )
    };
    Ok((pick(&train)?, pick(&valid)?))
}

/// Index-level split shared by corpus and G2P data splitting.
pub fn split_ids(
    ids: &[&str],
    valid_fraction: f64,
    seed: u64,
) -> Result<(HashSet<usize>, HashSet<usize>), CorpusError> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(CorpusError::Invalid(format!(
            "validation fraction must be in (0, 1), got {valid_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(ids[b]).then(a.cmp(&b)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_valid = (ids.len() as f64 * valid_fraction).round() as usize;
    let valid: HashSet<usize> = order[..n_valid].iter().copied().collect();
    let train: HashSet<usize> = order[n_valid..].iter().copied().collect();
    Ok((train, valid))
}
