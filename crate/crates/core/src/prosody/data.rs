//! Feature caches, phoneme inventory and batch assembly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{ProsodyBatch, ProsodyDims, ProsodyModel};
use super::words::read_word_embeddings;
use super::ProsodyError;
use crate::corpus::{durations_in_frames, AlignedCorpus, Utterance};
use crate::frames::seconds_to_frames;
use crate::io::{cache_path, read_json, write_json};
use crate::nn::{checkpoint, Mat};
use crate::pitch::{f0_statistics, normalize_f0, read_track, F0Stats, PitchTrack};
use crate::vocoder::import_conditioning;

pub const UNK_PHONEME: &str = "<unk>";
pub const PITCH_EXT: &str = "ptk";
pub const MEL_EXT: &str = "cnd";
pub const WORDS_EXT: &str = "web";
pub const RAW_WORDS_EXT: &str = "wes";

/// Phoneme symbols; id 0 is reserved for unknown symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeInventory {
    pub symbols: Vec<String>,
}

impl PhonemeInventory {
    pub fn build(corpus: &AlignedCorpus) -> Self {
        let mut s: Vec<String> = corpus
            .utterances
            .iter()
            .flat_map(|u| u.segments.iter().map(|s| s.phoneme.clone()))
            .collect();
        s.sort();
        s.dedup();
        s.retain(|p| p != UNK_PHONEME);
        s.insert(0, UNK_PHONEME.to_string());
        PhonemeInventory { symbols: s }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, p: &str) -> usize {
        self.symbols[1..]
            .binary_search_by(|s| s.as_str().cmp(p))
            .map(|i| i + 1)
            .unwrap_or(0)
    }
}

/// Directories holding per-utterance `id.ptk`, `id.cnd` and `id.web`
/// (or `id.wes`) files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureDirs {
    pub pitch: PathBuf,
    pub mel: PathBuf,
    pub words: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceFeatures {
    pub track: PitchTrack,
    pub mel: Mat<f32>,
    pub words: Mat<f32>,
}

fn require(path: PathBuf) -> Result<PathBuf, ProsodyError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(ProsodyError::MissingFeature(path))
    }
}

fn words_path(dir: &Path, id: &str) -> Result<PathBuf, ProsodyError> {
    let web = cache_path(dir, id, WORDS_EXT);
    if web.is_file() {
        return Ok(web);
    }
    let wes = cache_path(dir, id, RAW_WORDS_EXT);
    if wes.is_file() {
        return Ok(wes);
    }
    Err(ProsodyError::MissingFeature(web))
}

pub fn load_features(dirs: &FeatureDirs, id: &str, hop_s: f64) -> Result<UtteranceFeatures, ProsodyError> {
    let track = read_track(&require(cache_path(&dirs.pitch, id, PITCH_EXT))?, hop_s)?;
    let mel = import_conditioning(&require(cache_path(&dirs.mel, id, MEL_EXT))?)?;
    let words = read_word_embeddings(&words_path(&dirs.words, id)?)?.vectors;
    Ok(UtteranceFeatures { track, mel, words })
}

/// Log-f0 statistics per speaker, in the corpus's speaker order.
pub fn speaker_f0_stats(corpus: &AlignedCorpus, tracks: &[PitchTrack]) -> Result<Vec<F0Stats>, ProsodyError> {
    corpus
        .speakers
        .iter()
        .map(|spk| {
            let own = corpus
                .utterances
                .iter()
                .zip(tracks)
                .filter(|(u, _)| &u.speaker == spk)
                .map(|(_, t)| t);
            f0_statistics(own).map_err(|e| ProsodyError::Speaker {
                speaker: spk.clone(),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Frames `[offset, offset + n)` of a per-frame sequence. One missing
/// trailing frame (alignment ending inside the last hop) repeats the last
/// available frame.
fn frame_window(available: usize, offset: usize, n: usize) -> Result<Vec<usize>, String> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if available == 0 || offset + n > available + 1 {
        return Err(format!(
            "alignment needs frames {offset}..{} but features have {available}",
            offset + n
        ));
    }
    Ok((offset..offset + n).map(|t| t.min(available - 1)).collect())
}

pub fn build_batch(
    utt: &Utterance,
    feats: &UtteranceFeatures,
    inventory: &PhonemeInventory,
    speaker: usize,
    stats: &F0Stats,
    hop_s: f64,
) -> Result<ProsodyBatch, ProsodyError> {
    let bad = |msg: String| ProsodyError::Batch { id: utt.id.clone(), msg };
    let durations = durations_in_frames(utt, hop_s)?;
    if feats.words.rows != utt.words.len() {
        return Err(bad(format!(
            "{} word vectors for {} words",
            feats.words.rows,
            utt.words.len()
        )));
    }
    let offset = seconds_to_frames(utt.segments[0].start_s, hop_s);
    let n: usize = durations.iter().sum();
    let available = feats.track.len().min(feats.mel.rows);
    let frames = frame_window(available, offset, n).map_err(bad)?;
    let z = normalize_f0(&feats.track, stats);
    let mut mel = Mat::zeros(n, feats.mel.cols);
    for (k, &t) in frames.iter().enumerate() {
        mel.row_mut(k).copy_from_slice(feats.mel.row(t));
    }
    Ok(ProsodyBatch {
        id: utt.id.clone(),
        phonemes: utt.segments.iter().map(|s| inventory.id(&s.phoneme)).collect(),
        word_of_phoneme: utt.word_of_phoneme(),
        word_vecs: feats.words.clone(),
        speaker,
        durations,
        f0_norm: frames.iter().map(|&t| z[t]).collect(),
        voiced: frames.iter().map(|&t| feats.track.voiced[t]).collect(),
        mel,
    })
}

/// Everything besides the weights needed to run a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProsodyMeta {
    pub dims: ProsodyDims,
    pub inventory: PhonemeInventory,
    pub speakers: Vec<String>,
    pub f0_stats: Vec<F0Stats>,
    pub hop_s: f64,
}

impl ProsodyMeta {
    pub fn speaker_id(&self, name: &str) -> Result<usize, ProsodyError> {
        self.speakers
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ProsodyError::UnknownSpeaker(name.to_string()))
    }
}

const PARAMS_FILE: &str = "params.nnc";
const META_FILE: &str = "meta.json";

/// A trained model with its metadata; stored as `params.nnc` + `meta.json`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProsodyBundle {
    pub meta: ProsodyMeta,
    pub model: ProsodyModel<f32>,
}

impl ProsodyBundle {
    pub fn save(&self, dir: &Path) -> Result<(), ProsodyError> {
        checkpoint::save(&self.model, &dir.join(PARAMS_FILE))?;
        write_json(&dir.join(META_FILE), &self.meta)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ProsodyError> {
        let meta: ProsodyMeta = read_json(&dir.join(META_FILE))?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut model = ProsodyModel::new(meta.dims.clone(), meta.inventory.len(), meta.speakers.len(), &mut rng)?;
        checkpoint::load_into(&mut model, &dir.join(PARAMS_FILE))?;
        Ok(ProsodyBundle { meta, model })
    }
}
