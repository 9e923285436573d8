//! Prosody network: a shared conv + BiLSTM backbone over phoneme and
//! speaker embeddings, joined with word vectors, feeding a duration stack
//! at phoneme level and pitch and conditioning stacks at frame level.

mod data;
mod model;
mod regulate;
mod text;
mod train;
mod words;

use std::path::PathBuf;

use thiserror::Error;

pub use data::{
    build_batch, load_features, speaker_f0_stats, FeatureDirs, PhonemeInventory, ProsodyBundle, ProsodyMeta,
    UtteranceFeatures, MEL_EXT, PITCH_EXT, RAW_WORDS_EXT, UNK_PHONEME, WORDS_EXT,
};
pub use model::{
    compute_losses, infer, FrameCache, Inference, LossWeights, Losses, OutputGrads, PhonemeCache, ProsodyBatch,
    ProsodyDims, ProsodyModel, ProsodyOutput,
};
pub use regulate::{build_index, regulate_backward, regulate_length};
pub use text::{analyze_labels, TextAnalysis};
pub use train::{preflight_gradcheck, train, ProsodyTrainConfig, StepLog};
pub use words::{
    decode_wes, decode_word_embeddings, encode_web, encode_wes, read_word_embeddings, reduce_subtokens,
    static_word_vectors, upsample_words_to_phonemes, write_web, Provenance, SubtokenMap, WordEmbeddingTable,
};

use crate::corpus::CorpusError;
use crate::io::FormatError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ProsodyError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("subtoken map: {0}")]
    Subtokens(String),
    #[error("utterance {id}: {msg}")]
    Batch { id: String, msg: String },
    #[error("missing feature file {}", .0.display())]
    MissingFeature(PathBuf),
    #[error("empty phoneme sequence")]
    EmptyInput,
    #[error("unknown speaker {0:?}")]
    UnknownSpeaker(String),
    #[error("speaker {speaker}: {msg}")]
    Speaker { speaker: String, msg: String },
    #[error("non-finite loss at step {step}")]
    NonFinite { step: u64 },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl ProsodyError {
    pub fn is_numeric(&self) -> bool {
        match self {
            ProsodyError::NonFinite { .. } => true,
            ProsodyError::Nn(e) => e.is_numeric(),
            _ => false,
        }
    }
}
