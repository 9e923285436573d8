//! Hybrid grapheme-to-phoneme conversion as 1:1 sequence labelling.

mod eval;
mod labels;
mod model;
mod train;

use thiserror::Error;

pub use eval::{evaluate_par_sar, score_predictions, G2pEvalReport};
pub use labels::{
    decode_labels, encode_alignment, format_tsv, is_punctuation, parse_tsv, phoneme_count, read_tsv,
    write_tsv, LabelSequence, JOIN, SPACE_TOKEN, VOID,
};
pub use model::{transcribe, G2pCache, G2pDims, G2pModel, Vocab, UNK};
pub use train::{g2p_train, replay_trace, EarlyStopping, EpochLog, G2pTrainConfig, G2pTrainLog, StopDecision};

use crate::io::FormatError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum G2pError {
    #[error("{graphemes} graphemes but {labels} labels")]
    Mismatch { graphemes: usize, labels: usize },
    #[error("invalid phoneme {0:?}")]
    InvalidPhoneme(String),
    #[error("{path}:{line}: {msg}")]
    Tsv { path: String, line: usize, msg: String },
    #[error("empty input")]
    EmptyInput,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {0:?} is not in the model's alphabet")]
    UnknownLabel(String),
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl G2pError {
    pub fn is_numeric(&self) -> bool {
        match self {
            G2pError::NonFinite { .. } => true,
            G2pError::Nn(e) => e.is_numeric(),
            _ => false,
        }
    }
}
