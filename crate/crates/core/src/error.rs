use thiserror::Error;

use crate::corpus::CorpusError;
use crate::g2p::G2pError;
use crate::io::FormatError;
use crate::nn::NnError;
use crate::pitch::PitchError;
use crate::prosody::ProsodyError;
use crate::vocoder::VocoderError;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data, missing files, malformed formats.
    Data,
    /// Non-finite values or failed gradient checks.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    G2p(#[from] G2pError),
    #[error(transparent)]
    Pitch(#[from] PitchError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Prosody(#[from] ProsodyError),
    #[error(transparent)]
    Vocoder(#[from] VocoderError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        let numeric = match self {
            Error::Nn(e) => e.is_numeric(),
            Error::G2p(e) => e.is_numeric(),
            Error::Prosody(e) => e.is_numeric(),
            _ => false,
        };
        if numeric {
            ErrorKind::Numeric
        } else {
            ErrorKind::Data
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
