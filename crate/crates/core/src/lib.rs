//! End-to-end TTS front-end.
//!
//! The crate covers the whole path from aligned recordings to frame-level
//! vocoder conditioning:
//!
//! - [`corpus`]: TextGrid alignments, WAV metadata, manifests and frame durations.
//! - [`g2p`]: 1:1 grapheme labelling codec and a conv + BiLSTM tagger.
//! - [`pitch`]: RAPT-style two-pass NCCF pitch tracker with DP voicing.
//! - [`nn`]: small reverse-mode layer library (conv1d, BiLSTM, losses, Adam).
//! - [`prosody`]: shared backbone with duration, pitch and conditioning stacks.
//! - [`vocoder`]: STFT/mel targets, conditioning export and a debug synthesizer.
//!
//! Data-parallel loops (feature extraction, evaluation, gradient checks and
//! per-utterance gradients) go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod corpus;
pub mod error;
pub mod frames;
pub mod g2p;
pub mod io;
pub mod nn;
pub mod par;
pub mod pitch;
pub mod prosody;
pub mod synthetic;
pub mod vocoder;

pub use error::{Error, ErrorKind, Result};
