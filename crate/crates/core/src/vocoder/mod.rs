//! Mel features used as the conditioning target, the CND1 hand-off format
//! for an external vocoder, and a small excitation synthesizer for
//! listening checks.

mod cond;
mod mel;
mod stft;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cond::{decode_conditioning, encode_conditioning, export_conditioning, import_conditioning};
pub use mel::{hz_to_mel, mel_center_frequencies, mel_filterbank, mel_many, mel_spectrogram, mel_to_hz, MelFrames};
pub use stft::{reflect_index, stft, windowed_frame, Stft};
pub use synth::{debug_synthesize, frame_energy, normalize_peak};

#[derive(Debug, Error)]
pub enum VocoderError {
    #[error("invalid mel config: {0}")]
    Config(String),
    #[error("empty signal")]
    EmptySignal,
    #[error("audio is {found} Hz but the mel config expects {expected} Hz")]
    SampleRate { expected: u32, found: u32 },
    #[error("frame arrays differ in length: f0 {f0}, voiced {voiced}, energy {energy}")]
    Lengths { f0: usize, voiced: usize, energy: usize },
}

impl VocoderError {
    pub fn is_numeric(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub hop: usize,
    pub win: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            sample_rate: 24_000,
            hop: 240,
            win: 1024,
            n_fft: 1024,
            n_mels: 80,
            fmin: 0.0,
            fmax: 12_000.0,
            log_floor: 1e-5,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<(), VocoderError> {
        let bad = |m: String| Err(VocoderError::Config(m));
        if !self.n_fft.is_power_of_two() {
            return bad(format!("n_fft {} is not a power of two", self.n_fft));
        }
        if !(self.hop >= 1 && self.hop <= self.win && self.win <= self.n_fft) {
            return bad("need 1 <= hop <= win <= n_fft".into());
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= self.sample_rate as f64 / 2.0) {
            return bad("need 0 <= fmin < fmax <= sample_rate / 2".into());
        }
        if self.n_mels == 0 || !(self.log_floor > 0.0) {
            return bad("n_mels and log_floor must be positive".into());
        }
        Ok(())
    }

    pub fn hop_s(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}
