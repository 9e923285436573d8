//! RAPT-style pitch tracking: a coarse NCCF pass on a decimated signal
//! proposes lag candidates, a full-rate pass refines them, and a dynamic
//! program picks one voiced candidate or the unvoiced state per frame.

mod cache;
mod candidates;
mod dp;
mod nccf;
mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{decode_track, encode_track, read_track, write_track};
pub use candidates::{candidates_two_pass, Candidate};
pub use dp::{dp_path, dp_track, local_cost, transition_cost, DpPath};
pub use nccf::nccf;
pub use stats::{denormalize_f0, f0_statistics, normalize_f0, F0Stats, MIN_VOICED_FRAMES};

use crate::corpus::Audio;
use crate::par::Exec;

#[derive(Debug, Error)]
pub enum PitchError {
    #[error("invalid pitch config: {0}")]
    Config(String),
    #[error("lag {lag} with window {window} at frame start {start} exceeds signal of {len} samples")]
    OutOfRange {
        start: usize,
        window: usize,
        lag: usize,
        len: usize,
    },
    #[error("sample rate {sample_rate} Hz is below twice f0_max ({f0_max} Hz)")]
    SampleRate { sample_rate: u32, f0_max: f64 },
    #[error("signal of {len} samples is shorter than one correlation window ({window})")]
    TooShort { len: usize, window: usize },
    #[error("only {found} voiced frames, at least {needed} required")]
    TooFewVoiced { found: usize, needed: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub f0_min: f64,
    pub f0_max: f64,
    pub hop_s: f64,
    pub corr_window_s: f64,
    pub pass1_rate: f64,
    pub nccf_cand_thresh: f64,
    pub max_cands_per_frame: usize,
    pub vuv_transition_cost: f64,
    pub freq_jump_weight: f64,
    pub unvoiced_local_cost: f64,
    /// Penalty growing linearly with lag, `lag_weight · lag / max_lag`,
    /// scaled by the NCCF. Breaks the tie between a period and its
    /// multiples on strictly periodic input; 0 gives the plain `1 − nccf`.
    pub lag_weight: f64,
    /// Refine integer lags with a parabola through neighbouring NCCF values.
    pub parabolic_interp: bool,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            f0_min: 60.0,
            f0_max: 400.0,
            hop_s: 0.010,
            corr_window_s: 0.025,
            pass1_rate: 2000.0,
            nccf_cand_thresh: 0.30,
            max_cands_per_frame: 20,
            vuv_transition_cost: 0.4,
            freq_jump_weight: 0.5,
            unvoiced_local_cost: 0.5,
            lag_weight: 0.05,
            parabolic_interp: false,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<(), PitchError> {
        let bad = |m: &str| Err(PitchError::Config(m.to_string()));
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return bad("need 0 < f0_min < f0_max");
        }
        if !(self.f0_max < self.pass1_rate / 2.0) {
            return bad("need f0_max < pass1_rate / 2");
        }
        if !(self.hop_s > 0.0 && self.corr_window_s > 0.0) {
            return bad("hop and correlation window must be positive");
        }
        if self.max_cands_per_frame == 0 {
            return bad("max_cands_per_frame must be at least 1");
        }
        for (name, v) in [
            ("vuv_transition_cost", self.vuv_transition_cost),
            ("freq_jump_weight", self.freq_jump_weight),
            ("unvoiced_local_cost", self.unvoiced_local_cost),
            ("lag_weight", self.lag_weight),
        ] {
            if !(v >= 0.0) {
                return Err(PitchError::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Shortest candidate lag in samples.
    pub fn min_lag(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 / self.f0_max).ceil() as usize
    }

    /// Longest candidate lag in samples.
    pub fn max_lag(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 / self.f0_min).floor() as usize
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.corr_window_s * sample_rate as f64).round().max(1.0) as usize
    }
}

/// Per-frame f0 (0 when unvoiced) and voicing.
#[derive(Clone, Debug, PartialEq)]
pub struct PitchTrack {
    pub f0_hz: Vec<f32>,
    pub voiced: Vec<bool>,
    pub hop_s: f64,
}

impl PitchTrack {
    pub fn unvoiced(n: usize, hop_s: f64) -> Self {
        PitchTrack {
            f0_hz: vec![0.0; n],
            voiced: vec![false; n],
            hop_s,
        }
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.voiced_count() as f64 / self.len() as f64
        }
    }

    /// Checks voiced ⇔ nonzero f0 and the frequency bounds.
    pub fn check_invariants(&self, f0_min: f64, f0_max: f64) -> Result<(), String> {
        if self.f0_hz.len() != self.voiced.len() {
            return Err("f0 and voicing lengths differ".into());
        }
        for (i, (&f, &v)) in self.f0_hz.iter().zip(&self.voiced).enumerate() {
            let f = f as f64;
            if !v && f != 0.0 {
                return Err(format!("frame {i}: unvoiced with f0 {f}"));
            }
            // f32 storage may round a boundary value by one ulp
            if v && !(f >= f0_min * (1.0 - 1e-6) && f <= f0_max * (1.0 + 1e-6)) {
                return Err(format!("frame {i}: f0 {f} outside [{f0_min}, {f0_max}]"));
            }
        }
        Ok(())
    }
}

/// Full pipeline: candidates, then DP.
pub fn extract_pitch(audio: &[f32], sample_rate: u32, cfg: &PitchConfig) -> Result<PitchTrack, PitchError> {
    let cands = candidates_two_pass(audio, sample_rate, cfg)?;
    Ok(dp_track(&cands, sample_rate, cfg))
}

/// Extracts pitch for many recordings; results keep input order.
pub fn extract_many(audios: &[Audio], cfg: &PitchConfig, exec: Exec) -> Vec<Result<PitchTrack, PitchError>> {
    exec.map(audios, |a| extract_pitch(&a.samples, a.sample_rate, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::frame_count;

    fn sine(f0: f64, secs: f64, sr: u32) -> Vec<f32> {
        let n = (secs * sr as f64) as usize;
        (0..n)
            .map(|i| (0.5 * (2.0 * std::f64::consts::PI * f0 * i as f64 / sr as f64).sin()) as f32)
            .collect()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn sine_150() {
        let cfg = PitchConfig::default();
        let t = extract_pitch(&sine(150.0, 2.0, 24_000), 24_000, &cfg).unwrap();
        assert_eq!(t.len(), 200);
        assert!(t.voiced_fraction() >= 0.95, "{}", t.voiced_fraction());
        let voiced: Vec<f64> = t
            .f0_hz
            .iter()
            .zip(&t.voiced)
            .filter(|(_, &v)| v)
            .map(|(&f, _)| f as f64)
            .collect();
        assert!((median(voiced) - 150.0).abs() < 1.5);
        t.check_invariants(cfg.f0_min, cfg.f0_max).unwrap();
    }

    #[test]
    fn silence_is_unvoiced() {
        let t = extract_pitch(&vec![0.0; 48_000], 24_000, &PitchConfig::default()).unwrap();
        assert_eq!(t.voiced_count(), 0);
    }

    #[test]
    fn voicing_boundary() {
        let mut x = sine(150.0, 0.5, 24_000);
        x.extend(std::iter::repeat(0.0).take(12_000));
        let t = extract_pitch(&x, 24_000, &PitchConfig::default()).unwrap();
        // the true boundary is at frame 50
        let last_voiced = t.voiced.iter().rposition(|&v| v).unwrap();
        let first_unvoiced = t.voiced.iter().position(|&v| !v).unwrap();
        assert!((last_voiced as i64 + 1 - 50).abs() <= 3, "{last_voiced}");
        assert!((first_unvoiced as i64 - 50).abs() <= 3, "{first_unvoiced}");
    }

    #[test]
    fn frame_count_matches_shared_rule() {
        for n in [600usize, 1000, 2399, 2400, 2520, 4321] {
            let x: Vec<f32> = (0..n).map(|i| ((i * 7919) % 13) as f32 / 13.0 - 0.5).collect();
            let t = extract_pitch(&x, 24_000, &PitchConfig::default()).unwrap();
            assert_eq!(t.len(), frame_count(n, 24_000, 0.01), "n = {n}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = PitchConfig::default();
        c.f0_max = 1500.0;
        assert!(c.validate().is_err());
        let c = PitchConfig {
            f0_min: 500.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
