use super::stft::stft;
use super::{MelConfig, VocoderError};
use crate::corpus::Audio;
use crate::nn::Mat;
use crate::par::Exec;

/// `T × n_mels` natural-log mel energies.
pub type MelFrames = Mat<f32>;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Centre frequencies of the triangular filters.
pub fn mel_center_frequencies(cfg: &MelConfig) -> Vec<f64> {
    edges(cfg)[1..=cfg.n_mels].to_vec()
}

fn edges(cfg: &MelConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect()
}

/// HTK-style triangular filters with unit peak, `n_mels × n_bins`.
pub fn mel_filterbank(cfg: &MelConfig) -> Vec<Vec<f64>> {
    let e = edges(cfg);
    let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
    (0..cfg.n_mels)
        .map(|m| {
            let (l, c, r) = (e[m], e[m + 1], e[m + 2]);
            (0..cfg.n_bins())
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > l && f < r {
                        if f <= c {
                            (f - l) / (c - l)
                        } else {
                            (r - f) / (r - c)
                        }
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Log mel spectrogram of the power spectrum, floored at `log_floor`.
pub fn mel_spectrogram(signal: &[f32], cfg: &MelConfig) -> Result<MelFrames, VocoderError> {
    let s = stft(signal, cfg)?;
    let fb = mel_filterbank(cfg);
    let mut out = Mat::zeros(s.n_frames, cfg.n_mels);
    for t in 0..s.n_frames {
        let power: Vec<f64> = s.frame(t).iter().map(|m| m * m).collect();
        for (m, filt) in fb.iter().enumerate() {
            let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
            out.row_mut(t)[m] = e.max(cfg.log_floor).ln() as f32;
        }
    }
    Ok(out)
}

/// Mel spectrograms for many recordings, in input order.
pub fn mel_many(audios: &[Audio], cfg: &MelConfig, exec: Exec) -> Vec<Result<MelFrames, VocoderError>> {
    exec.map(audios, |a| {
        if a.sample_rate != cfg.sample_rate {
            return Err(VocoderError::SampleRate {
                expected: cfg.sample_rate,
                found: a.sample_rate,
            });
        }
        mel_spectrogram(&a.samples, cfg)
    })
}
