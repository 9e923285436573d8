use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{MelConfig, VocoderError};
use crate::frames::frame_count;

/// One-sided magnitude spectrogram, `n_frames × n_bins` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Stft {
    pub n_frames: usize,
    pub n_bins: usize,
    pub mag: Vec<f64>,
}

impl Stft {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.mag[t * self.n_bins..(t + 1) * self.n_bins]
    }
}

/// Mirrors an out-of-range index back into `0..n` (reflection without
/// repeating the edge sample), for any distance from the edge.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m < n as isize { m } else { period - m }) as usize
}

fn hann(win: usize) -> Vec<f64> {
    (0..win)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / win as f64).cos())
        .collect()
}

/// Frame `t` centred on the middle of its hop, Hann-windowed and placed in
/// the middle of an `n_fft` buffer. Samples beyond the edges are reflected.
pub fn windowed_frame(signal: &[f32], cfg: &MelConfig, t: usize) -> Vec<f64> {
    windowed_with(signal, cfg, t, &hann(cfg.win))
}

fn windowed_with(signal: &[f32], cfg: &MelConfig, t: usize, window: &[f64]) -> Vec<f64> {
    let centre = (t * cfg.hop + cfg.hop / 2) as isize;
    let start = centre - (cfg.win / 2) as isize;
    let offset = (cfg.n_fft - cfg.win) / 2;
    let mut buf = vec![0.0; cfg.n_fft];
    for (k, w) in window.iter().enumerate() {
        let s = signal[reflect_index(start + k as isize, signal.len())] as f64;
        buf[offset + k] = s * w;
    }
    buf
}

/// Magnitude STFT; the frame count follows the shared frame rule.
pub fn stft(signal: &[f32], cfg: &MelConfig) -> Result<Stft, VocoderError> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(VocoderError::EmptySignal);
    }
    let n_frames = frame_count(signal.len(), cfg.sample_rate, cfg.hop_s());
    let n_bins = cfg.n_bins();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(cfg.n_fft);
    let window = hann(cfg.win);
    let mut mag = Vec::with_capacity(n_frames * n_bins);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    for t in 0..n_frames {
        let frame = windowed_with(signal, cfg, t, &window);
        for (b, x) in buf.iter_mut().zip(frame) {
            *b = Complex::new(x, 0.0);
        }
        fft.process(&mut buf);
        mag.extend(buf[..n_bins].iter().map(|c| c.norm()));
    }
    Ok(Stft { n_frames, n_bins, mag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::sine;

    #[test]
    fn reflection() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, [2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(-7, 1), 0);
    }

    #[test]
    fn dc_goes_to_bin_zero() {
        let s = stft(&vec![1.0; 4800], &MelConfig::default()).unwrap();
        for t in 0..s.n_frames {
            let f = s.frame(t);
            let total: f64 = f.iter().map(|m| m * m).sum();
            assert!(f[0] * f[0] > 0.5 * total);
        }
    }

    #[test]
    fn sine_peak_bin() {
        let cfg = MelConfig::default();
        let s = stft(&sine(1000.0, 0.5, 0.5, 24_000), &cfg).unwrap();
        let want = (1000.0 * cfg.n_fft as f64 / 24_000.0).round() as usize;
        // edge frames see the reflected (phase-flipped) signal
        let edge = cfg.win / 2 / cfg.hop + 1;
        for t in edge..s.n_frames - edge {
            let f = s.frame(t);
            let arg = (0..f.len()).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
            assert_eq!(arg, want, "frame {t}");
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        let cfg = MelConfig {
            n_fft: 1000,
            win: 800,
            ..Default::default()
        };
        assert!(matches!(stft(&[0.0; 100], &cfg), Err(VocoderError::Config(_))));
        assert!(matches!(stft(&[], &MelConfig::default()), Err(VocoderError::EmptySignal)));
    }
}
