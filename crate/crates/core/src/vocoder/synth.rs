use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MelConfig, VocoderError};

/// Per-frame energy from a log-mel row: the exponentiated mean.
pub fn frame_energy(log_mel_row: &[f32]) -> f32 {
    if log_mel_row.is_empty() {
        return 0.0;
    }
    let mean = log_mel_row.iter().map(|&v| v as f64).sum::<f64>() / log_mel_row.len() as f64;
    mean.exp() as f32
}

/// Excitation-only synthesis, `T · hop` samples. Voiced frames get a
/// band-limited pulse train whose phase runs on across frames; unvoiced
/// frames get seeded white noise. Both are scaled by the frame energy.
pub fn debug_synthesize(
    f0_hz: &[f32],
    voiced: &[bool],
    energy: &[f32],
    cfg: &MelConfig,
    seed: u64,
) -> Result<Vec<f32>, VocoderError> {
    if f0_hz.len() != voiced.len() || f0_hz.len() != energy.len() {
        return Err(VocoderError::Lengths {
            f0: f0_hz.len(),
            voiced: voiced.len(),
            energy: energy.len(),
        });
    }
    let sr = cfg.sample_rate as f64;
    let nyquist = sr / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(f0_hz.len() * cfg.hop);
    for t in 0..f0_hz.len() {
        let e = energy[t] as f64;
        let f0 = f0_hz[t] as f64;
        if voiced[t] && f0 > 0.0 {
            let harmonics = ((nyquist / f0).floor() as usize).max(1);
            for _ in 0..cfg.hop {
                phase = (phase + 2.0 * std::f64::consts::PI * f0 / sr) % (2.0 * std::f64::consts::PI);
                let s: f64 = (1..=harmonics).map(|h| (h as f64 * phase).cos()).sum();
                out.push((e * s / harmonics as f64) as f32);
            }
        } else {
            for _ in 0..cfg.hop {
                let n: f64 = rng.gen_range(-1.0..1.0);
                out.push((e * n) as f32);
            }
        }
    }
    Ok(out)
}

/// Scales so the largest magnitude is `peak`; silence stays silent.
pub fn normalize_peak(samples: &mut [f32], peak: f32) {
    let m = samples.iter().fold(0.0f32, |a, &s| a.max(s.abs()));
    if m > 0.0 {
        let g = peak / m;
        for s in samples {
            *s *= g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voiced_autocorrelation_peaks_at_period() {
        let cfg = MelConfig::default();
        let n = 100;
        let y = debug_synthesize(&vec![100.0; n], &vec![true; n], &vec![1.0; n], &cfg, 0).unwrap();
        assert_eq!(y.len(), n * 240);
        let ac = |lag: usize| -> f64 { y.iter().zip(&y[lag..]).map(|(a, b)| (*a as f64) * (*b as f64)).sum() };
        let best = (120..=400).max_by(|&a, &b| ac(a).total_cmp(&ac(b))).unwrap();
        assert!((best as i64 - 240).abs() <= 1, "{best}");
    }

    #[test]
    fn unvoiced_noise_and_silence() {
        let cfg = MelConfig::default();
        let n = 100;
        let y = debug_synthesize(&vec![0.0; n], &vec![false; n], &vec![1.0; n], &cfg, 5).unwrap();
        let mean = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        assert!(mean.abs() < 0.01);
        let z = debug_synthesize(&vec![120.0; n], &vec![true; n], &vec![0.0; n], &cfg, 5).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
        assert!(debug_synthesize(&[1.0], &[true, false], &[1.0], &cfg, 0).is_err());
    }

    #[test]
    fn energy_of_floor_row() {
        assert!((frame_energy(&[0.0, 0.0]) - 1.0).abs() < 1e-7);
        assert_eq!(frame_energy(&[]), 0.0);
    }
}
