use super::PitchError;

/// Energy below which a window is treated as silent.
pub(crate) const ENERGY_FLOOR: f64 = 1e-9;

/// Normalized cross-correlation between `s[start..start+window]` and the
/// same window shifted by `lag`. Returns 0 when either window is silent.
pub fn nccf(signal: &[f32], start: usize, window: usize, lag: usize) -> Result<f64, PitchError> {
    if start + window + lag > signal.len() {
        return Err(PitchError::OutOfRange {
            start,
            window,
            lag,
            len: signal.len(),
        });
    }
    Ok(nccf_unchecked(signal, start, window, lag))
}

pub(crate) fn nccf_unchecked(signal: &[f32], start: usize, window: usize, lag: usize) -> f64 {
    let a = &signal[start..start + window];
    let b = &signal[start + lag..start + lag + window];
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa < ENERGY_FLOOR || bb < ENERGY_FLOOR {
        return 0.0;
    }
    (ab / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(f0: f64, n: usize, sr: f64) -> Vec<f32> {
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 / sr).cos() as f32)
            .collect()
    }

    #[test]
    fn full_and_half_period() {
        let x = cosine(100.0, 4800, 24_000.0);
        assert!((nccf(&x, 100, 600, 240).unwrap() - 1.0).abs() < 1e-3);
        assert!((nccf(&x, 100, 600, 120).unwrap() + 1.0).abs() < 1e-3);
    }

    #[test]
    fn silence_is_zero() {
        assert_eq!(nccf(&[0.0; 2000], 0, 600, 240).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(
            nccf(&[0.0; 100], 10, 50, 41),
            Err(PitchError::OutOfRange { .. })
        ));
        assert!(nccf(&[0.0; 100], 10, 50, 40).is_ok());
    }
}
