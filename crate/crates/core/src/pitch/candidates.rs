use super::nccf::nccf_unchecked;
use super::{PitchConfig, PitchError};
use crate::frames::{frame_count, hop_samples};

/// A pitch period hypothesis for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    /// Period in samples at the full rate. Integral unless parabolic
    /// interpolation is enabled.
    pub lag: f64,
    pub nccf: f64,
}

/// Averages blocks of `factor` samples: a box low-pass followed by
/// downsampling.
fn decimate(x: &[f32], factor: usize) -> Vec<f32> {
    x.chunks(factor)
        .map(|c| c.iter().sum::<f32>() / c.len() as f32)
        .collect()
}

/// Local maxima of `vals` (indexed from `first_lag`) above `thresh`,
/// restricted to lags in `[lo, hi]`.
fn peaks(vals: &[f64], first_lag: usize, lo: usize, hi: usize, thresh: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for k in 1..vals.len().saturating_sub(1) {
        let lag = first_lag + k;
        if lag < lo || lag > hi {
            continue;
        }
        if vals[k] > thresh && vals[k] >= vals[k - 1] && vals[k] > vals[k + 1] {
            out.push(lag);
        }
    }
    out
}

/// Per-frame lag candidates from a coarse pass at `pass1_rate` and a
/// full-rate refinement within ±ceil(rate / pass1_rate) samples of each
/// scaled coarse peak. At most `max_cands_per_frame` are kept, highest NCCF
/// first.
pub fn candidates_two_pass(
    signal: &[f32],
    sample_rate: u32,
    cfg: &PitchConfig,
) -> Result<Vec<Vec<Candidate>>, PitchError> {
    cfg.validate()?;
    if (sample_rate as f64) < 2.0 * cfg.f0_max {
        return Err(PitchError::SampleRate {
            sample_rate,
            f0_max: cfg.f0_max,
        });
    }
    let sr = sample_rate as f64;
    let window = cfg.window_samples(sample_rate);
    if signal.len() < window {
        return Err(PitchError::TooShort {
            len: signal.len(),
            window,
        });
    }
    let n_frames = frame_count(signal.len(), sample_rate, cfg.hop_s);
    let hop = hop_samples(sample_rate, cfg.hop_s);
    let (lag_min, lag_max) = (cfg.min_lag(sample_rate), cfg.max_lag(sample_rate));

    let factor = ((sr / cfg.pass1_rate).round() as usize).max(1);
    let rate1 = sr / factor as f64;
    let window1 = ((cfg.corr_window_s * rate1).round() as usize).max(1);
    let lag1_min = ((rate1 / cfg.f0_max).floor() as usize).max(1);
    let lag1_max = (rate1 / cfg.f0_min).ceil() as usize;
    let radius = (sr / cfg.pass1_rate).ceil() as usize;

    // Zero padding so every analysis window and lag stays in bounds.
    let front = window / 2 + factor;
    let back = window + lag_max + radius + hop + 2 * factor;
    let mut padded = vec![0.0f32; front];
    padded.extend_from_slice(signal);
    padded.resize(padded.len() + back, 0.0);
    let coarse = decimate(&padded, factor);

    let mut out = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let centre = i * hop + hop / 2 + front;
        let start = centre - window / 2;

        let start1 = (centre / factor).saturating_sub(window1 / 2);
        let first1 = lag1_min.saturating_sub(1).max(1);
        let last1 = lag1_max + 1;
        let mut vals = Vec::with_capacity(last1 - first1 + 1);
        for lag in first1..=last1 {
            let ok = start1 + window1 + lag <= coarse.len();
            vals.push(if ok { nccf_unchecked(&coarse, start1, window1, lag) } else { 0.0 });
        }
        let coarse_peaks = peaks(&vals, first1, lag1_min, lag1_max, cfg.nccf_cand_thresh);

        let mut cands: Vec<Candidate> = Vec::new();
        for p in coarse_peaks {
            let centre_lag = p * factor;
            let lo = centre_lag.saturating_sub(radius).max(lag_min);
            let hi = (centre_lag + radius).min(lag_max);
            if lo > hi {
                continue;
            }
            let mut best = (lo, f64::NEG_INFINITY);
            let fine: Vec<f64> = (lo..=hi)
                .map(|lag| nccf_unchecked(&padded, start, window, lag))
                .collect();
            for (k, &v) in fine.iter().enumerate() {
                if v > best.1 {
                    best = (lo + k, v);
                }
            }
            if best.1 <= cfg.nccf_cand_thresh {
                continue;
            }
            let mut lag = best.0 as f64;
            let mut value = best.1;
            if cfg.parabolic_interp && best.0 > lag_min && best.0 < lag_max {
                let l = nccf_unchecked(&padded, start, window, best.0 - 1);
                let r = nccf_unchecked(&padded, start, window, best.0 + 1);
                let denom = l - 2.0 * value + r;
                if denom < 0.0 {
                    let delta = (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
                    lag = (lag + delta).clamp(lag_min as f64, lag_max as f64);
                    value = (value - 0.25 * (l - r) * delta).min(1.0);
                }
            }
            if let Some(c) = cands.iter_mut().find(|c| c.lag == lag) {
                c.nccf = c.nccf.max(value);
            } else {
                cands.push(Candidate { lag, nccf: value });
            }
        }
        cands.sort_by(|a, b| b.nccf.total_cmp(&a.nccf).then(a.lag.total_cmp(&b.lag)));
        cands.truncate(cfg.max_cands_per_frame);
        out.push(cands);
    }
    Ok(out)
}
