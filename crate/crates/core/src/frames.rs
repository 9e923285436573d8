//! The single frame-count rule shared by durations, pitch and mel.

/// Slack added before rounding so that exact half-frame spans round up the
/// same way whether they were computed from seconds or from sample counts.
const HALF_TIE_EPS: f64 = 1e-9;

/// Number of frames covering `span_s` seconds at hop `hop_s`.
pub fn seconds_to_frames(span_s: f64, hop_s: f64) -> usize {
    debug_assert!(hop_s > 0.0);
    let x = span_s / hop_s;
    if x <= 0.0 {
        0
    } else {
        (x + HALF_TIE_EPS).round() as usize
    }
}

/// Number of frames for an audio buffer.
pub fn frame_count(n_samples: usize, sample_rate: u32, hop_s: f64) -> usize {
    seconds_to_frames(n_samples as f64 / sample_rate as f64, hop_s)
}

/// Hop expressed in whole samples.
pub fn hop_samples(sample_rate: u32, hop_s: f64) -> usize {
    (hop_s * sample_rate as f64).round().max(1.0) as usize
}
