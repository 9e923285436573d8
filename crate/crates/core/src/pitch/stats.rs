use super::{PitchError, PitchTrack};
use serde::{Deserialize, Serialize};

pub const MIN_VOICED_FRAMES: usize = 100;
const STD_FLOOR: f64 = 1e-3;

/// Log-f0 mean and standard deviation over voiced frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F0Stats {
    pub mean: f64,
    pub std: f64,
}

/// Population statistics of ln f0 over all voiced frames of the tracks.
pub fn f0_statistics<'a, I>(tracks: I) -> Result<F0Stats, PitchError>
where
    I: IntoIterator<Item = &'a PitchTrack>,
{
    let logs: Vec<f64> = tracks
        .into_iter()
        .flat_map(|t| t.f0_hz.iter().zip(&t.voiced))
        .filter(|(_, &v)| v)
        .map(|(&f, _)| (f as f64).ln())
        .collect();
    if logs.len() < MIN_VOICED_FRAMES {
        return Err(PitchError::TooFewVoiced {
            found: logs.len(),
            needed: MIN_VOICED_FRAMES,
        });
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(F0Stats {
        mean,
        std: var.sqrt().max(STD_FLOOR),
    })
}

/// `(ln f0 − mean) / std` on voiced frames, 0 elsewhere.
pub fn normalize_f0(track: &PitchTrack, stats: &F0Stats) -> Vec<f32> {
    track
        .f0_hz
        .iter()
        .zip(&track.voiced)
        .map(|(&f, &v)| {
            if v {
                (((f as f64).ln() - stats.mean) / stats.std) as f32
            } else {
                0.0
            }
        })
        .collect()
}

/// Inverse of [`normalize_f0`] for one voiced value.
pub fn denormalize_f0(z: f64, stats: &F0Stats) -> f64 {
    (z * stats.std + stats.mean).exp()
}
