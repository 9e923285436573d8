use std::path::Path;

use super::CorpusError;

/// Mono PCM16 audio as floats in [-1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub n_samples: usize,
}

fn file_err(path: &Path, msg: impl Into<String>) -> CorpusError {
    CorpusError::File {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn open(path: &Path) -> Result<hound::WavReader<std::io::BufReader<std::fs::File>>, CorpusError> {
    let r = hound::WavReader::open(path).map_err(|e| file_err(path, e.to_string()))?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(file_err(path, format!("{} channels, expected mono", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(file_err(path, "expected 16-bit integer PCM"));
    }
    Ok(r)
}

pub fn wav_info(path: &Path) -> Result<WavInfo, CorpusError> {
    let r = open(path)?;
    Ok(WavInfo {
        sample_rate: r.spec().sample_rate,
        n_samples: r.duration() as usize,
    })
}

pub fn read_wav_mono16(path: &Path) -> Result<Audio, CorpusError> {
    let mut r = open(path)?;
    let sample_rate = r.spec().sample_rate;
    let samples = r
        .samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| file_err(path, e.to_string()))?;
    Ok(Audio {
        sample_rate,
        samples,
    })
}

/// Writes mono PCM16; samples are clipped to [-1, 1].
pub fn write_wav_mono16(path: &Path, sample_rate: u32, samples: &[f32]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| file_err(parent, e.to_string()))?;
        }
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| file_err(path, e.to_string()))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(|e| file_err(path, e.to_string()))?;
    }
    w.finalize().map_err(|e| file_err(path, e.to_string()))
}
