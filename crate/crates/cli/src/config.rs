use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use ttsfront::g2p::G2pTrainConfig;
use ttsfront::pitch::PitchConfig;
use ttsfront::prosody::ProsodyTrainConfig;
use ttsfront::vocoder::MelConfig;

use crate::DataError;

pub const CONFIG_ENV: &str = "TTSFRONT_CONFIG";
pub const DEFAULT_CONFIG: &str = "ttsfront.toml";

/// Relative paths are taken relative to the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub manifest: PathBuf,
    pub corpus_dump: PathBuf,
    pub pitch_dir: PathBuf,
    pub mel_dir: PathBuf,
    pub words_dir: PathBuf,
    pub g2p_train: PathBuf,
    pub g2p_valid: PathBuf,
    pub g2p_model: PathBuf,
    pub prosody_model: PathBuf,
    pub out_dir: PathBuf,
    pub log_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            manifest: "data/manifest.tsv".into(),
            corpus_dump: "work/corpus.jsonl".into(),
            pitch_dir: "work/pitch".into(),
            mel_dir: "work/mel".into(),
            words_dir: "work/words".into(),
            g2p_train: "data/g2p_train.tsv".into(),
            g2p_valid: "data/g2p_valid.tsv".into(),
            g2p_model: "models/g2p".into(),
            prosody_model: "models/prosody".into(),
            out_dir: "out".into(),
            log_dir: "logs".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Peak level of the debug WAV; 0 leaves the synthesizer's scale.
    pub peak: f32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { seed: 0, peak: 0.9 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Speakers to train on; empty means every speaker in the manifest.
    pub speakers: Vec<String>,
    pub paths: Paths,
    pub pitch: PitchConfig,
    pub mel: MelConfig,
    pub g2p: G2pTrainConfig,
    pub prosody: ProsodyTrainConfig,
    pub synth: SynthConfig,
}

impl PipelineConfig {
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn check(&self) -> anyhow::Result<()> {
        self.pitch.validate()?;
        self.mel.validate()?;
        if (self.mel.hop_s() - self.pitch.hop_s).abs() > 1e-9 {
            bail!(DataError(format!(
                "mel hop {} s and pitch hop {} s differ",
                self.mel.hop_s(),
                self.pitch.hop_s
            )));
        }
        if self.prosody.dims.d_cond != self.mel.n_mels {
            bail!(DataError(format!(
                "prosody.dims.d_cond = {} but mel.n_mels = {}",
                self.prosody.dims.d_cond, self.mel.n_mels
            )));
        }
        Ok(())
    }
}

/// A loaded config plus the directory its relative paths hang off.
pub struct Loaded {
    pub cfg: PipelineConfig,
    pub base: PathBuf,
}

impl Loaded {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn config_path(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(CONFIG_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG)),
    }
}

pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        DataError(format!("cannot read config {}: {e} (run `ttsfront init`)", path.display()))
    })?;
    let cfg: PipelineConfig = toml::from_str(&text)
        .map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    cfg.check().with_context(|| format!("config {}", path.display()))?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { cfg, base })
}
