use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ttsfront::par::Exec;
use ttsfront::ErrorKind;

mod commands;
mod config;

use commands::*;

/// Exit code for usage errors; clap's own errors are mapped here too.
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Bad input that is not already a typed library error.
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

#[derive(Parser)]
#[command(name = "ttsfront", version, about = "TTS front-end: g2p, pitch, prosody and vocoder conditioning")]
struct Cli {
    /// Config file (default: $TTSFRONT_CONFIG, then ./ttsfront.toml)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for data-parallel stages
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a config file with every default spelled out
    Init {
        /// Overwrite an existing config
        #[arg(long)]
        force: bool,
    },
    /// Load and validate the aligned corpus; fill in missing word vectors
    Import {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Track pitch for every manifest entry (PTK1 caches)
    ExtractPitch {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Log-mel targets for every manifest entry (CND1 caches)
    ExtractMel {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the grapheme-to-phoneme tagger with early stopping on SAR
    G2pTrain {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        /// Model directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-epoch TSV log
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Phoneme and sentence accuracy on a labelled TSV
    G2pEval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Transcribe text to phonemes and punctuation tokens
    G2pRun {
        #[arg(long)]
        text: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train the prosody network on cached features
    ProsodyTrain {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Override the configured step count
        #[arg(long)]
        steps: Option<u64>,
        /// Model directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-step TSV loss log
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Text to conditioning frames, pitch track and a debug WAV
    Synth {
        #[arg(long)]
        text: String,
        #[arg(long)]
        speaker: String,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Stem of the output files
        #[arg(long, default_value = "synth")]
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip the debug WAV
        #[arg(long)]
        no_wav: bool,
        #[arg(long)]
        g2p_model: Option<PathBuf>,
        #[arg(long)]
        prosody_model: Option<PathBuf>,
    },
    /// Render a CND1 + PTK1 pair with the debug synthesizer
    DebugVocode {
        #[arg(long)]
        cond: PathBuf,
        #[arg(long)]
        pitch: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        let numeric = if let Some(x) = cause.downcast_ref::<ttsfront::Error>() {
            x.kind() == ErrorKind::Numeric
        } else if let Some(x) = cause.downcast_ref::<ttsfront::prosody::ProsodyError>() {
            x.is_numeric()
        } else if let Some(x) = cause.downcast_ref::<ttsfront::g2p::G2pError>() {
            x.is_numeric()
        } else if let Some(x) = cause.downcast_ref::<ttsfront::nn::NnError>() {
            x.is_numeric()
        } else {
            continue;
        };
        return if numeric { EXIT_NUMERIC } else { EXIT_DATA };
    }
    EXIT_DATA
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = config::config_path(cli.config.as_deref());
    if let Cmd::Init { force } = cli.cmd {
        return init(&path, force);
    }
    let cfg = config::load(&path)?;
    let exec = if cli.jobs > 1 { Exec::Parallel } else { Exec::Sequential };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs as usize).build()?;
    pool.install(|| match cli.cmd {
        Cmd::Init { .. } => unreachable!(),
        Cmd::Import { manifest } => import(&cfg, &manifest, exec),
        Cmd::ExtractPitch { manifest, out_dir } => extract_pitch_cmd(&cfg, &manifest, &out_dir, exec),
        Cmd::ExtractMel { manifest, out_dir } => extract_mel_cmd(&cfg, &manifest, &out_dir, exec),
        Cmd::G2pTrain { train, valid, out, log } => g2p_train_cmd(&cfg, &G2pTrainArgs { train, valid, out, log }, exec),
        Cmd::G2pEval { data, model } => g2p_eval_cmd(&cfg, &data, &model, exec),
        Cmd::G2pRun { text, model } => g2p_run_cmd(&cfg, &text, &model),
        Cmd::ProsodyTrain { manifest, steps, out, log } => {
            prosody_train_cmd(&cfg, &ProsodyTrainArgs { manifest, steps, out, log }, exec)
        }
        Cmd::Synth { text, speaker, out_dir, name, seed, no_wav, g2p_model, prosody_model } => synth_cmd(
            &cfg,
            &SynthArgs { text, speaker, out_dir, name, seed, no_wav, g2p_model, prosody_model },
        ),
        Cmd::DebugVocode { cond, pitch, out, seed } => debug_vocode_cmd(&cfg, &cond, &pitch, &out, seed),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
