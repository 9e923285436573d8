use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttsfront::corpus::{load_corpus_with, read_manifest, read_wav_mono16, write_wav_mono16, AlignedCorpus};
use ttsfront::g2p::{decode_labels, evaluate_par_sar, g2p_train, read_tsv, G2pModel};
use ttsfront::io::{cache_path, write_file};
use ttsfront::par::Exec;
use ttsfront::pitch::{extract_pitch, read_track, write_track, PitchTrack};
use ttsfront::prosody::{
    analyze_labels, build_batch, infer, load_features, speaker_f0_stats, static_word_vectors, train, write_web,
    FeatureDirs, PhonemeInventory, ProsodyBundle, ProsodyMeta, ProsodyModel, MEL_EXT, PITCH_EXT, RAW_WORDS_EXT,
    WORDS_EXT,
};
use ttsfront::vocoder::{
    debug_synthesize, export_conditioning, import_conditioning, mel_spectrogram, normalize_peak, frame_energy,
    MelConfig,
};

use crate::config::{Loaded, PipelineConfig};
use crate::DataError;

fn or<'a>(flag: &'a Option<PathBuf>, cfg: &Loaded, default: &Path) -> PathBuf {
    flag.clone().unwrap_or_else(|| cfg.path(default))
}

pub fn init(path: &Path, force: bool) -> anyhow::Result<()> {
    let text = PipelineConfig::default().to_toml()?;
    if path.exists() && !force {
        crate::config::load(path)?;
        println!("{} exists; left unchanged", path.display());
        return Ok(());
    }
    write_file(path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn corpus(cfg: &Loaded, manifest: &Option<PathBuf>, exec: Exec) -> anyhow::Result<AlignedCorpus> {
    let m = or(manifest, cfg, &cfg.cfg.paths.manifest);
    Ok(load_corpus_with(&m, exec)?)
}

/// Validates the corpus, dumps it as JSON lines and writes hashed word
/// vectors for utterances that have no word embeddings yet.
pub fn import(cfg: &Loaded, manifest: &Option<PathBuf>, exec: Exec) -> anyhow::Result<()> {
    let c = corpus(cfg, manifest, exec)?;
    write_file(&cfg.path(&cfg.cfg.paths.corpus_dump), c.debug_dump().as_bytes())?;
    let words = cfg.path(&cfg.cfg.paths.words_dir);
    let dim = cfg.cfg.prosody.dims.word_dim;
    let mut generated = 0;
    for u in &c.utterances {
        if cache_path(&words, &u.id, WORDS_EXT).is_file() || cache_path(&words, &u.id, RAW_WORDS_EXT).is_file() {
            continue;
        }
        let w: Vec<&str> = u.words.iter().map(|w| w.word.as_str()).collect();
        write_web(&cache_path(&words, &u.id, WORDS_EXT), &static_word_vectors(&w, dim).vectors)?;
        generated += 1;
    }
    let inv = PhonemeInventory::build(&c);
    println!(
        "{} utterances, {} speakers, {} phoneme types, {generated} word tables generated",
        c.len(),
        c.speakers.len(),
        inv.len() - 1
    );
    Ok(())
}

pub fn extract_pitch_cmd(cfg: &Loaded, manifest: &Option<PathBuf>, out: &Option<PathBuf>, exec: Exec) -> anyhow::Result<()> {
    let entries = read_manifest(&or(manifest, cfg, &cfg.cfg.paths.manifest))?;
    let out = or(out, cfg, &cfg.cfg.paths.pitch_dir);
    let pc = &cfg.cfg.pitch;
    let results = exec.map(&entries, |e| -> anyhow::Result<f64> {
        let a = read_wav_mono16(&e.audio)?;
        let t = extract_pitch(&a.samples, a.sample_rate, pc).with_context(|| format!("utterance {}", e.id))?;
        write_track(&cache_path(&out, &e.id, PITCH_EXT), &t)?;
        Ok(t.voiced_fraction())
    });
    let mut voiced = 0.0;
    for r in results {
        voiced += r?;
    }
    println!(
        "{} pitch tracks in {} (mean voiced fraction {:.3})",
        entries.len(),
        out.display(),
        voiced / entries.len().max(1) as f64
    );
    Ok(())
}

pub fn extract_mel_cmd(cfg: &Loaded, manifest: &Option<PathBuf>, out: &Option<PathBuf>, exec: Exec) -> anyhow::Result<()> {
    let entries = read_manifest(&or(manifest, cfg, &cfg.cfg.paths.manifest))?;
    let out = or(out, cfg, &cfg.cfg.paths.mel_dir);
    let mc = &cfg.cfg.mel;
    let results = exec.map(&entries, |e| -> anyhow::Result<usize> {
        let a = read_wav_mono16(&e.audio)?;
        if a.sample_rate != mc.sample_rate {
            bail!(DataError(format!(
                "{}: sample rate {} but mel.sample_rate is {}",
                e.audio.display(),
                a.sample_rate,
                mc.sample_rate
            )));
        }
        let m = mel_spectrogram(&a.samples, mc).with_context(|| format!("utterance {}", e.id))?;
        export_conditioning(&cache_path(&out, &e.id, MEL_EXT), &m)?;
        Ok(m.rows)
    });
    let mut frames = 0;
    for r in results {
        frames += r?;
    }
    println!("{} mel files in {} ({frames} frames)", entries.len(), out.display());
    Ok(())
}

pub struct G2pTrainArgs {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

pub fn g2p_train_cmd(cfg: &Loaded, a: &G2pTrainArgs, exec: Exec) -> anyhow::Result<()> {
    let p = &cfg.cfg.paths;
    let train = read_tsv(&or(&a.train, cfg, &p.g2p_train))?;
    let valid = read_tsv(&or(&a.valid, cfg, &p.g2p_valid))?;
    let out = or(&a.out, cfg, &p.g2p_model);
    let log_path = a.log.clone().unwrap_or_else(|| cfg.path(&p.log_dir).join("g2p_train.tsv"));
    let mut log = TsvLog::create(&log_path, "epoch\ttrain_loss\tpar\tsar")?;
    let (model, summary) = g2p_train(&train, &valid, &cfg.cfg.g2p, exec, |e| {
        log.line(format!("{}\t{}\t{}\t{}", e.epoch, e.train_loss, e.valid.par, e.valid.sar))
    })?;
    log.finish()?;
    model.save(&out)?;
    let best = &summary.epochs[summary.best_epoch - 1];
    println!(
        "best epoch {} of {}: valid PAR {:.4} SAR {:.4}{}",
        summary.best_epoch,
        summary.epochs.len(),
        best.valid.par,
        best.valid.sar,
        if summary.stopped_early { " (stopped early)" } else { "" }
    );
    Ok(())
}

pub fn g2p_eval_cmd(cfg: &Loaded, data: &Option<PathBuf>, model: &Option<PathBuf>, exec: Exec) -> anyhow::Result<()> {
    let data = read_tsv(&or(data, cfg, &cfg.cfg.paths.g2p_valid))?;
    let m = G2pModel::<f32>::load(&or(model, cfg, &cfg.cfg.paths.g2p_model))?;
    println!("{}", evaluate_par_sar(&m, &data, exec)?);
    Ok(())
}

fn normalize_text(text: &str) -> Vec<char> {
    text.trim().to_lowercase().chars().collect()
}

pub fn g2p_run_cmd(cfg: &Loaded, text: &str, model: &Option<PathBuf>) -> anyhow::Result<()> {
    let m = G2pModel::<f32>::load(&or(model, cfg, &cfg.cfg.paths.g2p_model))?;
    let g = normalize_text(text);
    if g.is_empty() {
        println!();
        return Ok(());
    }
    println!("{}", decode_labels(&m.predict_labels(&g)?).join(" "));
    Ok(())
}

pub struct ProsodyTrainArgs {
    pub manifest: Option<PathBuf>,
    pub steps: Option<u64>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

pub fn prosody_train_cmd(cfg: &Loaded, a: &ProsodyTrainArgs, exec: Exec) -> anyhow::Result<()> {
    let c = &cfg.cfg;
    let mut corpus = corpus(cfg, &a.manifest, exec)?;
    if !c.speakers.is_empty() {
        for s in &c.speakers {
            if !corpus.speakers.contains(s) {
                bail!(DataError(format!("speaker {s:?} has no utterances in the manifest")));
            }
        }
        let keep = corpus.utterances.into_iter().filter(|u| c.speakers.contains(&u.speaker)).collect();
        corpus = AlignedCorpus::new(keep)?;
    }
    let hop_s = c.pitch.hop_s;
    let dirs = FeatureDirs {
        pitch: cfg.path(&c.paths.pitch_dir),
        mel: cfg.path(&c.paths.mel_dir),
        words: cfg.path(&c.paths.words_dir),
    };
    let feats = exec
        .map(&corpus.utterances, |u| load_features(&dirs, &u.id, hop_s))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let tracks: Vec<PitchTrack> = feats.iter().map(|f| f.track.clone()).collect();
    let stats = speaker_f0_stats(&corpus, &tracks)?;
    let inventory = PhonemeInventory::build(&corpus);
    let meta = ProsodyMeta {
        dims: c.prosody.dims.clone(),
        inventory,
        speakers: corpus.speakers.clone(),
        f0_stats: stats,
        hop_s,
    };
    let mut batches = Vec::with_capacity(corpus.len());
    for (u, f) in corpus.utterances.iter().zip(&feats) {
        let spk = meta.speaker_id(&u.speaker)?;
        batches.push(build_batch(u, f, &meta.inventory, spk, &meta.f0_stats[spk], hop_s)?);
    }
    let mut tcfg = c.prosody.clone();
    if let Some(s) = a.steps {
        tcfg.max_steps = s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let model = ProsodyModel::new(meta.dims.clone(), meta.inventory.len(), meta.speakers.len(), &mut rng)?;
    let log_path = a.log.clone().unwrap_or_else(|| cfg.path(&c.paths.log_dir).join("prosody_train.tsv"));
    let mut log = TsvLog::create(&log_path, "step\tlr\tdur\tf0\tvuv\tcond\ttotal")?;
    let (model, steps) = train(model, &batches, &tcfg, exec, |s| {
        let l = &s.losses;
        log.line(format!("{}\t{}\t{}\t{}\t{}\t{}\t{}", s.step, s.lr, l.dur, l.f0, l.vuv, l.cond, l.total))
    })?;
    log.finish()?;
    let out = or(&a.out, cfg, &c.paths.prosody_model);
    ProsodyBundle { meta, model }.save(&out)?;
    match steps.last() {
        Some(s) => println!("{} steps, final loss {:.6}", s.step, s.losses.total),
        None => println!("0 steps"),
    }
    Ok(())
}

pub struct SynthArgs {
    pub text: String,
    pub speaker: String,
    pub out_dir: Option<PathBuf>,
    pub name: String,
    pub seed: Option<u64>,
    pub no_wav: bool,
    pub g2p_model: Option<PathBuf>,
    pub prosody_model: Option<PathBuf>,
}

fn vocode(track: &PitchTrack, cond: &ttsfront::nn::Mat<f32>, mel: &MelConfig, seed: u64, peak: f32) -> anyhow::Result<Vec<f32>> {
    let energy: Vec<f32> = (0..cond.rows).map(|t| frame_energy(cond.row(t))).collect();
    let mut wav = debug_synthesize(&track.f0_hz, &track.voiced, &energy, mel, seed)?;
    if peak > 0.0 {
        normalize_peak(&mut wav, peak);
    }
    Ok(wav)
}

pub fn synth_cmd(cfg: &Loaded, a: &SynthArgs) -> anyhow::Result<()> {
    let c = &cfg.cfg;
    let g2p = G2pModel::<f32>::load(&or(&a.g2p_model, cfg, &c.paths.g2p_model))?;
    let bundle = ProsodyBundle::load(&or(&a.prosody_model, cfg, &c.paths.prosody_model))?;
    let meta = &bundle.meta;
    let spk = meta.speaker_id(&a.speaker)?;
    let g = normalize_text(&a.text);
    if g.is_empty() {
        bail!(DataError("empty text".into()));
    }
    let labels = g2p.predict_labels(&g)?;
    let text = analyze_labels(&g, &labels);
    if text.phonemes.is_empty() {
        bail!(DataError(format!("{:?} has no phonemes", a.text)));
    }
    let ids: Vec<usize> = text.phonemes.iter().map(|p| meta.inventory.id(p)).collect();
    let words = static_word_vectors(&text.words, meta.dims.word_dim).vectors;
    let inf = infer(&bundle.model, &ids, &text.word_of_phoneme, &words, spk, &meta.f0_stats[spk])?;
    let out = or(&a.out_dir, cfg, &c.paths.out_dir);
    let cond_path = cache_path(&out, &a.name, MEL_EXT);
    export_conditioning(&cond_path, &inf.output.cond)?;
    let track = PitchTrack {
        f0_hz: inf.f0_hz.clone(),
        voiced: inf.voiced.clone(),
        hop_s: meta.hop_s,
    };
    write_track(&cache_path(&out, &a.name, PITCH_EXT), &track)?;
    if !a.no_wav {
        let wav = vocode(&track, &inf.output.cond, &c.mel, a.seed.unwrap_or(c.synth.seed), c.synth.peak)?;
        write_wav_mono16(&cache_path(&out, &a.name, "wav"), c.mel.sample_rate, &wav)?;
    }
    let mut s = String::new();
    writeln!(s, "phonemes\t{}", text.phonemes.join(" "))?;
    let d: Vec<String> = inf.durations.iter().map(usize::to_string).collect();
    writeln!(s, "durations\t{}", d.join(" "))?;
    writeln!(s, "frames\t{}", inf.n_frames())?;
    writeln!(s, "voiced_fraction\t{:.4}", inf.voiced_fraction())?;
    print!("{s}");
    Ok(())
}

pub fn debug_vocode_cmd(cfg: &Loaded, cond: &Path, pitch: &Path, out: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let c = &cfg.cfg;
    let m = import_conditioning(cond)?;
    let track = read_track(pitch, c.pitch.hop_s)?;
    if track.len() != m.rows {
        bail!(DataError(format!(
            "{} has {} frames but {} has {}",
            cond.display(),
            m.rows,
            pitch.display(),
            track.len()
        )));
    }
    let wav = vocode(&track, &m, &c.mel, seed.unwrap_or(c.synth.seed), c.synth.peak)?;
    write_wav_mono16(out, c.mel.sample_rate, &wav)?;
    println!("{} samples to {}", wav.len(), out.display());
    Ok(())
}

/// Buffered TSV log; the first write error is kept and reported at the end.
struct TsvLog {
    path: PathBuf,
    w: BufWriter<File>,
    err: Option<std::io::Error>,
}

impl TsvLog {
    fn create(path: &Path, header: &str) -> anyhow::Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        }
        let f = File::create(path).with_context(|| path.display().to_string())?;
        let mut log = TsvLog {
            path: path.to_path_buf(),
            w: BufWriter::new(f),
            err: None,
        };
        log.line(header.to_string());
        Ok(log)
    }

    fn line(&mut self, s: String) {
        if self.err.is_none() {
            if let Err(e) = writeln!(self.w, "{s}") {
                self.err = Some(e);
            }
        }
    }

    fn finish(mut self) -> anyhow::Result<()> {
        if let Some(e) = self.err.take() {
            return Err(e).with_context(|| self.path.display().to_string());
        }
        self.w.flush().with_context(|| self.path.display().to_string())
    }
}
