use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Losses, LossWeights, ProsodyBatch, ProsodyDims, ProsodyModel};
use super::ProsodyError;
use crate::nn::gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
use crate::nn::{accumulate_gradients_with, AdamState, LrSchedule, Mat};
use crate::par::Exec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProsodyTrainConfig {
    pub dims: ProsodyDims,
    pub max_steps: u64,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub seed: u64,
    pub weights: LossWeights,
    /// Run a finite-difference check of the model before training.
    pub preflight: bool,
}

impl Default for ProsodyTrainConfig {
    fn default() -> Self {
        ProsodyTrainConfig {
            dims: ProsodyDims::default(),
            max_steps: 20_000,
            batch_size: 16,
            lr: LrSchedule::default(),
            seed: 0,
            weights: LossWeights::default(),
            preflight: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepLog {
    pub step: u64,
    pub lr: f64,
    /// Means over the utterances of the step's batch.
    pub losses: Losses,
}

/// First `k` phonemes with at most two frames each, enough to reach every
/// parameter cheaply.
fn tiny_batch(b: &ProsodyBatch, k: usize) -> ProsodyBatch {
    let k = k.min(b.phonemes.len());
    let mut frames = Vec::new();
    let mut start = 0;
    let mut durations = Vec::with_capacity(k);
    for &d in &b.durations[..k] {
        let keep = d.min(2);
        frames.extend(start..start + keep);
        durations.push(keep);
        start += d;
    }
    let mut mel = Mat::zeros(frames.len(), b.mel.cols);
    for (i, &t) in frames.iter().enumerate() {
        mel.row_mut(i).copy_from_slice(b.mel.row(t));
    }
    ProsodyBatch {
        id: b.id.clone(),
        phonemes: b.phonemes[..k].to_vec(),
        word_of_phoneme: b.word_of_phoneme[..k].to_vec(),
        word_vecs: b.word_vecs.clone(),
        speaker: b.speaker,
        durations,
        f0_norm: frames.iter().map(|&t| b.f0_norm[t]).collect(),
        voiced: frames.iter().map(|&t| b.voiced[t]).collect(),
        mel,
    }
}

/// Finite-difference check of the whole model in f64 on a cropped batch,
/// sampling a few coordinates per tensor.
pub fn preflight_gradcheck(
    model: &ProsodyModel<f32>,
    batch: &ProsodyBatch,
    weights: &LossWeights,
    seed: u64,
    exec: Exec,
) -> Result<GradCheckReport, ProsodyError> {
    let tiny = tiny_batch(batch, 4);
    let m64: ProsodyModel<f64> = model.cast();
    m64.loss(&tiny, weights)?;
    let opts = GradCheckOptions {
        max_per_tensor: Some(4),
        seed,
        exec,
        ..Default::default()
    };
    let report = gradient_check(
        &m64,
        |m| m.loss(&tiny, weights).map(|l| l.total).unwrap_or(f64::NAN),
        |m| {
            m.loss_backward(&tiny, weights, 1.0).ok();
        },
        &opts,
    );
    Ok(report.into_result()?)
}

/// Adam with the inverse-time schedule for `max_steps` steps; returns the
/// final weights (no model selection) and one log entry per step.
pub fn train(
    mut model: ProsodyModel<f32>,
    batches: &[ProsodyBatch],
    cfg: &ProsodyTrainConfig,
    exec: Exec,
    mut on_step: impl FnMut(&StepLog),
) -> Result<(ProsodyModel<f32>, Vec<StepLog>), ProsodyError> {
    if batches.is_empty() {
        return Err(ProsodyError::EmptyInput);
    }
    for b in batches {
        b.validate(&model.dims)?;
        if b.speaker >= model.n_speakers() || b.phonemes.iter().any(|&p| p >= model.n_phonemes()) {
            return Err(ProsodyError::Batch {
                id: b.id.clone(),
                msg: "phoneme or speaker id outside the model's tables".into(),
            });
        }
    }
    if cfg.preflight {
        preflight_gradcheck(&model, &batches[0], &cfg.weights, cfg.seed, exec)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut adam = AdamState::new(&model);
    let mut log = Vec::with_capacity(cfg.max_steps as usize);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let bs = cfg.batch_size.max(1);
    let mut pos = order.len();
    for step in 0..cfg.max_steps {
        if pos >= order.len() {
            order.shuffle(&mut rng);
            pos = 0;
        }
        let take = bs.min(order.len() - pos);
        let items: Vec<&ProsodyBatch> = order[pos..pos + take].iter().map(|&i| &batches[i]).collect();
        pos += take;
        let scale = 1.0 / items.len() as f64;
        let parts = accumulate_gradients_with(&mut model, &items, exec, |m: &mut ProsodyModel<f32>, b| {
            m.loss_backward(b, &cfg.weights, scale)
        })?;
        let mut mean = Losses::default();
        for l in &parts {
            mean.dur += l.dur * scale;
            mean.f0 += l.f0 * scale;
            mean.vuv += l.vuv * scale;
            mean.cond += l.cond * scale;
            mean.total += l.total * scale;
        }
        if !mean.total.is_finite() {
            return Err(ProsodyError::NonFinite { step: step + 1 });
        }
        let lr = cfg.lr.lr_at(step);
        adam.update(&mut model, lr);
        let entry = StepLog {
            step: step + 1,
            lr,
            losses: mean,
        };
        on_step(&entry);
        log.push(entry);
    }
    Ok((model, log))
}
