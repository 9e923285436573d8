use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate_par_sar, G2pEvalReport};
use super::labels::LabelSequence;
use super::model::{G2pDims, G2pModel, Vocab};
use super::G2pError;
use crate::nn::{accumulate_gradients_with, AdamState, LrSchedule, NnError};
use crate::par::Exec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct G2pTrainConfig {
    pub dims: G2pDims,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub seed: u64,
}

impl Default for G2pTrainConfig {
    fn default() -> Self {
        G2pTrainConfig {
            dims: G2pDims::default(),
            max_epochs: 200,
            patience: 20,
            batch_size: 16,
            lr: LrSchedule {
                lr0: 1e-3,
                decay: 1e-5,
            },
            seed: 0,
        }
    }
}

/// What the early-stopping rule says after an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation SAR. Only a strict improvement resets the
/// patience counter, so the first epoch reaching the maximum wins ties.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, sar: f64) -> StopDecision {
        match self.best {
            Some((_, b)) if sar <= b => {
                self.since_best += 1;
                if self.since_best >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, sar));
                self.since_best = 0;
                StopDecision::Improved
            }
        }
    }

    /// `(epoch, sar)` of the best epoch so far.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// Replays a SAR trace (epoch `i + 1` has `trace[i]`) through the rule.
/// Returns `(best_epoch, stop_epoch)`, both 1-based.
pub fn replay_trace(trace: &[f64], patience: usize) -> Option<(usize, usize)> {
    let mut es = EarlyStopping::new(patience);
    for (i, &s) in trace.iter().enumerate() {
        if es.observe(i + 1, s) == StopDecision::Stop {
            return Some((es.best()?.0, i + 1));
        }
    }
    Some((es.best()?.0, trace.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid: G2pEvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct G2pTrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Trains with minibatch Adam and keeps the checkpoint with the highest
/// validation SAR. Per-sentence gradients are computed under `exec` and
/// summed in a fixed order, so results do not depend on the thread count.
pub fn g2p_train(
    train: &[LabelSequence],
    valid: &[LabelSequence],
    cfg: &G2pTrainConfig,
    exec: Exec,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<(G2pModel<f32>, G2pTrainLog), G2pError> {
    let train: Vec<&LabelSequence> = train.iter().filter(|s| !s.is_empty()).collect();
    if train.is_empty() || valid.is_empty() {
        return Err(G2pError::EmptyDataset);
    }
    let owned: Vec<LabelSequence> = train.iter().map(|s| (*s).clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = G2pModel::<f32>::new(Vocab::build(&owned), cfg.dims.clone(), &mut rng)?;
    let mut adam = AdamState::new(&model);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut log = G2pTrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let n_positions: usize = owned.iter().map(|s| s.len()).sum();
    let mut order: Vec<usize> = (0..owned.len()).collect();
    let mut step: u64 = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let batch: Vec<&LabelSequence> = chunk.iter().map(|&i| &owned[i]).collect();
            let total: usize = batch.iter().map(|s| s.len()).sum();
            let losses = accumulate_gradients_with(&mut model, &batch, exec, |m: &mut G2pModel<f32>, s| {
                m.loss_backward(s, s.len() as f64 / total as f64)
            })
            .map_err(|e| match e {
                G2pError::Nn(NnError::NonFinite(_)) => G2pError::NonFinite { epoch, batch: b + 1 },
                other => other,
            })?;
            let loss: f64 = losses.iter().sum();
            if !loss.is_finite() {
                return Err(G2pError::NonFinite { epoch, batch: b + 1 });
            }
            adam.update(&mut model, cfg.lr.lr_at(step));
            step += 1;
            epoch_loss += loss * total as f64;
        }
        let valid_report = evaluate_par_sar(&model, valid, exec)?;
        let entry = EpochLog {
            epoch,
            train_loss: epoch_loss / n_positions as f64,
            valid: valid_report,
        };
        on_epoch(&entry);
        let decision = stopper.observe(epoch, entry.valid.sar);
        log.epochs.push(entry);
        if decision == StopDecision::Improved {
            best = model.clone();
            log.best_epoch = epoch;
        }
        if decision == StopDecision::Stop {
            log.stopped_early = true;
            break;
        }
    }
    Ok((best, log))
}
