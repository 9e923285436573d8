use rand::Rng;
use serde::{Deserialize, Serialize};

use super::regulate::{build_index, regulate_backward, regulate_length};
use super::words::upsample_words_to_phonemes;
use super::ProsodyError;
use crate::nn::loss::{argmax, l1, mse, sigmoid, sigmoid_bce, softmax_cross_entropy, softmax_rows};
use crate::nn::{
    f64_of, sc, BiLstmHead, BiLstmHeadCache, ConvBiLstm, ConvBiLstmCache, Embedding, Mat, Parameterized,
    Scalar, Tensor,
};
use crate::pitch::{denormalize_f0, F0Stats};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProsodyDims {
    pub phone_embed: usize,
    pub speaker_embed: usize,
    pub channels: usize,
    pub kernel: usize,
    pub conv_layers: usize,
    pub hidden: usize,
    pub head_hidden: usize,
    pub word_dim: usize,
    /// Largest duration class; longer phonemes share the last class.
    pub d_max: usize,
    pub d_cond: usize,
}

impl Default for ProsodyDims {
    fn default() -> Self {
        ProsodyDims {
            phone_embed: 64,
            speaker_embed: 32,
            channels: 128,
            kernel: 5,
            conv_layers: 3,
            hidden: 128,
            head_hidden: 128,
            word_dim: 768,
            d_max: 100,
            d_cond: 80,
        }
    }
}

/// One forced-aligned training utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProsodyBatch {
    pub id: String,
    pub phonemes: Vec<usize>,
    pub word_of_phoneme: Vec<Option<usize>>,
    pub word_vecs: Mat<f32>,
    pub speaker: usize,
    /// Gold frames per phoneme, uncapped.
    pub durations: Vec<usize>,
    /// Normalized log-f0 per frame (0 on unvoiced frames).
    pub f0_norm: Vec<f32>,
    pub voiced: Vec<bool>,
    pub mel: Mat<f32>,
}

impl ProsodyBatch {
    pub fn n_frames(&self) -> usize {
        self.durations.iter().sum()
    }

    pub fn validate(&self, dims: &ProsodyDims) -> Result<(), ProsodyError> {
        let bad = |m: String| Err(ProsodyError::Batch { id: self.id.clone(), msg: m });
        let n = self.phonemes.len();
        if n == 0 {
            return bad("no phonemes".into());
        }
        if self.word_of_phoneme.len() != n || self.durations.len() != n {
            return bad("phoneme, word map and duration lengths differ".into());
        }
        let t = self.n_frames();
        if self.f0_norm.len() != t || self.voiced.len() != t || self.mel.rows != t {
            return bad(format!(
                "durations sum to {t} frames but pitch has {} and mel has {}",
                self.f0_norm.len(),
                self.mel.rows
            ));
        }
        if self.mel.cols != dims.d_cond || self.word_vecs.cols != dims.word_dim {
            return bad("mel or word-vector width does not match the model".into());
        }
        Ok(())
    }

    /// Duration class targets, `min(d, d_max)`.
    pub fn duration_classes(&self, d_max: usize) -> Vec<usize> {
        self.durations.iter().map(|&d| d.min(d_max)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProsodyOutput<F> {
    /// `n × (d_max + 1)` duration logits.
    pub dur_logits: Mat<F>,
    /// `T × 2`: normalized log-f0 and voicing logit.
    pub pitch: Mat<F>,
    /// `T × d_cond`.
    pub cond: Mat<F>,
}

impl<F: Scalar> ProsodyOutput<F> {
    pub fn duration_probs(&self) -> Mat<F> {
        softmax_rows(&self.dur_logits)
    }

    pub fn voiced_probs(&self) -> Vec<F> {
        (0..self.pitch.rows).map(|t| sigmoid(self.pitch.get(t, 1))).collect()
    }

    /// Argmax class per phoneme; ties pick the shorter duration.
    pub fn predicted_durations(&self) -> Vec<usize> {
        (0..self.dur_logits.rows).map(|r| argmax(self.dur_logits.row(r))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub dur: f64,
    pub f0: f64,
    pub vuv: f64,
    pub cond: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            dur: 1.0,
            f0: 1.0,
            vuv: 1.0,
            cond: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Losses {
    pub dur: f64,
    pub f0: f64,
    pub vuv: f64,
    pub cond: f64,
    pub total: f64,
}

/// Weighted gradients of the total loss with respect to each output.
#[derive(Clone, Debug)]
pub struct OutputGrads<F> {
    pub dur_logits: Mat<F>,
    pub pitch: Mat<F>,
    pub cond: Mat<F>,
}

/// Duration CE, f0 MSE on voiced frames, voicing BCE and conditioning L1.
pub fn compute_losses<F: Scalar>(
    out: &ProsodyOutput<F>,
    batch: &ProsodyBatch,
    d_max: usize,
    w: &LossWeights,
) -> Result<(Losses, OutputGrads<F>), ProsodyError> {
    let t = batch.n_frames();
    if out.pitch.rows != t || out.cond.rows != t || out.dur_logits.rows != batch.phonemes.len() {
        return Err(ProsodyError::Shape("outputs do not match the batch".into()));
    }
    let (l_dur, mut d_dur) = softmax_cross_entropy(&out.dur_logits, &batch.duration_classes(d_max))?;

    let voiced_frames: Vec<usize> = (0..t).filter(|&i| batch.voiced[i]).collect();
    let pred_f0: Vec<F> = voiced_frames.iter().map(|&i| out.pitch.get(i, 0)).collect();
    let gold_f0: Vec<F> = voiced_frames.iter().map(|&i| sc(batch.f0_norm[i] as f64)).collect();
    let (l_f0, g_f0) = if voiced_frames.is_empty() {
        (0.0, Vec::new())
    } else {
        mse(&pred_f0, &gold_f0)?
    };

    let logits: Vec<F> = (0..t).map(|i| out.pitch.get(i, 1)).collect();
    let flags: Vec<F> = batch.voiced.iter().map(|&v| if v { F::one() } else { F::zero() }).collect();
    let (l_vuv, g_vuv) = sigmoid_bce(&logits, &flags)?;

    let gold_mel: Vec<F> = batch.mel.data.iter().map(|&v| sc(v as f64)).collect();
    let (l_cond, mut g_cond) = l1(&out.cond.data, &gold_mel)?;

    let wf = |x: f64| -> F { sc(x) };
    for g in &mut d_dur.data {
        *g *= wf(w.dur);
    }
    let mut d_pitch = Mat::zeros(t, 2);
    for (k, &i) in voiced_frames.iter().enumerate() {
        d_pitch.row_mut(i)[0] = g_f0[k] * wf(w.f0);
    }
    for (i, g) in g_vuv.iter().enumerate() {
        d_pitch.row_mut(i)[1] = *g * wf(w.vuv);
    }
    for g in &mut g_cond {
        *g *= wf(w.cond);
    }
    let losses = Losses {
        dur: l_dur,
        f0: l_f0,
        vuv: l_vuv,
        cond: l_cond,
        total: w.dur * l_dur + w.f0 * l_f0 + w.vuv * l_vuv + w.cond * l_cond,
    };
    Ok((
        losses,
        OutputGrads {
            dur_logits: d_dur,
            pitch: d_pitch,
            cond: Mat {
                rows: t,
                cols: out.cond.cols,
                data: g_cond,
            },
        },
    ))
}

/// Phoneme and speaker embeddings feed a conv + BiLSTM backbone; its output,
/// joined with word vectors, drives a phoneme-level duration stack and,
/// after length regulation, frame-level pitch and conditioning stacks.
#[derive(Clone, Debug, PartialEq)]
pub struct ProsodyModel<F> {
    pub dims: ProsodyDims,
    pub phone_embed: Embedding<F>,
    pub speaker_embed: Embedding<F>,
    pub backbone: ConvBiLstm<F>,
    pub duration: BiLstmHead<F>,
    pub pitch: BiLstmHead<F>,
    pub cond: BiLstmHead<F>,
}

pub struct PhonemeCache<F> {
    ids: Vec<usize>,
    speaker: usize,
    backbone: ConvBiLstmCache<F>,
    z: Mat<F>,
    dur: BiLstmHeadCache<F>,
}

pub struct FrameCache<F> {
    index: Vec<usize>,
    zf: Mat<F>,
    heads: Option<(BiLstmHeadCache<F>, BiLstmHeadCache<F>)>,
}

impl<F: Scalar> ProsodyModel<F> {
    pub fn new<R: Rng>(dims: ProsodyDims, n_phonemes: usize, n_speakers: usize, rng: &mut R) -> Result<Self, ProsodyError> {
        let d_in = dims.phone_embed + dims.speaker_embed;
        let backbone = ConvBiLstm::new(
            "prosody.backbone",
            d_in,
            dims.channels,
            dims.kernel,
            dims.conv_layers,
            dims.hidden,
            rng,
        )?;
        let d_z = backbone.d_out() + dims.word_dim;
        Ok(ProsodyModel {
            phone_embed: Embedding::new("prosody.phone_embed", n_phonemes.max(1), dims.phone_embed, rng),
            speaker_embed: Embedding::new("prosody.speaker_embed", n_speakers.max(1), dims.speaker_embed, rng),
            backbone,
            duration: BiLstmHead::new("prosody.duration", d_z, dims.head_hidden, dims.d_max + 1, rng),
            pitch: BiLstmHead::new("prosody.pitch", d_z, dims.head_hidden, 2, rng),
            cond: BiLstmHead::new("prosody.cond", d_z, dims.head_hidden, dims.d_cond, rng),
            dims,
        })
    }

    pub fn n_phonemes(&self) -> usize {
        self.phone_embed.n()
    }

    pub fn n_speakers(&self) -> usize {
        self.speaker_embed.n()
    }

    /// Phoneme-level pass: backbone features joined with word vectors, and
    /// duration logits.
    pub fn forward_phonemes(
        &self,
        ids: &[usize],
        word_vecs: &Mat<f32>,
        word_of_phoneme: &[Option<usize>],
        speaker: usize,
    ) -> Result<(Mat<F>, PhonemeCache<F>), ProsodyError> {
        if ids.is_empty() {
            return Err(ProsodyError::EmptyInput);
        }
        if word_vecs.cols != self.dims.word_dim {
            return Err(ProsodyError::Shape(format!(
                "word vectors have {} columns, model expects {}",
                word_vecs.cols, self.dims.word_dim
            )));
        }
        let pe = self.phone_embed.forward(ids)?;
        let se = self.speaker_embed.forward(&vec![speaker; ids.len()])?;
        let x0 = Mat::concat_cols(&pe, &se)?;
        let (h, backbone) = self.backbone.forward(&x0)?;
        let wv: Mat<F> = upsample_words_to_phonemes(word_vecs, word_of_phoneme)?.cast();
        let z = Mat::concat_cols(&h, &wv)?;
        let (dur_logits, dur) = self.duration.forward(&z)?;
        Ok((
            dur_logits,
            PhonemeCache {
                ids: ids.to_vec(),
                speaker,
                backbone,
                z,
                dur,
            },
        ))
    }

    /// Frame-level pass over the phoneme features repeated by `durations`.
    pub fn forward_frames(&self, pc: &PhonemeCache<F>, durations: &[usize]) -> Result<(Mat<F>, Mat<F>, FrameCache<F>), ProsodyError> {
        if durations.len() != pc.z.rows {
            return Err(ProsodyError::Shape("one duration per phoneme required".into()));
        }
        let index = build_index(durations);
        let zf = regulate_length(&pc.z, &index)?;
        if index.is_empty() {
            let cache = FrameCache { index, zf, heads: None };
            return Ok((Mat::zeros(0, 2), Mat::zeros(0, self.dims.d_cond), cache));
        }
        let (pitch, pc_cache) = self.pitch.forward(&zf)?;
        let (cond, cc_cache) = self.cond.forward(&zf)?;
        Ok((
            pitch,
            cond,
            FrameCache {
                index,
                zf,
                heads: Some((pc_cache, cc_cache)),
            },
        ))
    }

    /// Forced-aligned forward pass using the batch's gold durations.
    pub fn forward_forced(&self, batch: &ProsodyBatch) -> Result<(ProsodyOutput<F>, (PhonemeCache<F>, FrameCache<F>)), ProsodyError> {
        let (dur_logits, pc) =
            self.forward_phonemes(&batch.phonemes, &batch.word_vecs, &batch.word_of_phoneme, batch.speaker)?;
        let (pitch, cond, fc) = self.forward_frames(&pc, &batch.durations)?;
        Ok((ProsodyOutput { dur_logits, pitch, cond }, (pc, fc)))
    }

    /// Accumulates parameter gradients for the given output gradients.
    pub fn backward(&mut self, pc: &PhonemeCache<F>, fc: &FrameCache<F>, g: &OutputGrads<F>) {
        let mut dz = self.duration.backward(&pc.z, &pc.dur, &g.dur_logits);
        if let Some((p_cache, c_cache)) = &fc.heads {
            let mut dzf = self.pitch.backward(&fc.zf, p_cache, &g.pitch);
            dzf.add_assign(&self.cond.backward(&fc.zf, c_cache, &g.cond));
            dz.add_assign(&regulate_backward(&dzf, &fc.index, pc.z.rows));
        }
        let (dh, _) = dz.split_cols(self.backbone.d_out());
        let dx0 = self.backbone.backward(&pc.backbone, &dh);
        let (dpe, dse) = dx0.split_cols(self.dims.phone_embed);
        self.phone_embed.backward(&pc.ids, &dpe);
        self.speaker_embed.backward(&vec![pc.speaker; pc.ids.len()], &dse);
    }

    /// Total loss of one batch, with gradients scaled by `scale` accumulated
    /// into the parameters.
    pub fn loss_backward(&mut self, batch: &ProsodyBatch, w: &LossWeights, scale: f64) -> Result<Losses, ProsodyError> {
        let (out, (pc, fc)) = self.forward_forced(batch)?;
        let (losses, mut g) = compute_losses(&out, batch, self.dims.d_max, w)?;
        let s: F = sc(scale);
        for m in [&mut g.dur_logits, &mut g.pitch, &mut g.cond] {
            for v in &mut m.data {
                *v *= s;
            }
        }
        self.backward(&pc, &fc, &g);
        Ok(losses)
    }

    pub fn loss(&self, batch: &ProsodyBatch, w: &LossWeights) -> Result<Losses, ProsodyError> {
        let (out, _) = self.forward_forced(batch)?;
        Ok(compute_losses(&out, batch, self.dims.d_max, w)?.0)
    }

    pub fn cast<G: Scalar>(&self) -> ProsodyModel<G> {
        ProsodyModel {
            dims: self.dims.clone(),
            phone_embed: self.phone_embed.cast(),
            speaker_embed: self.speaker_embed.cast(),
            backbone: self.backbone.cast(),
            duration: self.duration.cast(),
            pitch: self.pitch.cast(),
            cond: self.cond.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for ProsodyModel<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        self.phone_embed.visit_params(f);
        self.speaker_embed.visit_params(f);
        self.backbone.visit_params(f);
        self.duration.visit_params(f);
        self.pitch.visit_params(f);
        self.cond.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        self.phone_embed.visit_params_mut(f);
        self.speaker_embed.visit_params_mut(f);
        self.backbone.visit_params_mut(f);
        self.duration.visit_params_mut(f);
        self.pitch.visit_params_mut(f);
        self.cond.visit_params_mut(f);
    }
}

/// Predicted durations and frame-level features for unseen input.
#[derive(Clone, Debug, PartialEq)]
pub struct Inference {
    pub durations: Vec<usize>,
    pub output: ProsodyOutput<f32>,
    pub f0_hz: Vec<f32>,
    pub voiced: Vec<bool>,
}

impl Inference {
    pub fn n_frames(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.voiced.is_empty() {
            0.0
        } else {
            self.voiced.iter().filter(|&&v| v).count() as f64 / self.voiced.len() as f64
        }
    }
}

/// Argmax durations drive the frame-level stacks. Frames whose voicing
/// probability is at most 0.5 are unvoiced with f0 = 0.
pub fn infer(
    model: &ProsodyModel<f32>,
    ids: &[usize],
    word_of_phoneme: &[Option<usize>],
    word_vecs: &Mat<f32>,
    speaker: usize,
    stats: &F0Stats,
) -> Result<Inference, ProsodyError> {
    let (dur_logits, pc) = model.forward_phonemes(ids, word_vecs, word_of_phoneme, speaker)?;
    let durations: Vec<usize> = (0..dur_logits.rows).map(|r| argmax(dur_logits.row(r))).collect();
    let (pitch, cond, _) = model.forward_frames(&pc, &durations)?;
    let mut f0_hz = Vec::with_capacity(pitch.rows);
    let mut voiced = Vec::with_capacity(pitch.rows);
    for t in 0..pitch.rows {
        let v = f64_of(sigmoid(pitch.get(t, 1))) > 0.5;
        voiced.push(v);
        f0_hz.push(if v { denormalize_f0(pitch.get(t, 0) as f64, stats) as f32 } else { 0.0 });
    }
    Ok(Inference {
        durations,
        output: ProsodyOutput { dur_logits, pitch, cond },
        f0_hz,
        voiced,
    })
}
