use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::labels::{decode_labels, LabelSequence};
use super::G2pError;
use crate::io::{read_json, write_json};
use crate::nn::loss::{argmax, softmax_cross_entropy, softmax_rows};
use crate::nn::{checkpoint, sc, ConvBiLstm, ConvBiLstmCache, Embedding, Linear, Mat, Parameterized, Scalar, Tensor};

pub const UNK: usize = 0;
const PARAMS_FILE: &str = "params.nnc";
const VOCAB_FILE: &str = "vocab.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct G2pDims {
    pub embed: usize,
    pub channels: usize,
    pub kernel: usize,
    pub conv_layers: usize,
    pub hidden: usize,
}

impl Default for G2pDims {
    fn default() -> Self {
        G2pDims {
            embed: 64,
            channels: 128,
            kernel: 5,
            conv_layers: 3,
            hidden: 128,
        }
    }
}

/// Character vocabulary (id 0 is UNK) and the closed label alphabet, both
/// sorted so lookups are binary searches and ids are stable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub chars: Vec<char>,
    pub labels: Vec<String>,
}

impl Vocab {
    pub fn build(data: &[LabelSequence]) -> Self {
        let mut chars: Vec<char> = data.iter().flat_map(|s| s.graphemes.iter().copied()).collect();
        chars.sort_unstable();
        chars.dedup();
        let mut labels: Vec<String> = data.iter().flat_map(|s| s.labels.iter().cloned()).collect();
        labels.sort();
        labels.dedup();
        Vocab { chars, labels }
    }

    fn validate(&self) -> Result<(), G2pError> {
        let sorted_c = self.chars.windows(2).all(|w| w[0] < w[1]);
        let sorted_l = self.labels.windows(2).all(|w| w[0] < w[1]);
        if !sorted_c || !sorted_l || self.labels.is_empty() {
            return Err(G2pError::Vocab("vocabulary must be sorted, unique and non-empty".into()));
        }
        Ok(())
    }

    pub fn n_chars(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn char_id(&self, c: char) -> usize {
        self.chars.binary_search(&c).map(|i| i + 1).unwrap_or(UNK)
    }

    pub fn label_id(&self, l: &str) -> Option<usize> {
        self.labels.binary_search_by(|x| x.as_str().cmp(l)).ok()
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dims: G2pDims,
    vocab: Vocab,
}

/// Character embedding → conv stack → BiLSTM → projection to label logits.
#[derive(Clone, Debug, PartialEq)]
pub struct G2pModel<F> {
    pub dims: G2pDims,
    pub vocab: Vocab,
    pub embed: Embedding<F>,
    pub encoder: ConvBiLstm<F>,
    pub proj: Linear<F>,
}

pub struct G2pCache<F> {
    ids: Vec<usize>,
    enc: ConvBiLstmCache<F>,
    h: Mat<F>,
}

impl<F: Scalar> G2pModel<F> {
    pub fn new<R: Rng>(vocab: Vocab, dims: G2pDims, rng: &mut R) -> Result<Self, G2pError> {
        vocab.validate()?;
        let embed = Embedding::new("g2p.embed", vocab.n_chars(), dims.embed, rng);
        let encoder = ConvBiLstm::new(
            "g2p.enc",
            dims.embed,
            dims.channels,
            dims.kernel,
            dims.conv_layers,
            dims.hidden,
            rng,
        )?;
        let mut proj = Linear::new("g2p.proj", encoder.d_out(), vocab.n_labels(), rng);
        // near-zero logits at start, so fresh outputs are close to uniform
        let s: F = sc(0.01);
        for w in proj.weight.data.iter_mut().chain(proj.bias.data.iter_mut()) {
            *w *= s;
        }
        Ok(G2pModel {
            dims,
            vocab,
            embed,
            encoder,
            proj,
        })
    }

    pub fn ids(&self, graphemes: &[char]) -> Vec<usize> {
        graphemes.iter().map(|&c| self.vocab.char_id(c)).collect()
    }

    pub fn forward(&self, graphemes: &[char]) -> Result<(Mat<F>, G2pCache<F>), G2pError> {
        if graphemes.is_empty() {
            return Err(G2pError::EmptyInput);
        }
        let ids = self.ids(graphemes);
        let x = self.embed.forward(&ids)?;
        let (h, enc) = self.encoder.forward(&x)?;
        let logits = self.proj.forward(&h)?;
        Ok((logits, G2pCache { ids, enc, h }))
    }

    /// Label distribution per grapheme, `n × |alphabet|`.
    pub fn probabilities(&self, graphemes: &[char]) -> Result<Mat<F>, G2pError> {
        Ok(softmax_rows(&self.forward(graphemes)?.0))
    }

    /// Argmax label ids; ties go to the lowest id.
    pub fn predict_ids(&self, graphemes: &[char]) -> Result<Vec<usize>, G2pError> {
        let (logits, _) = self.forward(graphemes)?;
        Ok((0..logits.rows).map(|r| argmax(logits.row(r))).collect())
    }

    pub fn predict_labels(&self, graphemes: &[char]) -> Result<Vec<String>, G2pError> {
        Ok(self
            .predict_ids(graphemes)?
            .into_iter()
            .map(|i| self.vocab.labels[i].clone())
            .collect())
    }

    /// Cross-entropy averaged over positions, multiplied by `scale`;
    /// gradients (also scaled) are accumulated into the parameters.
    pub fn loss_backward(&mut self, seq: &LabelSequence, scale: f64) -> Result<f64, G2pError> {
        let gold = seq
            .labels
            .iter()
            .map(|l| self.vocab.label_id(l).ok_or_else(|| G2pError::UnknownLabel(l.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let (logits, cache) = self.forward(&seq.graphemes)?;
        let (loss, mut dlogits) = softmax_cross_entropy(&logits, &gold)?;
        let s: F = sc(scale);
        for d in &mut dlogits.data {
            *d *= s;
        }
        let dh = self.proj.backward(&cache.h, &dlogits);
        let dx = self.encoder.backward(&cache.enc, &dh);
        self.embed.backward(&cache.ids, &dx);
        Ok(loss * scale)
    }

    pub fn loss(&self, seq: &LabelSequence) -> Result<f64, G2pError> {
        let gold = seq
            .labels
            .iter()
            .map(|l| self.vocab.label_id(l).ok_or_else(|| G2pError::UnknownLabel(l.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let (logits, _) = self.forward(&seq.graphemes)?;
        Ok(softmax_cross_entropy(&logits, &gold)?.0)
    }

    pub fn cast<G: Scalar>(&self) -> G2pModel<G> {
        G2pModel {
            dims: self.dims.clone(),
            vocab: self.vocab.clone(),
            embed: self.embed.cast(),
            encoder: self.encoder.cast(),
            proj: self.proj.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for G2pModel<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        self.embed.visit_params(f);
        self.encoder.visit_params(f);
        self.proj.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        self.embed.visit_params_mut(f);
        self.encoder.visit_params_mut(f);
        self.proj.visit_params_mut(f);
    }
}

impl G2pModel<f32> {
    /// Writes `params.nnc` and `vocab.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), G2pError> {
        checkpoint::save(self, &dir.join(PARAMS_FILE))?;
        write_json(
            &dir.join(VOCAB_FILE),
            &Sidecar {
                dims: self.dims.clone(),
                vocab: self.vocab.clone(),
            },
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, G2pError> {
        let side: Sidecar = read_json(&dir.join(VOCAB_FILE))?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut m = G2pModel::new(side.vocab, side.dims, &mut rng)?;
        checkpoint::load_into(&mut m, &dir.join(PARAMS_FILE))?;
        Ok(m)
    }
}

/// Whole-sentence transcription: forward, argmax, decode.
pub fn transcribe<F: Scalar>(model: &G2pModel<F>, sentence: &str) -> Result<Vec<String>, G2pError> {
    let g: Vec<char> = sentence.chars().collect();
    if g.is_empty() {
        return Ok(Vec::new());
    }
    Ok(decode_labels(&model.predict_labels(&g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::g2p::labels::encode_alignment;
    use crate::nn::gradcheck::{gradient_check, GradCheckOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> G2pDims {
        G2pDims {
            embed: 4,
            channels: 5,
            kernel: 3,
            conv_layers: 3,
            hidden: 3,
        }
    }

    fn data() -> Vec<LabelSequence> {
        let sp = |v: &[&[&str]]| -> Vec<Vec<String>> {
            v.iter().map(|s| s.iter().map(|p| p.to_string()).collect()).collect()
        };
        vec![
            encode_alignment(&['t', 'a', 'x', 'i'], &sp(&[&["t"], &["a"], &["k", "s"], &["i"]])).unwrap(),
            encode_alignment(&['b', 'e', 'a', 'u', ','], &sp(&[&["b"], &["o"], &[], &[], &[]])).unwrap(),
        ]
    }

    #[test]
    fn vocab_lookup() {
        let v = Vocab::build(&data());
        assert_eq!(v.char_id(','), 1);
        assert_eq!(v.char_id('a'), 2);
        assert_eq!(v.char_id('Z'), UNK);
        assert!(v.label_id("k+s").is_some());
        assert!(v.label_id("zz").is_none());
    }

    #[test]
    fn fresh_model_is_near_uniform() {
        let v = Vocab::build(&data());
        let n = v.n_labels() as f64;
        let m = G2pModel::<f64>::new(v, G2pDims::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let p = m.probabilities(&['t', 'a', 'q']).unwrap();
        assert_eq!((p.rows, p.cols), (3, n as usize));
        for r in 0..p.rows {
            let s: f64 = p.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(p.row(r).iter().all(|&x| (x - 1.0 / n).abs() < 0.05 / n));
        }
        assert_eq!(m.probabilities(&['x']).unwrap().rows, 1);
        assert!(matches!(m.probabilities(&[]), Err(G2pError::EmptyInput)));
    }

    #[test]
    fn model_gradients() {
        let d = data();
        let m = G2pModel::<f64>::new(Vocab::build(&d), small(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let rep = gradient_check(
            &m,
            |m| m.loss(&d[0]).unwrap(),
            |m| {
                m.loss_backward(&d[0], 1.0).unwrap();
            },
            &GradCheckOptions::default(),
        );
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn transcribe_is_decode_of_argmax() {
        let m = G2pModel::<f32>::new(Vocab::build(&data()), small(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(transcribe(&m, "").unwrap().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.gen_range(1..12);
            let s: String = (0..n).map(|_| *['t', 'a', 'x', ' ', ',', 'q'].get(rng.gen_range(0..6)).unwrap()).collect();
            let g: Vec<char> = s.chars().collect();
            assert_eq!(transcribe(&m, &s).unwrap(), decode_labels(&m.predict_labels(&g).unwrap()));
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = G2pModel::<f32>::new(Vocab::build(&data()), small(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        m.save(dir.path()).unwrap();
        assert_eq!(G2pModel::load(dir.path()).unwrap(), m);
    }
}
