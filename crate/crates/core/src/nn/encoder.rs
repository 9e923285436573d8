//! Composite blocks shared by the g2p tagger and the prosody network.

use rand::Rng;

use super::{
    tanh_backward, tanh_forward, BiLstm, BiLstmCache, Conv1d, Linear, Mat, NnError, NnResult,
    Parameterized, Scalar, Tensor,
};
use crate::par::Exec;

/// Stack of "same"-padded convolutions with tanh, followed by a BiLSTM.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBiLstm<F> {
    pub convs: Vec<Conv1d<F>>,
    pub lstm: BiLstm<F>,
}

#[derive(Clone, Debug)]
pub struct ConvBiLstmCache<F> {
    /// Input of each conv layer; the last entry is the LSTM input.
    acts: Vec<Mat<F>>,
    lstm: BiLstmCache<F>,
}

impl<F: Scalar> ConvBiLstm<F> {
    pub fn new<R: Rng>(
        name: &str,
        d_in: usize,
        channels: usize,
        kernel: usize,
        layers: usize,
        hidden: usize,
        rng: &mut R,
    ) -> NnResult<Self> {
        let mut convs = Vec::with_capacity(layers);
        for l in 0..layers {
            let c_in = if l == 0 { d_in } else { channels };
            convs.push(Conv1d::new(&format!("{name}.conv{l}"), c_in, channels, kernel, rng)?);
        }
        let lstm_in = if layers == 0 { d_in } else { channels };
        Ok(ConvBiLstm {
            convs,
            lstm: BiLstm::new(&format!("{name}.lstm"), lstm_in, hidden, rng),
        })
    }

    pub fn d_out(&self) -> usize {
        self.lstm.d_out()
    }

    pub fn forward(&self, x: &Mat<F>) -> NnResult<(Mat<F>, ConvBiLstmCache<F>)> {
        let mut acts = Vec::with_capacity(self.convs.len() + 1);
        acts.push(x.clone());
        for conv in &self.convs {
            let y = tanh_forward(&conv.forward(acts.last().expect("non-empty"))?);
            acts.push(y);
        }
        let (h, lstm) = self.lstm.forward(acts.last().expect("non-empty"))?;
        Ok((h, ConvBiLstmCache { acts, lstm }))
    }

    pub fn backward(&mut self, cache: &ConvBiLstmCache<F>, dy: &Mat<F>) -> Mat<F> {
        let n = self.convs.len();
        let mut d = self.lstm.backward(&cache.acts[n], &cache.lstm, dy);
        for l in (0..n).rev() {
            let dpre = tanh_backward(&cache.acts[l + 1], &d);
            d = self.convs[l].backward(&cache.acts[l], &dpre);
        }
        d
    }

    pub fn cast<G: Scalar>(&self) -> ConvBiLstm<G> {
        ConvBiLstm {
            convs: self.convs.iter().map(Conv1d::cast).collect(),
            lstm: self.lstm.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for ConvBiLstm<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        for c in &self.convs {
            c.visit_params(f);
        }
        self.lstm.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        for c in &mut self.convs {
            c.visit_params_mut(f);
        }
        self.lstm.visit_params_mut(f);
    }
}

/// BiLSTM followed by a per-step linear projection.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmHead<F> {
    pub lstm: BiLstm<F>,
    pub proj: Linear<F>,
}

#[derive(Clone, Debug)]
pub struct BiLstmHeadCache<F> {
    h: Mat<F>,
    lstm: BiLstmCache<F>,
}

impl<F: Scalar> BiLstmHead<F> {
    pub fn new<R: Rng>(name: &str, d_in: usize, hidden: usize, d_out: usize, rng: &mut R) -> Self {
        BiLstmHead {
            lstm: BiLstm::new(&format!("{name}.lstm"), d_in, hidden, rng),
            proj: Linear::new(&format!("{name}.proj"), 2 * hidden, d_out, rng),
        }
    }

    /// Scales the projection so fresh outputs start near zero.
    pub fn shrink_projection(&mut self, factor: f64) {
        let s = super::sc::<F>(factor);
        for w in self.proj.weight.data.iter_mut().chain(self.proj.bias.data.iter_mut()) {
            *w *= s;
        }
    }

    pub fn d_out(&self) -> usize {
        self.proj.d_out()
    }

    pub fn forward(&self, x: &Mat<F>) -> NnResult<(Mat<F>, BiLstmHeadCache<F>)> {
        let (h, lstm) = self.lstm.forward(x)?;
        let y = self.proj.forward(&h)?;
        Ok((y, BiLstmHeadCache { h, lstm }))
    }

    pub fn backward(&mut self, x: &Mat<F>, cache: &BiLstmHeadCache<F>, dy: &Mat<F>) -> Mat<F> {
        let dh = self.proj.backward(&cache.h, dy);
        self.lstm.backward(x, &cache.lstm, &dh)
    }

    pub fn cast<G: Scalar>(&self) -> BiLstmHead<G> {
        BiLstmHead {
            lstm: self.lstm.cast(),
            proj: self.proj.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for BiLstmHead<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        self.lstm.visit_params(f);
        self.proj.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        self.lstm.visit_params_mut(f);
        self.proj.visit_params_mut(f);
    }
}

/// Runs `step` on a zero-graded clone of `model` per item and sums the
/// gradients in item order, so the result does not depend on how many
/// threads `exec` uses. The summed gradient is written into `model`; the
/// per-item results come back in input order.
pub fn accumulate_gradients_with<F, M, T, R, E, S>(model: &mut M, items: &[T], exec: Exec, step: S) -> Result<Vec<R>, E>
where
    F: Scalar,
    M: Parameterized<F> + Clone + Send + Sync,
    T: Sync,
    R: Send,
    E: From<NnError> + Send,
    S: Fn(&mut M, &T) -> Result<R, E> + Sync + Send,
{
    model.zero_grad();
    let base: &M = model;
    let parts = exec.map(items, |item| -> Result<(R, Vec<F>), E> {
        let mut m = base.clone();
        let r = step(&mut m, item)?;
        Ok((r, m.flat_grads()))
    });
    let mut grad = vec![F::zero(); model.param_count()];
    let mut out = Vec::with_capacity(items.len());
    for p in parts {
        let (r, g) = p?;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += *b;
        }
        out.push(r);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(NnError::NonFinite("gradient".into()).into());
    }
    model.set_flat_grads(&grad);
    Ok(out)
}

/// [`accumulate_gradients_with`] for steps that return a scalar loss;
/// returns the summed loss.
pub fn accumulate_gradients<F, M, T, S>(model: &mut M, items: &[T], exec: Exec, step: S) -> NnResult<f64>
where
    F: Scalar,
    M: Parameterized<F> + Clone + Send + Sync,
    T: Sync,
    S: Fn(&mut M, &T) -> NnResult<f64> + Sync + Send,
{
    let losses = accumulate_gradients_with(model, items, exec, step)?;
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(NnError::NonFinite("loss".into()));
    }
    Ok(losses.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{gradient_check, GradCheckOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
        Mat::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn project(y: &Mat<f64>, w: &Mat<f64>) -> f64 {
        y.data.iter().zip(&w.data).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn conv_bilstm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = ConvBiLstm::<f64>::new("e", 3, 4, 3, 2, 3, &mut rng).unwrap();
        let x = rand_mat(5, 3, &mut rng);
        let w = rand_mat(5, enc.d_out(), &mut rng);
        let rep = gradient_check(
            &enc,
            |m| project(&m.forward(&x).unwrap().0, &w),
            |m| {
                let (_, c) = m.forward(&x).unwrap();
                m.backward(&c, &w);
            },
            &GradCheckOptions::default(),
        );
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn head_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let head = BiLstmHead::<f64>::new("h", 3, 2, 4, &mut rng);
        let x = rand_mat(4, 3, &mut rng);
        let w = rand_mat(4, 4, &mut rng);
        let rep = gradient_check(
            &head,
            |m| project(&m.forward(&x).unwrap().0, &w),
            |m| {
                let (_, c) = m.forward(&x).unwrap();
                m.backward(&x, &c, &w);
            },
            &GradCheckOptions::default(),
        );
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn accumulation_is_thread_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let head = BiLstmHead::<f32>::new("h", 3, 4, 2, &mut rng);
        let xs: Vec<Mat<f32>> = (0..6).map(|i| rand_mat(2 + i, 3, &mut rng).cast()).collect();
        let run = |exec| {
            let mut m = head.clone();
            let loss = accumulate_gradients(&mut m, &xs, exec, |m: &mut BiLstmHead<f32>, x| {
                let (y, c) = m.forward(x)?;
                let dy = y.clone();
                m.backward(x, &c, &dy);
                Ok(y.data.iter().map(|v| 0.5 * (*v as f64).powi(2)).sum())
            })
            .unwrap();
            (loss, m.flat_grads())
        };
        let (a, ga) = run(Exec::Sequential);
        let (b, gb) = run(Exec::Parallel);
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(ga.iter().zip(&gb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
