//! Central finite-difference oracle for analytic gradients.
//!
//! The oracle evaluates the loss in `f64` at `θ ± h` for each checked
//! coordinate and compares against the gradient accumulated by the
//! model's own backward pass. Coordinates are checked in parallel; each
//! worker perturbs a private clone of the model.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NnError, Parameterized};
use crate::par::Exec;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Gradients smaller than this are compared absolutely.
    pub abs_floor: f64,
    /// Check at most this many coordinates per tensor (sampled); `None` checks all.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-4,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            max_per_tensor: None,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstCoordinate {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub worst: Option<WorstCoordinate>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }

    pub fn into_result(self) -> Result<Self, NnError> {
        if self.passed() {
            Ok(self)
        } else {
            Err(NnError::GradCheck(self.to_string()))
        }
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} coordinates, max rel err {:.3e} (tol {:.1e})",
            self.checked, self.max_rel_err, self.tolerance
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                ", worst {}[{}]: analytic {:.6e} vs numeric {:.6e}",
                w.tensor, w.index, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64, abs_floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(abs_floor)
}

/// Checks `backward` against finite differences of `loss`.
///
/// `backward` must accumulate dloss/dθ into the model's gradients; it is
/// called once on a zero-graded clone.
pub fn gradient_check<M, L, B>(model: &M, loss: L, backward: B, opts: &GradCheckOptions) -> GradCheckReport
where
    M: Parameterized<f64> + Clone + Sync + Send,
    L: Fn(&M) -> f64 + Sync + Send,
    B: FnOnce(&mut M),
{
    let mut probe = model.clone();
    probe.zero_grad();
    backward(&mut probe);
    let analytic = probe.tensors().iter().map(|t| t.grad.clone()).collect::<Vec<_>>();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut coords = Vec::new();
    let mut names = Vec::new();
    model.visit_params(&mut |t| {
        let k = names.len();
        names.push(t.name.clone());
        match opts.max_per_tensor {
            Some(m) if m < t.len() => {
                let mut idx = sample(&mut rng, t.len(), m).into_vec();
                idx.sort_unstable();
                coords.extend(idx.into_iter().map(|i| (k, i)));
            }
            _ => coords.extend((0..t.len()).map(|i| (k, i))),
        }
    });

    let h = opts.step;
    let numeric = opts.exec.map(&coords, |&(k, i)| {
        let mut m = model.clone();
        let mut eval = |delta: f64| {
            let mut j = 0;
            m.visit_params_mut(&mut |t| {
                if j == k {
                    t.data[i] += delta;
                }
                j += 1;
            });
            loss(&m)
        };
        let plus = eval(h);
        let minus = eval(-2.0 * h);
        (plus - minus) / (2.0 * h)
    });

    let mut report = GradCheckReport {
        checked: coords.len(),
        max_rel_err: 0.0,
        tolerance: opts.tolerance,
        worst: None,
    };
    for (&(k, i), &num) in coords.iter().zip(&numeric) {
        let ana = analytic[k][i];
        let err = relative_error(ana, num, opts.abs_floor);
        if err > report.max_rel_err || report.worst.is_none() || !err.is_finite() {
            report.max_rel_err = if err.is_finite() { err } else { f64::INFINITY };
            report.worst = Some(WorstCoordinate {
                tensor: names[k].clone(),
                index: i,
                analytic: ana,
                numeric: num,
                rel_err: err,
            });
        }
    }
    report
}

/// A self-contained differentiable objective over its own parameters.
pub trait Probe: Parameterized<f64> + Clone + Sync + Send {
    fn loss(&self) -> f64;
    /// Accumulates dloss/dθ into the parameter gradients.
    fn backward(&mut self);
}

pub fn check_probe<P: Probe>(p: &P, opts: &GradCheckOptions) -> GradCheckReport {
    gradient_check(p, P::loss, P::backward, opts)
}

/// Ready-made objectives wrapping each layer and loss. Layer probes treat
/// the input as a trainable tensor too, so input gradients are checked
/// alongside parameter gradients; the scalar objective is a fixed random
/// projection of the layer output.
pub mod probes {
    use rand::Rng;

    use super::Probe;
    use crate::nn::loss;
    use crate::nn::{
        tanh_backward, tanh_forward, BiLstm, Conv1d, Embedding, Linear, Lstm, Mat, Parameterized,
        Tensor,
    };

    fn rand_tensor<R: Rng>(name: &str, shape: &[usize], rng: &mut R) -> Tensor<f64> {
        Tensor::uniform(name, shape, 1.0, rng)
    }

    fn as_mat(t: &Tensor<f64>) -> Mat<f64> {
        Mat::from_vec(t.shape[0], t.shape[1], t.data.clone()).expect("2-d tensor")
    }

    fn project(y: &Mat<f64>, w: &[f64]) -> f64 {
        y.data.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    fn add_into(t: &mut Tensor<f64>, g: &[f64]) {
        for (a, b) in t.grad.iter_mut().zip(g) {
            *a += b;
        }
    }

    macro_rules! params {
        ($ty:ty, $($field:ident).+ ; $($extra:ident),*) => {
            impl Parameterized<f64> for $ty {
                fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<f64>)) {
                    self.$($field).+.visit_params(f);
                    $( f(&self.$extra); )*
                }
                fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<f64>)) {
                    self.$($field).+.visit_params_mut(f);
                    $( f(&mut self.$extra); )*
                }
            }
        };
    }

    #[derive(Clone)]
    pub struct LinearProbe {
        pub layer: Linear<f64>,
        pub input: Tensor<f64>,
        pub proj: Vec<f64>,
        /// Negates the analytic gradient; a negative control for the checker.
        pub corrupt: bool,
    }

    impl LinearProbe {
        pub fn random<R: Rng>(rng: &mut R, rows: usize, d_in: usize, d_out: usize) -> Self {
            LinearProbe {
                layer: Linear::new("linear", d_in, d_out, rng),
                input: rand_tensor("input", &[rows, d_in], rng),
                proj: (0..rows * d_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                corrupt: false,
            }
        }
    }
    params!(LinearProbe, layer; input);

    impl Probe for LinearProbe {
        fn loss(&self) -> f64 {
            project(&self.layer.forward(&as_mat(&self.input)).unwrap(), &self.proj)
        }
        fn backward(&mut self) {
            let x = as_mat(&self.input);
            let y = self.layer.forward(&x).unwrap();
            let sign = if self.corrupt { -1.0 } else { 1.0 };
            let dy = Mat::from_vec(y.rows, y.cols, self.proj.iter().map(|v| sign * v).collect()).unwrap();
            let dx = self.layer.backward(&x, &dy);
            add_into(&mut self.input, &dx.data);
        }
    }

    #[derive(Clone)]
    pub struct EmbeddingProbe {
        pub layer: Embedding<f64>,
        pub ids: Vec<usize>,
        pub proj: Vec<f64>,
    }

    impl EmbeddingProbe {
        pub fn random<R: Rng>(rng: &mut R, n: usize, dim: usize, len: usize) -> Self {
            let mut layer = Embedding::new("embedding", n, dim, rng);
            layer.table.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            EmbeddingProbe {
                layer,
                ids: (0..len).map(|_| rng.gen_range(0..n)).collect(),
                proj: (0..len * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        }
    }
    params!(EmbeddingProbe, layer;);

    impl Probe for EmbeddingProbe {
        fn loss(&self) -> f64 {
            // squared so the objective is not linear in the table
            let y = self.layer.forward(&self.ids).unwrap();
            y.data.iter().zip(&self.proj).map(|(a, b)| a * a * b).sum()
        }
        fn backward(&mut self) {
            let y = self.layer.forward(&self.ids).unwrap();
            let dy = Mat::from_vec(
                y.rows,
                y.cols,
                y.data.iter().zip(&self.proj).map(|(a, b)| 2.0 * a * b).collect(),
            )
            .unwrap();
            self.layer.backward(&self.ids.clone(), &dy);
        }
    }

    /// Conv1d followed by tanh, so the activation is covered as well.
    #[derive(Clone)]
    pub struct Conv1dProbe {
        pub layer: Conv1d<f64>,
        pub input: Tensor<f64>,
        pub proj: Vec<f64>,
    }

    impl Conv1dProbe {
        pub fn random<R: Rng>(rng: &mut R, steps: usize, c_in: usize, c_out: usize, k: usize) -> Self {
            Conv1dProbe {
                layer: Conv1d::new("conv", c_in, c_out, k, rng).unwrap(),
                input: rand_tensor("input", &[steps, c_in], rng),
                proj: (0..steps * c_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        }
    }
    params!(Conv1dProbe, layer; input);

    impl Probe for Conv1dProbe {
        fn loss(&self) -> f64 {
            let y = tanh_forward(&self.layer.forward(&as_mat(&self.input)).unwrap());
            project(&y, &self.proj)
        }
        fn backward(&mut self) {
            let x = as_mat(&self.input);
            let y = tanh_forward(&self.layer.forward(&x).unwrap());
            let dy = Mat::from_vec(y.rows, y.cols, self.proj.clone()).unwrap();
            let dz = tanh_backward(&y, &dy);
            let dx = self.layer.backward(&x, &dz);
            add_into(&mut self.input, &dx.data);
        }
    }

    #[derive(Clone)]
    pub struct LstmProbe {
        pub layer: Lstm<f64>,
        pub input: Tensor<f64>,
        pub proj: Vec<f64>,
    }

    impl LstmProbe {
        pub fn random<R: Rng>(rng: &mut R, steps: usize, d_in: usize, hidden: usize) -> Self {
            let mut layer = Lstm::new("lstm", d_in, hidden, rng);
            // larger weights than the default init exercise the saturating regions
            layer.visit_params_mut(&mut |t| t.data.iter_mut().for_each(|v| *v *= 2.0));
            LstmProbe {
                layer,
                input: rand_tensor("input", &[steps, d_in], rng),
                proj: (0..steps * hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        }
    }
    params!(LstmProbe, layer; input);

    impl Probe for LstmProbe {
        fn loss(&self) -> f64 {
            project(&self.layer.forward(&as_mat(&self.input)).unwrap().0, &self.proj)
        }
        fn backward(&mut self) {
            let x = as_mat(&self.input);
            let (y, cache) = self.layer.forward(&x).unwrap();
            let dy = Mat::from_vec(y.rows, y.cols, self.proj.clone()).unwrap();
            let dx = self.layer.backward(&x, &cache, &dy);
            add_into(&mut self.input, &dx.data);
        }
    }

    #[derive(Clone)]
    pub struct BiLstmProbe {
        pub layer: BiLstm<f64>,
        pub input: Tensor<f64>,
        pub proj: Vec<f64>,
    }

    impl BiLstmProbe {
        pub fn random<R: Rng>(rng: &mut R, steps: usize, d_in: usize, hidden: usize) -> Self {
            let mut layer = BiLstm::new("bilstm", d_in, hidden, rng);
            layer.visit_params_mut(&mut |t| t.data.iter_mut().for_each(|v| *v *= 2.0));
            BiLstmProbe {
                layer,
                input: rand_tensor("input", &[steps, d_in], rng),
                proj: (0..steps * 2 * hidden).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            }
        }
    }
    params!(BiLstmProbe, layer; input);

    impl Probe for BiLstmProbe {
        fn loss(&self) -> f64 {
            project(&self.layer.forward(&as_mat(&self.input)).unwrap().0, &self.proj)
        }
        fn backward(&mut self) {
            let x = as_mat(&self.input);
            let (y, cache) = self.layer.forward(&x).unwrap();
            let dy = Mat::from_vec(y.rows, y.cols, self.proj.clone()).unwrap();
            let dx = self.layer.backward(&x, &cache, &dy);
            add_into(&mut self.input, &dx.data);
        }
    }

    /// Which loss a [`LossProbe`] exercises.
    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum LossKind {
        CrossEntropy,
        Bce,
        Mse,
        L1,
    }

    #[derive(Clone)]
    pub struct LossProbe {
        pub kind: LossKind,
        pub pred: Tensor<f64>,
        pub classes: Vec<usize>,
        pub target: Vec<f64>,
    }

    impl LossProbe {
        pub fn random<R: Rng>(rng: &mut R, kind: LossKind, rows: usize, cols: usize) -> Self {
            let pred = Tensor::uniform("pred", &[rows, cols], 2.0, rng);
            let classes = (0..rows).map(|_| rng.gen_range(0..cols)).collect();
            let target = (0..rows * cols)
                .map(|_| match kind {
                    LossKind::Bce => f64::from(rng.gen_bool(0.5)),
                    _ => rng.gen_range(-2.0..2.0),
                })
                .collect::<Vec<f64>>();
            let mut p = LossProbe {
                kind,
                pred,
                classes,
                target,
            };
            // keep predictions away from targets so |·| has no kink within ±h
            if kind == LossKind::L1 {
                for (v, t) in p.pred.data.iter_mut().zip(&p.target) {
                    if (*v - t).abs() < 1e-2 {
                        *v += 0.05;
                    }
                }
            }
            p
        }

        fn eval(&self) -> (f64, Vec<f64>) {
            let x = &self.pred;
            match self.kind {
                LossKind::CrossEntropy => {
                    let (l, g) = loss::softmax_cross_entropy(&as_mat(x), &self.classes).unwrap();
                    (l, g.data)
                }
                LossKind::Bce => loss::sigmoid_bce(&x.data, &self.target).unwrap(),
                LossKind::Mse => loss::mse(&x.data, &self.target).unwrap(),
                LossKind::L1 => loss::l1(&x.data, &self.target).unwrap(),
            }
        }
    }

    impl Parameterized<f64> for LossProbe {
        fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<f64>)) {
            f(&self.pred);
        }
        fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<f64>)) {
            f(&mut self.pred);
        }
    }

    impl Probe for LossProbe {
        fn loss(&self) -> f64 {
            self.eval().0
        }
        fn backward(&mut self) {
            let (_, g) = self.eval();
            add_into(&mut self.pred, &g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::probes::*;
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn linear_passes_tightly() {
        let p = LinearProbe::random(&mut rng(1), 1, 3, 2);
        let opts = GradCheckOptions {
            tolerance: 1e-6,
            ..Default::default()
        };
        let r = check_probe(&p, &opts);
        assert!(r.passed(), "{r}");
        assert_eq!(r.checked, 6 + 2 + 3);
    }

    #[test]
    fn sign_flip_is_caught() {
        let mut p = LinearProbe::random(&mut rng(2), 2, 3, 2);
        p.corrupt = true;
        let r = check_probe(&p, &GradCheckOptions::default());
        assert!(!r.passed());
        assert!(r.worst.is_some());
        assert!(r.into_result().is_err());
    }

    #[test]
    fn recurrent_layers() {
        let opts = GradCheckOptions::default();
        let r = check_probe(&LstmProbe::random(&mut rng(3), 4, 3, 2), &opts);
        assert!(r.passed(), "{r}");
        let r = check_probe(&BiLstmProbe::random(&mut rng(4), 4, 3, 2), &opts);
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn conv_embedding_and_losses() {
        let opts = GradCheckOptions::default();
        assert!(check_probe(&Conv1dProbe::random(&mut rng(5), 5, 2, 3, 3), &opts).passed());
        assert!(check_probe(&EmbeddingProbe::random(&mut rng(6), 4, 3, 5), &opts).passed());
        for kind in [LossKind::CrossEntropy, LossKind::Bce, LossKind::Mse, LossKind::L1] {
            let r = check_probe(&LossProbe::random(&mut rng(7), kind, 3, 4), &opts);
            assert!(r.passed(), "{kind:?}: {r}");
        }
    }

    #[test]
    fn sampling_limits_coordinates() {
        let p = LinearProbe::random(&mut rng(8), 2, 10, 10);
        let opts = GradCheckOptions {
            max_per_tensor: Some(3),
            ..Default::default()
        };
        assert_eq!(check_probe(&p, &opts).checked, 9);
    }
}
