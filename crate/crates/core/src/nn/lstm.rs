use rand::Rng;

use super::tensor::{axpy, dot};
use super::{Mat, NnError, NnResult, Parameterized, Scalar, Tensor};

/// Single-direction LSTM. Gate rows are laid out `[i, f, g, o]`, each `H` wide:
/// `weight_ih` is `4H × D`, `weight_hh` is `4H × H`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm<F> {
    pub weight_ih: Tensor<F>,
    pub weight_hh: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Clone, Debug)]
pub struct LstmCache<F> {
    /// Post-nonlinearity gates, `T × 4H`.
    gates: Mat<F>,
    cells: Mat<F>,
    tanh_cells: Mat<F>,
    hidden: Mat<F>,
}

#[inline]
fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

impl<F: Scalar> Lstm<F> {
    pub fn new<R: Rng>(name: &str, d_in: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        let mut bias = Tensor::uniform(format!("{name}.bias"), &[4 * hidden], bound, rng);
        // forget gate starts open
        for v in &mut bias.data[hidden..2 * hidden] {
            *v += F::one();
        }
        Lstm {
            weight_ih: Tensor::uniform(format!("{name}.weight_ih"), &[4 * hidden, d_in], bound, rng),
            weight_hh: Tensor::uniform(format!("{name}.weight_hh"), &[4 * hidden, hidden], bound, rng),
            bias,
        }
    }

    pub fn zeros(name: &str, d_in: usize, hidden: usize) -> Self {
        Lstm {
            weight_ih: Tensor::zeros(format!("{name}.weight_ih"), &[4 * hidden, d_in]),
            weight_hh: Tensor::zeros(format!("{name}.weight_hh"), &[4 * hidden, hidden]),
            bias: Tensor::zeros(format!("{name}.bias"), &[4 * hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.weight_hh.shape[1]
    }

    pub fn d_in(&self) -> usize {
        self.weight_ih.shape[1]
    }

    pub fn forward(&self, x: &Mat<F>) -> NnResult<(Mat<F>, LstmCache<F>)> {
        let (d, h) = (self.d_in(), self.hidden());
        if x.cols != d {
            return Err(NnError::Shape(format!(
                "{}: input has {} columns, expected {d}",
                self.weight_ih.name, x.cols
            )));
        }
        let steps = x.rows;
        let mut gates = Mat::zeros(steps, 4 * h);
        let mut cells = Mat::zeros(steps, h);
        let mut tanh_cells = Mat::zeros(steps, h);
        let mut hidden = Mat::zeros(steps, h);
        let mut h_prev = vec![F::zero(); h];
        let mut c_prev = vec![F::zero(); h];
        let mut z = vec![F::zero(); 4 * h];
        for t in 0..steps {
            let xr = x.row(t);
            for (r, zr) in z.iter_mut().enumerate() {
                *zr = self.bias.data[r]
                    + dot(&self.weight_ih.data[r * d..(r + 1) * d], xr)
                    + dot(&self.weight_hh.data[r * h..(r + 1) * h], &h_prev);
            }
            let g = gates.row_mut(t);
            for j in 0..h {
                g[j] = sigmoid(z[j]);
                g[h + j] = sigmoid(z[h + j]);
                g[2 * h + j] = z[2 * h + j].tanh();
                g[3 * h + j] = sigmoid(z[3 * h + j]);
            }
            for j in 0..h {
                let c = g[h + j] * c_prev[j] + g[j] * g[2 * h + j];
                let tc = c.tanh();
                cells.row_mut(t)[j] = c;
                tanh_cells.row_mut(t)[j] = tc;
                hidden.row_mut(t)[j] = g[3 * h + j] * tc;
            }
            h_prev.copy_from_slice(hidden.row(t));
            c_prev.copy_from_slice(cells.row(t));
        }
        let out = hidden.clone();
        Ok((
            out,
            LstmCache {
                gates,
                cells,
                tanh_cells,
                hidden,
            },
        ))
    }

    /// Backpropagation through time. `dh` is the gradient w.r.t. every output step.
    pub fn backward(&mut self, x: &Mat<F>, cache: &LstmCache<F>, dh: &Mat<F>) -> Mat<F> {
        let (d, h) = (self.d_in(), self.hidden());
        let steps = x.rows;
        let mut dx = Mat::zeros(steps, d);
        let mut dh_next = vec![F::zero(); h];
        let mut dc_next = vec![F::zero(); h];
        let mut dz = vec![F::zero(); 4 * h];
        let zeros = vec![F::zero(); h];
        for t in (0..steps).rev() {
            let g = cache.gates.row(t);
            let tc = cache.tanh_cells.row(t);
            let c_prev = if t > 0 { cache.cells.row(t - 1) } else { &zeros[..] };
            let h_prev = if t > 0 { cache.hidden.row(t - 1) } else { &zeros[..] };
            let dhr = dh.row(t);
            for j in 0..h {
                let dht = dhr[j] + dh_next[j];
                let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let d_o = dht * tc[j];
                let dc = dht * o * (F::one() - tc[j] * tc[j]) + dc_next[j];
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * c_prev[j];
                dc_next[j] = dc * f;
                dz[j] = d_i * i * (F::one() - i);
                dz[h + j] = d_f * f * (F::one() - f);
                dz[2 * h + j] = d_g * (F::one() - gg * gg);
                dz[3 * h + j] = d_o * o * (F::one() - o);
            }
            dh_next.iter_mut().for_each(|v| *v = F::zero());
            let xr = x.row(t);
            let dxr = dx.row_mut(t);
            for (r, &gz) in dz.iter().enumerate() {
                if gz == F::zero() {
                    continue;
                }
                self.bias.grad[r] += gz;
                let wi = r * d..(r + 1) * d;
                axpy(gz, xr, &mut self.weight_ih.grad[wi.clone()]);
                axpy(gz, &self.weight_ih.data[wi], dxr);
                let wh = r * h..(r + 1) * h;
                axpy(gz, h_prev, &mut self.weight_hh.grad[wh.clone()]);
                axpy(gz, &self.weight_hh.data[wh], &mut dh_next);
            }
        }
        dx
    }

    pub fn cast<G: Scalar>(&self) -> Lstm<G> {
        Lstm {
            weight_ih: self.weight_ih.cast(),
            weight_hh: self.weight_hh.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for Lstm<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        f(&self.weight_ih);
        f(&self.weight_hh);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        f(&mut self.weight_ih);
        f(&mut self.weight_hh);
        f(&mut self.bias);
    }
}

/// Forward and backward-in-time LSTMs with outputs concatenated per step
/// as `[forward | backward]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm<F> {
    pub fwd: Lstm<F>,
    pub bwd: Lstm<F>,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache<F> {
    fwd: LstmCache<F>,
    bwd: LstmCache<F>,
    x_rev: Mat<F>,
}

impl<F: Scalar> BiLstm<F> {
    pub fn new<R: Rng>(name: &str, d_in: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            fwd: Lstm::new(&format!("{name}.fwd"), d_in, hidden, rng),
            bwd: Lstm::new(&format!("{name}.bwd"), d_in, hidden, rng),
        }
    }

    pub fn zeros(name: &str, d_in: usize, hidden: usize) -> Self {
        BiLstm {
            fwd: Lstm::zeros(&format!("{name}.fwd"), d_in, hidden),
            bwd: Lstm::zeros(&format!("{name}.bwd"), d_in, hidden),
        }
    }

    pub fn d_out(&self) -> usize {
        2 * self.fwd.hidden()
    }

    pub fn forward(&self, x: &Mat<F>) -> NnResult<(Mat<F>, BiLstmCache<F>)> {
        if x.rows == 0 {
            return Err(NnError::Shape("BiLSTM needs at least one step".into()));
        }
        let (hf, cf) = self.fwd.forward(x)?;
        let x_rev = x.reversed_rows();
        let (hb, cb) = self.bwd.forward(&x_rev)?;
        let out = Mat::concat_cols(&hf, &hb.reversed_rows())?;
        Ok((
            out,
            BiLstmCache {
                fwd: cf,
                bwd: cb,
                x_rev,
            },
        ))
    }

    pub fn backward(&mut self, x: &Mat<F>, cache: &BiLstmCache<F>, dy: &Mat<F>) -> Mat<F> {
        let (dhf, dhb) = dy.split_cols(self.fwd.hidden());
        let mut dx = self.fwd.backward(x, &cache.fwd, &dhf);
        let dx_rev = self
            .bwd
            .backward(&cache.x_rev, &cache.bwd, &dhb.reversed_rows());
        dx.add_assign(&dx_rev.reversed_rows());
        dx
    }

    pub fn cast<G: Scalar>(&self) -> BiLstm<G> {
        BiLstm {
            fwd: self.fwd.cast(),
            bwd: self.bwd.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for BiLstm<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        self.fwd.visit_params(f);
        self.bwd.visit_params(f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        self.fwd.visit_params_mut(f);
        self.bwd.visit_params_mut(f);
    }
}
