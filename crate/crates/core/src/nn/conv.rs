use rand::Rng;

use super::tensor::{axpy, dot};
use super::{Mat, NnError, NnResult, Parameterized, Scalar, Tensor};

/// 1-D cross-correlation over time with zero "same" padding.
/// `weight` is `C_out × C_in × K`, K odd.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Conv1d<F> {
    pub fn new<R: Rng>(name: &str, c_in: usize, c_out: usize, k: usize, rng: &mut R) -> NnResult<Self> {
        check_kernel(k)?;
        let bound = 1.0 / ((c_in * k).max(1) as f64).sqrt();
        Ok(Conv1d {
            weight: Tensor::uniform(format!("{name}.weight"), &[c_out, c_in, k], bound, rng),
            bias: Tensor::uniform(format!("{name}.bias"), &[c_out], bound, rng),
        })
    }

    pub fn zeros(name: &str, c_in: usize, c_out: usize, k: usize) -> NnResult<Self> {
        check_kernel(k)?;
        Ok(Conv1d {
            weight: Tensor::zeros(format!("{name}.weight"), &[c_out, c_in, k]),
            bias: Tensor::zeros(format!("{name}.bias"), &[c_out]),
        })
    }

    pub fn c_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn c_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape[2]
    }

    /// Weights reordered to `[k][o][i]` so the inner loop is contiguous.
    fn taps(&self) -> Vec<F> {
        let (co, ci, k) = (self.c_out(), self.c_in(), self.kernel());
        let mut out = vec![F::zero(); co * ci * k];
        for o in 0..co {
            for i in 0..ci {
                for j in 0..k {
                    out[(j * co + o) * ci + i] = self.weight.data[(o * ci + i) * k + j];
                }
            }
        }
        out
    }

    pub fn forward(&self, x: &Mat<F>) -> NnResult<Mat<F>> {
        let (co, ci, k) = (self.c_out(), self.c_in(), self.kernel());
        if x.cols != ci {
            return Err(NnError::Shape(format!(
                "{}: input has {} channels, expected {ci}",
                self.weight.name, x.cols
            )));
        }
        let pad = k / 2;
        let taps = self.taps();
        let mut y = Mat::zeros(x.rows, co);
        for t in 0..x.rows {
            let yr = y.row_mut(t);
            yr.copy_from_slice(&self.bias.data);
            for j in 0..k {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < x.rows) else {
                    continue;
                };
                let xr = x.row(src);
                for (o, yo) in yr.iter_mut().enumerate() {
                    let w = &taps[(j * co + o) * ci..(j * co + o + 1) * ci];
                    *yo += dot(w, xr);
                }
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, x: &Mat<F>, dy: &Mat<F>) -> Mat<F> {
        let (co, ci, k) = (self.c_out(), self.c_in(), self.kernel());
        let pad = k / 2;
        let taps = self.taps();
        let mut dtaps = vec![F::zero(); taps.len()];
        let mut dx = Mat::zeros(x.rows, ci);
        for t in 0..x.rows {
            let dyr = dy.row(t);
            for (o, &g) in dyr.iter().enumerate() {
                self.bias.grad[o] += g;
            }
            for j in 0..k {
                let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < x.rows) else {
                    continue;
                };
                let xr = x.row(src);
                for (o, &g) in dyr.iter().enumerate() {
                    if g == F::zero() {
                        continue;
                    }
                    let r = (j * co + o) * ci..(j * co + o + 1) * ci;
                    axpy(g, xr, &mut dtaps[r.clone()]);
                    axpy(g, &taps[r], dx.row_mut(src));
                }
            }
        }
        for o in 0..co {
            for i in 0..ci {
                for j in 0..k {
                    self.weight.grad[(o * ci + i) * k + j] += dtaps[(j * co + o) * ci + i];
                }
            }
        }
        dx
    }

    pub fn cast<G: Scalar>(&self) -> Conv1d<G> {
        Conv1d {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

fn check_kernel(k: usize) -> NnResult<()> {
    if k % 2 == 0 {
        return Err(NnError::Shape(format!(
            "kernel size {k} must be odd for same padding"
        )));
    }
    Ok(())
}

impl<F: Scalar> Parameterized<F> for Conv1d<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}
