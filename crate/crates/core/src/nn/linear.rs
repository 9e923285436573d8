use rand::Rng;

use super::tensor::{axpy, dot};
use super::{Mat, NnError, NnResult, Parameterized, Scalar, Tensor};

/// `y = x Wᵀ + b` applied row-wise. `weight` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<F> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> Linear<F> {
    pub fn new<R: Rng>(name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (d_in.max(1) as f64).sqrt();
        Linear {
            weight: Tensor::uniform(format!("{name}.weight"), &[d_out, d_in], bound, rng),
            bias: Tensor::uniform(format!("{name}.bias"), &[d_out], bound, rng),
        }
    }

    pub fn zeros(name: &str, d_in: usize, d_out: usize) -> Self {
        Linear {
            weight: Tensor::zeros(format!("{name}.weight"), &[d_out, d_in]),
            bias: Tensor::zeros(format!("{name}.bias"), &[d_out]),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn forward(&self, x: &Mat<F>) -> NnResult<Mat<F>> {
        let (d_in, d_out) = (self.d_in(), self.d_out());
        if x.cols != d_in {
            return Err(NnError::Shape(format!(
                "{}: input has {} columns, expected {d_in}",
                self.weight.name, x.cols
            )));
        }
        let mut y = Mat::zeros(x.rows, d_out);
        for t in 0..x.rows {
            let xr = x.row(t);
            let yr = y.row_mut(t);
            for (o, yo) in yr.iter_mut().enumerate() {
                *yo = self.bias.data[o] + dot(&self.weight.data[o * d_in..(o + 1) * d_in], xr);
            }
        }
        Ok(y)
    }

    pub fn backward(&mut self, x: &Mat<F>, dy: &Mat<F>) -> Mat<F> {
        let d_in = self.d_in();
        let mut dx = Mat::zeros(x.rows, d_in);
        for t in 0..x.rows {
            let xr = x.row(t);
            let dyr = dy.row(t);
            let dxr = dx.row_mut(t);
            for (o, &g) in dyr.iter().enumerate() {
                if g == F::zero() {
                    continue;
                }
                self.bias.grad[o] += g;
                let w = o * d_in..(o + 1) * d_in;
                axpy(g, xr, &mut self.weight.grad[w.clone()]);
                axpy(g, &self.weight.data[w], dxr);
            }
        }
        dx
    }

    pub fn cast<G: Scalar>(&self) -> Linear<G> {
        Linear {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

impl<F: Scalar> Parameterized<F> for Linear<F> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_by_hand() {
        let mut l = Linear::<f64>::zeros("l", 2, 1);
        l.weight.data = vec![2.0, -1.0];
        l.bias.data = vec![0.5];
        let x = Mat::from_vec(2, 2, vec![1.0, 1.0, 3.0, 0.0]).unwrap();
        let y = l.forward(&x).unwrap();
        assert_eq!(y.data, vec![1.5, 6.5]);
    }

    #[test]
    fn rejects_wrong_width() {
        let l = Linear::<f32>::zeros("l", 3, 2);
        assert!(l.forward(&Mat::zeros(1, 2)).is_err());
    }
}
