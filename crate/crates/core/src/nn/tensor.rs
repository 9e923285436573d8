use rand::Rng;

use super::{sc, NnError, NnResult, Scalar};

/// A named trainable parameter with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            name: name.into(),
            shape: shape.to_vec(),
            data: vec![F::zero(); n],
            grad: vec![F::zero(); n],
        }
    }

    pub fn from_vec(name: impl Into<String>, shape: &[usize], data: Vec<F>) -> NnResult<Self> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(NnError::Shape(format!(
                "{name}: {} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Tensor {
            name,
            shape: shape.to_vec(),
            grad: vec![F::zero(); n],
            data,
        })
    }

    /// Uniform initialisation in `[-bound, bound]`.
    pub fn uniform<R: Rng>(name: impl Into<String>, shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(name, shape);
        for v in &mut t.data {
            *v = sc(rng.gen_range(-bound..=bound));
        }
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = F::zero());
    }

    pub fn cast<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| sc(super::f64_of(v))).collect(),
            grad: self.grad.iter().map(|&v| sc(super::f64_of(v))).collect(),
        }
    }
}

/// Anything that owns trainable tensors. Visitation order must be stable;
/// optimizer state and checkpoints rely on it.
pub trait Parameterized<F: Scalar> {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Tensor<F>));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Tensor<F>));

    fn zero_grad(&mut self) {
        self.visit_params_mut(&mut |t| t.zero_grad());
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |t| n += t.len());
        n
    }

    fn tensors(&self) -> Vec<&Tensor<F>> {
        let mut out = Vec::new();
        self.visit_params(&mut |t| out.push(t));
        out
    }

    fn flat_grads(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(&mut |t| out.extend_from_slice(&t.grad));
        out
    }

    fn flat_params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit_params(&mut |t| out.extend_from_slice(&t.data));
        out
    }

    /// Overwrites every gradient from a flat buffer in visitation order.
    fn set_flat_grads(&mut self, g: &[F]) {
        let mut off = 0;
        self.visit_params_mut(&mut |t| {
            let n = t.grad.len();
            t.grad.copy_from_slice(&g[off..off + n]);
            off += n;
        });
        assert_eq!(off, g.len(), "flat gradient length mismatch");
    }
}

/// Row-major activation matrix, one row per time step.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> NnResult<Self> {
        if data.len() != rows * cols {
            return Err(NnError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<F>]) -> NnResult<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NnError::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Mat {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    /// `[a | b]` along columns.
    pub fn concat_cols(a: &Mat<F>, b: &Mat<F>) -> NnResult<Mat<F>> {
        if a.rows != b.rows {
            return Err(NnError::Shape(format!(
                "concat of {} and {} rows",
                a.rows, b.rows
            )));
        }
        let mut out = Mat::zeros(a.rows, a.cols + b.cols);
        for r in 0..a.rows {
            let dst = out.row_mut(r);
            dst[..a.cols].copy_from_slice(a.row(r));
            dst[a.cols..].copy_from_slice(b.row(r));
        }
        Ok(out)
    }

    pub fn split_cols(&self, at: usize) -> (Mat<F>, Mat<F>) {
        let mut a = Mat::zeros(self.rows, at);
        let mut b = Mat::zeros(self.rows, self.cols - at);
        for r in 0..self.rows {
            let src = self.row(r);
            a.row_mut(r).copy_from_slice(&src[..at]);
            b.row_mut(r).copy_from_slice(&src[at..]);
        }
        (a, b)
    }

    pub fn reversed_rows(&self) -> Mat<F> {
        let mut out = Mat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            out.row_mut(self.rows - 1 - r).copy_from_slice(self.row(r));
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat<F>) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn cast<G: Scalar>(&self) -> Mat<G> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| sc(super::f64_of(v))).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn tanh_forward<F: Scalar>(x: &Mat<F>) -> Mat<F> {
    Mat {
        rows: x.rows,
        cols: x.cols,
        data: x.data.iter().map(|v| v.tanh()).collect(),
    }
}

/// Gradient through `y = tanh(x)` given the forward output `y`.
pub fn tanh_backward<F: Scalar>(y: &Mat<F>, dy: &Mat<F>) -> Mat<F> {
    Mat {
        rows: y.rows,
        cols: y.cols,
        data: y
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&y, &d)| d * (F::one() - y * y))
            .collect(),
    }
}

#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn axpy<F: Scalar>(alpha: F, x: &[F], y: &mut [F]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
