//! Non-uniform upsampling by index gathering.

use super::ProsodyError;
use crate::nn::{Mat, Scalar};

/// Frame-to-phoneme index: phoneme `i` appears `durations[i]` times.
pub fn build_index(durations: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(durations.iter().sum());
    for (i, &d) in durations.iter().enumerate() {
        idx.extend(std::iter::repeat_n(i, d));
    }
    idx
}

/// Gathers rows of `x` by `index`.
pub fn regulate_length<F: Scalar>(x: &Mat<F>, index: &[usize]) -> Result<Mat<F>, ProsodyError> {
    let mut out = Mat::zeros(index.len(), x.cols);
    for (t, &i) in index.iter().enumerate() {
        if i >= x.rows {
            return Err(ProsodyError::Shape(format!(
                "frame {t} points at row {i} of {}",
                x.rows
            )));
        }
        out.row_mut(t).copy_from_slice(x.row(i));
    }
    Ok(out)
}

/// Adjoint of [`regulate_length`]: scatter-adds frame gradients back onto
/// the `n` source rows.
pub fn regulate_backward<F: Scalar>(dy: &Mat<F>, index: &[usize], n: usize) -> Mat<F> {
    let mut dx = Mat::zeros(n, dy.cols);
    for (t, &i) in index.iter().enumerate() {
        for (a, &b) in dx.row_mut(i).iter_mut().zip(dy.row(t)) {
            *a += b;
        }
    }
    dx
}
