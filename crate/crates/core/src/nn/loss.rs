//! Losses with their gradients. Reductions accumulate in `f64`; each loss
//! is the mean over its elements and returns `(loss, dloss/dinput)`.

use super::{f64_of, sc, Mat, NnError, NnResult, Scalar};

fn check_finite<F: Scalar>(what: &str, xs: &[F]) -> NnResult<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite(what.to_string()))
    }
}

fn check_len(what: &str, a: usize, b: usize) -> NnResult<()> {
    if a != b {
        return Err(NnError::Shape(format!("{what}: {a} predictions, {b} targets")));
    }
    Ok(())
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(f64_of(v)));
    let exps: Vec<f64> = logits.iter().map(|&v| (f64_of(v) - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| sc(e / z)).collect()
}

pub fn softmax_rows<F: Scalar>(logits: &Mat<F>) -> Mat<F> {
    let mut out = Mat::zeros(logits.rows, logits.cols);
    for r in 0..logits.rows {
        out.row_mut(r).copy_from_slice(&softmax(logits.row(r)));
    }
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Cross-entropy of one row of logits against a class.
pub fn softmax_cross_entropy_row<F: Scalar>(logits: &[F], class: usize) -> NnResult<(f64, Vec<F>)> {
    check_finite("softmax cross-entropy logits", logits)?;
    if class >= logits.len() {
        return Err(NnError::Index {
            what: "class",
            index: class,
            size: logits.len(),
        });
    }
    let max = logits
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(f64_of(v)));
    let z: f64 = logits.iter().map(|&v| (f64_of(v) - max).exp()).sum();
    let lse = max + z.ln();
    let loss = lse - f64_of(logits[class]);
    let grad = logits
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let p = (f64_of(v) - lse).exp();
            sc(if k == class { p - 1.0 } else { p })
        })
        .collect();
    Ok((loss, grad))
}

/// Mean cross-entropy over rows.
pub fn softmax_cross_entropy<F: Scalar>(logits: &Mat<F>, classes: &[usize]) -> NnResult<(f64, Mat<F>)> {
    check_len("cross-entropy", logits.rows, classes.len())?;
    let n = logits.rows.max(1) as f64;
    let mut total = 0.0;
    let mut grad = Mat::zeros(logits.rows, logits.cols);
    for (r, &c) in classes.iter().enumerate() {
        let (l, g) = softmax_cross_entropy_row(logits.row(r), c)?;
        total += l;
        for (d, v) in grad.row_mut(r).iter_mut().zip(g) {
            *d = sc(f64_of(v) / n);
        }
    }
    Ok((total / n, grad))
}

/// Mean binary cross-entropy computed from logits.
pub fn sigmoid_bce<F: Scalar>(logits: &[F], targets: &[F]) -> NnResult<(f64, Vec<F>)> {
    check_len("bce", logits.len(), targets.len())?;
    check_finite("bce logits", logits)?;
    let n = logits.len().max(1) as f64;
    let mut total = 0.0;
    let grad = logits
        .iter()
        .zip(targets)
        .map(|(&x, &y)| {
            let (x, y) = (f64_of(x), f64_of(y));
            total += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
            let p = if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            };
            sc((p - y) / n)
        })
        .collect();
    Ok((total / n, grad))
}

pub fn mse<F: Scalar>(pred: &[F], target: &[F]) -> NnResult<(f64, Vec<F>)> {
    check_len("mse", pred.len(), target.len())?;
    check_finite("mse predictions", pred)?;
    let n = pred.len().max(1) as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = f64_of(p) - f64_of(t);
            total += d * d;
            sc(2.0 * d / n)
        })
        .collect();
    Ok((total / n, grad))
}

/// Mean absolute error. The subgradient at zero is taken as zero.
pub fn l1<F: Scalar>(pred: &[F], target: &[F]) -> NnResult<(f64, Vec<F>)> {
    check_len("l1", pred.len(), target.len())?;
    check_finite("l1 predictions", pred)?;
    let n = pred.len().max(1) as f64;
    let mut total = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = f64_of(p) - f64_of(t);
            total += d.abs();
            sc(if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            })
        })
        .collect();
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        for k in [2usize, 7, 101] {
            let (l, _) = softmax_cross_entropy_row(&vec![0.0f64; k], 1).unwrap();
            assert!((l - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_at_zero_logit() {
        let (l, g) = sigmoid_bce(&[0.0f64], &[1.0]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!((g[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_sums_to_one_and_is_stable() {
        let p = softmax(&[1000.0f32, 999.0, -1000.0]);
        let s: f32 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn nonnegative_losses() {
        let (m, _) = mse(&[1.0f64, -2.0], &[0.5, 3.0]).unwrap();
        let (a, _) = l1(&[1.0f64, -2.0], &[0.5, 3.0]).unwrap();
        assert!((m - (0.25 + 25.0) / 2.0).abs() < 1e-12);
        assert!((a - 2.75).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            mse(&[f64::NAN], &[0.0]),
            Err(NnError::NonFinite(_))
        ));
        assert!(softmax_cross_entropy_row(&[f32::INFINITY, 0.0], 0).is_err());
        assert!(sigmoid_bce(&[f64::NAN], &[1.0]).is_err());
        assert!(l1(&[f64::INFINITY], &[1.0]).is_err());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.1f32, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0f32; 4]), 0);
    }
}
