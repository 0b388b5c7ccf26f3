//! Unrecorded tensor functions for evaluation-only code paths.

use super::kernels;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Softmax along `axis`, computed with max-subtraction. NaN inputs
/// propagate to NaN outputs in the affected lane.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= x.shape().len() {
        return Err(Error::shape("softmax", format!("axis {axis} for {:?}", x.shape())));
    }
    let data = kernels::softmax_axis(x.shape(), x.data(), axis);
    Tensor::new(x.shape().to_vec(), data)
}

/// Mean negative log-likelihood of `targets` under `logits` (`[seq, vocab]`)
/// over the tokens with non-zero `mask`.
pub fn cross_entropy(logits: &Tensor, targets: &[u32], mask: &[f64]) -> Result<f64> {
    let (n, v) = logits.dims2()?;
    if targets.len() != n || mask.len() != n {
        return Err(Error::shape(
            "cross_entropy",
            format!("{n} rows, {} targets, {} mask", targets.len(), mask.len()),
        ));
    }
    let total: f64 = mask.iter().sum();
    if total <= 0.0 {
        return Err(Error::NoSupervisedTokens);
    }
    let mut loss = 0.0;
    for r in 0..n {
        if mask[r] == 0.0 {
            continue;
        }
        let t = targets[r] as usize;
        if t >= v {
            return Err(Error::shape("cross_entropy", format!("target {t} >= vocab {v}")));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        loss += mask[r] * (lse - row[t]);
    }
    Ok(loss / total)
}

pub fn silu(x: f64) -> f64 {
    kernels::silu(x)
}

pub fn sigmoid(x: f64) -> f64 {
    kernels::sigmoid(x)
}

pub fn softplus(x: f64) -> f64 {
    kernels::softplus(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        let s = softmax(&Tensor::from_rows(&[&[0.0, 0.0]]), 1).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);

        let s = softmax(&Tensor::from_rows(&[&[1000.0, 0.0]]), 1).unwrap();
        assert!((s.data()[0] - 1.0).abs() < 1e-12 && s.data()[1] < 1e-300);
        assert!(s.data().iter().all(|v| v.is_finite()));

        let s = softmax(&Tensor::from_rows(&[&[1f64.ln(), 3f64.ln()]]), 1).unwrap();
        assert!((s.data()[0] - 0.25).abs() < 1e-15);
        assert!((s.data()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_nan_propagates() {
        let s = softmax(&Tensor::from_rows(&[&[f64::NAN, 0.0], &[1.0, 2.0]]), 1).unwrap();
        assert!(s.data()[0].is_nan());
        assert!(s.data()[2].is_finite());
    }

    #[test]
    fn cross_entropy_uniform_is_ln_vocab() {
        let logits = Tensor::zeros(&[3, 7]);
        let l = cross_entropy(&logits, &[0, 3, 6], &[1.0, 1.0, 1.0]).unwrap();
        assert!((l - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_masked_token_ignored() {
        let logits = Tensor::from_rows(&[&[2.0, 0.0], &[0.0, 5.0]]);
        let a = cross_entropy(&logits, &[0, 0], &[1.0, 0.0]).unwrap();
        let b = cross_entropy(&Tensor::from_rows(&[&[2.0, 0.0]]), &[0], &[1.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cross_entropy_two_token_hand_value() {
        // row 0: logits [0, ln 3] target 1 -> -ln(3/4); row 1: [ln 2, 0] target 1 -> -ln(1/3)
        let logits = Tensor::from_rows(&[&[0.0, 3f64.ln()], &[2f64.ln(), 0.0]]);
        let l = cross_entropy(&logits, &[1, 1], &[1.0, 1.0]).unwrap();
        let expect = 0.5 * ((4.0f64 / 3.0).ln() + 3f64.ln());
        assert!((l - expect).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_all_masked_is_error() {
        let logits = Tensor::zeros(&[2, 3]);
        assert!(matches!(
            cross_entropy(&logits, &[0, 1], &[0.0, 0.0]),
            Err(Error::NoSupervisedTokens)
        ));
    }
}
