//! Training losses and their gradients.

use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// Mean squared error over the unmasked entries, with its gradient
/// `2 (pred - target) / N`. Masked entries (`mask[i] == false`) contribute
/// neither loss nor gradient; with no valid entries the loss is zero.
pub fn mse_loss<F: Scalar>(pred: &[F], target: &[F], mask: Option<&[bool]>) -> Result<(F, Vec<F>)> {
    if pred.len() != target.len() {
        return Err(Error::dim("mse_loss", pred.len(), target.len()));
    }
    if let Some(m) = mask {
        if m.len() != pred.len() {
            return Err(Error::dim("mse_loss mask", pred.len(), m.len()));
        }
    }
    let valid = |i: usize| mask.is_none_or(|m| m[i]);
    let n = (0..pred.len()).filter(|&i| valid(i)).count();
    let mut grad = vec![F::zero(); pred.len()];
    if n == 0 {
        return Ok((F::zero(), grad));
    }
    let n = F::from_usize(n).unwrap();
    let two = F::lit(2.0);
    let mut loss = F::zero();
    for i in (0..pred.len()).filter(|&i| valid(i)) {
        let d = pred[i] - target[i];
        loss += d * d;
        grad[i] = two * d / n;
    }
    Ok((loss / n, grad))
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Categorical cross-entropy `-ln probs[target]`, and the gradient of the
/// combined softmax + cross-entropy with respect to the logits,
/// `probs - onehot(target)`. With two classes this is the binary form.
pub fn cross_entropy_loss<F: Scalar>(probs: &[F], target: usize) -> Result<(F, Vec<F>)> {
    if target >= probs.len() {
        return Err(Error::config(format!(
            "class index {target} out of range for {} classes",
            probs.len()
        )));
    }
    let total: F = probs.iter().copied().sum();
    if probs.iter().any(|&p| p < F::zero() || !p.is_finite()) || (total - F::one()).abs() > F::lit(1e-6) {
        return Err(Error::config("cross-entropy input is not a probability vector"));
    }
    let loss = -probs[target].ln();
    let mut grad = probs.to_vec();
    grad[target] -= F::one();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let (l, g) = mse_loss(&[1.0f64, 2.0], &[1.0, 2.0], None).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (l, g) = mse_loss(&[0.0f64, 2.0], &[1.0, 0.0], None).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(g, vec![-1.0, 2.0]);
        assert!(mse_loss(&[0.0f64], &[1.0, 0.0], None).is_err());
    }

    #[test]
    fn mse_mask_excludes_rows() {
        let (l, g) = mse_loss(&[5.0f64, 0.0, 2.0], &[0.0, 1.0, 0.0], Some(&[false, true, true])).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn cross_entropy_examples() {
        let mut onehot = vec![0.0f64; 16];
        onehot[3] = 1.0;
        let (l, _) = cross_entropy_loss(&onehot, 3).unwrap();
        assert_eq!(l, 0.0);
        let uniform = vec![1.0f64 / 16.0; 16];
        let (l, g) = cross_entropy_loss(&uniform, 7).unwrap();
        assert!((l - 16f64.ln()).abs() < 1e-12);
        assert!((l - 2.7726).abs() < 1e-4);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        assert!(cross_entropy_loss(&uniform, 16).is_err());
        assert!(cross_entropy_loss(&[0.5f64, 0.6], 0).is_err());
    }

    #[test]
    fn softmax_is_normalized() {
        let p = softmax(&[1000.0f64, 0.0, -3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[0] > 0.99);
    }
}
