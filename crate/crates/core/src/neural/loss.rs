use alloc::vec;
use alloc::vec::Vec;

use super::{check_dim, NeuralError, Scalar};

/// Log-softmax over the entries where `mask` is true; masked entries are
/// `-inf`. With an all-false mask every entry is `-inf`.
pub fn log_softmax_masked<T: Scalar>(logits: &[T], mask: &[bool]) -> Vec<T> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&x, _)| x)
        .fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return vec![T::neg_infinity(); logits.len()];
    }
    let mut z = T::zero();
    for (&x, &m) in logits.iter().zip(mask) {
        if m {
            z += (x - max).libm_exp();
        }
    }
    let log_z = max + z.libm_ln();
    logits
        .iter()
        .zip(mask)
        .map(|(&x, &m)| if m { x - log_z } else { T::neg_infinity() })
        .collect()
}

/// Masked softmax cross-entropy: returns `-log p(gold)` and its gradient
/// with respect to the logits (zero on masked entries).
pub fn softmax_nll<T: Scalar>(logits: &[T], gold: usize, mask: &[bool]) -> Result<(T, Vec<T>), NeuralError> {
    check_dim("mask", logits.len(), mask.len())?;
    if !mask.get(gold).copied().unwrap_or(false) {
        return Err(NeuralError::GoldMasked(gold));
    }
    let logp = log_softmax_masked(logits, mask);
    let grad = logp
        .iter()
        .zip(mask)
        .enumerate()
        .map(|(j, (&lp, &m))| {
            let p = if m { lp.libm_exp() } else { T::zero() };
            if j == gold {
                p - T::one()
            } else {
                p
            }
        })
        .collect();
    Ok((-logp[gold], grad))
}
