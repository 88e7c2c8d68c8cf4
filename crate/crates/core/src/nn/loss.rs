use super::dense::softmax_in_place;
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn check_targets(k: usize, targets: &[u32], length: usize, rows: usize) -> Result<()> {
    if length == 0 || length > rows || length > targets.len() {
        return Err(Error::InvalidArgument(format!(
            "length {length} invalid for {rows} rows and {} targets",
            targets.len()
        )));
    }
    for &t in &targets[..length] {
        if t as usize >= k {
            return Err(Error::IndexOutOfRange { index: t as usize, size: k });
        }
    }
    Ok(())
}

/// Mean over the first `length` rows of `-ln probs[t, targets[t]]`.
pub fn masked_cross_entropy<T: Scalar>(probs: &Tensor<T>, targets: &[u32], length: usize) -> Result<T> {
    check_targets(probs.cols(), targets, length, probs.rows())?;
    let total: T = (0..length)
        .map(|t| -probs.get2(t, targets[t] as usize).ln())
        .sum();
    Ok(total / T::of(length as f64))
}

/// Gradient of [`masked_cross_entropy`] with respect to `probs`.
pub fn masked_cross_entropy_backward<T: Scalar>(
    probs: &Tensor<T>,
    targets: &[u32],
    length: usize,
) -> Tensor<T> {
    let mut d = Tensor::zeros(probs.shape());
    let n = T::of(length as f64);
    for t in 0..length {
        let y = targets[t] as usize;
        d.row_mut(t)[y] = -T::one() / (n * probs.get2(t, y));
    }
    d
}

/// Softmax followed by masked cross-entropy, computed from logits.
///
/// Returns `(loss, probs, d_logits)`; the loss uses log-sum-exp so it stays
/// finite even when a probability underflows.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[u32],
    length: usize,
) -> Result<(T, Tensor<T>, Tensor<T>)> {
    check_targets(logits.cols(), targets, length, logits.rows())?;
    let mut probs = logits.clone();
    let mut d = Tensor::zeros(logits.shape());
    let n = T::of(length as f64);
    let mut total = T::zero();
    for t in 0..logits.rows() {
        let row = logits.row(t);
        softmax_in_place(probs.row_mut(t));
        if t >= length {
            continue;
        }
        let y = targets[t] as usize;
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        total += lse - row[y];
        let dr = d.row_mut(t);
        for (k, g) in dr.iter_mut().enumerate() {
            *g = probs.get2(t, k) / n;
        }
        dr[y] -= T::one() / n;
    }
    Ok((total / n, probs, d))
}
