//! Linear-chain CRF with virtual START/STOP states.
//!
//! `transitions` is `[(K+2) × (K+2)]`, indexed `[from, to]`; row `K` is START
//! and column `K+1` is STOP. A path `y` of length `ℓ` scores
//! `trans[START, y0] + Σ emis[t, y_t] + Σ trans[y_{t-1}, y_t] + trans[y_{ℓ-1}, STOP]`.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Score added to transitions that violate IOB constraints.
pub const INVALID_TRANSITION: f64 = -1e4;

fn check<T: Scalar>(emissions: &Tensor<T>, length: usize, transitions: &Tensor<T>) -> Result<usize> {
    let k = emissions.cols();
    transitions.require_shape(&[k + 2, k + 2], "crf transitions")?;
    if length == 0 || length > emissions.rows() {
        return Err(Error::InvalidArgument(format!(
            "crf length {length} invalid for {} rows",
            emissions.rows()
        )));
    }
    Ok(k)
}

fn log_sum_exp<T: Scalar>(xs: impl Iterator<Item = T> + Clone) -> T {
    let max = xs.clone().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<T>().ln()
}

/// Score of one tag path under the CRF.
pub fn crf_path_score<T: Scalar>(
    emissions: &Tensor<T>,
    tags: &[u32],
    length: usize,
    transitions: &Tensor<T>,
) -> Result<T> {
    let k = check(emissions, length, transitions)?;
    if tags.len() < length {
        return Err(Error::InvalidArgument("fewer tags than length".into()));
    }
    if let Some(&bad) = tags[..length].iter().find(|&&t| t as usize >= k) {
        return Err(Error::IndexOutOfRange { index: bad as usize, size: k });
    }
    let (start, stop) = (k, k + 1);
    let mut s = transitions.get2(start, tags[0] as usize);
    for t in 0..length {
        s += emissions.get2(t, tags[t] as usize);
        if t > 0 {
            s += transitions.get2(tags[t - 1] as usize, tags[t] as usize);
        }
    }
    s += transitions.get2(tags[length - 1] as usize, stop);
    Ok(s)
}

/// Forward-algorithm table `alpha[t][j]` (log-space).
fn forward_table<T: Scalar>(emissions: &Tensor<T>, length: usize, trans: &Tensor<T>, k: usize) -> Vec<Vec<T>> {
    let start = k;
    let mut alpha = Vec::with_capacity(length);
    alpha.push((0..k).map(|j| trans.get2(start, j) + emissions.get2(0, j)).collect::<Vec<T>>());
    for t in 1..length {
        let prev = &alpha[t - 1];
        let row: Vec<T> = (0..k)
            .map(|j| {
                emissions.get2(t, j) + log_sum_exp((0..k).map(|i| prev[i] + trans.get2(i, j)))
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// `log Z` over all paths of length `length`.
pub fn crf_log_partition<T: Scalar>(emissions: &Tensor<T>, length: usize, transitions: &Tensor<T>) -> Result<T> {
    let k = check(emissions, length, transitions)?;
    let alpha = forward_table(emissions, length, transitions, k);
    let last = &alpha[length - 1];
    Ok(log_sum_exp((0..k).map(|j| last[j] + transitions.get2(j, k + 1))))
}

/// Negative log-likelihood `log Z − score(tags)`.
pub fn crf_nll<T: Scalar>(
    emissions: &Tensor<T>,
    tags: &[u32],
    length: usize,
    transitions: &Tensor<T>,
) -> Result<T> {
    let score = crf_path_score(emissions, tags, length, transitions)?;
    Ok(crf_log_partition(emissions, length, transitions)? - score)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfGrads<T> {
    pub emissions: Tensor<T>,
    pub transitions: Tensor<T>,
}

/// NLL and its gradients, via forward-backward marginals.
pub fn crf_nll_backward<T: Scalar>(
    emissions: &Tensor<T>,
    tags: &[u32],
    length: usize,
    transitions: &Tensor<T>,
) -> Result<(T, CrfGrads<T>)> {
    let score = crf_path_score(emissions, tags, length, transitions)?;
    let k = emissions.cols();
    let (start, stop) = (k, k + 1);
    let tr = transitions;
    let alpha = forward_table(emissions, length, tr, k);
    let log_z = log_sum_exp((0..k).map(|j| alpha[length - 1][j] + tr.get2(j, stop)));

    let mut beta = vec![vec![T::zero(); k]; length];
    for j in 0..k {
        beta[length - 1][j] = tr.get2(j, stop);
    }
    for t in (0..length - 1).rev() {
        for i in 0..k {
            beta[t][i] = log_sum_exp(
                (0..k).map(|j| tr.get2(i, j) + emissions.get2(t + 1, j) + beta[t + 1][j]),
            );
        }
    }

    let mut de = Tensor::zeros(emissions.shape());
    let mut dt = Tensor::zeros(tr.shape());
    // expected counts minus gold counts
    for t in 0..length {
        for j in 0..k {
            de.row_mut(t)[j] = (alpha[t][j] + beta[t][j] - log_z).exp();
        }
    }
    for j in 0..k {
        dt.row_mut(start)[j] += (tr.get2(start, j) + emissions.get2(0, j) + beta[0][j] - log_z).exp();
        dt.row_mut(j)[stop] += (alpha[length - 1][j] + tr.get2(j, stop) - log_z).exp();
    }
    for t in 1..length {
        for i in 0..k {
            for j in 0..k {
                let lp = alpha[t - 1][i] + tr.get2(i, j) + emissions.get2(t, j) + beta[t][j] - log_z;
                dt.row_mut(i)[j] += lp.exp();
            }
        }
    }
    for t in 0..length {
        de.row_mut(t)[tags[t] as usize] -= T::one();
        if t > 0 {
            dt.row_mut(tags[t - 1] as usize)[tags[t] as usize] -= T::one();
        }
    }
    dt.row_mut(start)[tags[0] as usize] -= T::one();
    dt.row_mut(tags[length - 1] as usize)[stop] -= T::one();

    Ok((
        log_z - score,
        CrfGrads {
            emissions: de,
            transitions: dt,
        },
    ))
}

/// Best path and its score. Ties resolve to the lower tag index.
pub fn crf_viterbi<T: Scalar>(
    emissions: &Tensor<T>,
    length: usize,
    transitions: &Tensor<T>,
) -> Result<(Vec<u32>, T)> {
    let k = check(emissions, length, transitions)?;
    let (start, stop) = (k, k + 1);
    let mut delta: Vec<T> = (0..k).map(|j| transitions.get2(start, j) + emissions.get2(0, j)).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(length);
    for t in 1..length {
        let mut next = vec![T::zero(); k];
        let mut bp = vec![0usize; k];
        for j in 0..k {
            let mut best = delta[0] + transitions.get2(0, j);
            let mut arg = 0;
            for i in 1..k {
                let s = delta[i] + transitions.get2(i, j);
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            next[j] = best + emissions.get2(t, j);
            bp[j] = arg;
        }
        delta = next;
        back.push(bp);
    }
    let mut best = delta[0] + transitions.get2(0, stop);
    let mut last = 0;
    for j in 1..k {
        let s = delta[j] + transitions.get2(j, stop);
        if s > best {
            best = s;
            last = j;
        }
    }
    let mut path = vec![0u32; length];
    path[length - 1] = last as u32;
    for t in (1..length).rev() {
        last = back[t - 1][last];
        path[t - 1] = last as u32;
    }
    Ok((path, best))
}

/// Additive mask forbidding IOB2-invalid transitions (`O → I-X`,
/// `B-X/I-X → I-Y` with `X ≠ Y`, `START → I-X`).
pub fn iob_transition_mask<T: Scalar>(labels: &[String]) -> Tensor<T> {
    let k = labels.len();
    let mut m = Tensor::zeros(&[k + 2, k + 2]);
    let entity = |l: &str| l.split_once('-').map(|(p, t)| (p.to_string(), t.to_string()));
    for (j, to) in labels.iter().enumerate() {
        let Some((p_to, ty_to)) = entity(to) else { continue };
        if p_to != "I" {
            continue;
        }
        m.row_mut(k)[j] = T::of(INVALID_TRANSITION);
        for (i, from) in labels.iter().enumerate() {
            let ok = matches!(entity(from), Some((_, ty)) if ty == ty_to);
            if !ok {
                m.row_mut(i)[j] = T::of(INVALID_TRANSITION);
            }
        }
    }
    m
}
