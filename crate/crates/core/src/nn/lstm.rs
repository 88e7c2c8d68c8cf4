//! LSTM cell, unidirectional/bidirectional sequence runners and the
//! character-level LSTM encoder.
//!
//! Gate layout along the `4·units` axis is `[input, forget, candidate, output]`.
//! Recurrent dropout multiplies the previous hidden state by a per-sequence
//! mask before the recurrent matmul.

use super::tensor::{mat_vec_t_acc, outer_acc, sigmoid, vec_mat_acc};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Borrowed LSTM weights: kernel `[d_in × 4h]`, recurrent kernel `[h × 4h]`, bias `[4h]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a, T> {
    pub kernel: &'a Tensor<T>,
    pub recurrent: &'a Tensor<T>,
    pub bias: &'a Tensor<T>,
}

impl<T: Scalar> LstmWeights<'_, T> {
    pub fn units(&self) -> usize {
        self.recurrent.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.recurrent.shape()[0];
        if self.recurrent.shape() != [h, 4 * h] {
            return Err(Error::Shape(format!(
                "recurrent kernel must be [h, 4h], got {:?}",
                self.recurrent.shape()
            )));
        }
        if self.kernel.rank() != 2 || self.kernel.shape()[1] != 4 * h {
            return Err(Error::Shape(format!(
                "kernel must be [d_in, {}], got {:?}",
                4 * h,
                self.kernel.shape()
            )));
        }
        self.bias.require_shape(&[4 * h], "lstm bias")
    }
}

/// Owned gradient accumulators matching [`LstmWeights`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads<T> {
    pub kernel: Tensor<T>,
    pub recurrent: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> LstmGrads<T> {
    pub fn zeros_like(w: &LstmWeights<'_, T>) -> Self {
        LstmGrads {
            kernel: Tensor::zeros(w.kernel.shape()),
            recurrent: Tensor::zeros(w.recurrent.shape()),
            bias: Tensor::zeros(w.bias.shape()),
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    gates: Vec<T>,
    tanh_c: Vec<T>,
}

fn forward_step<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    w: &LstmWeights<'_, T>,
) -> (Vec<T>, Vec<T>, StepCache<T>) {
    let h = w.units();
    let mut z = w.bias.data().to_vec();
    vec_mat_acc(x, w.kernel.data(), &mut z);
    vec_mat_acc(h_prev, w.recurrent.data(), &mut z);
    for k in 0..h {
        z[k] = sigmoid(z[k]);
        z[h + k] = sigmoid(z[h + k]);
        z[2 * h + k] = z[2 * h + k].tanh();
        z[3 * h + k] = sigmoid(z[3 * h + k]);
    }
    let mut c = vec![T::zero(); h];
    let mut tanh_c = vec![T::zero(); h];
    let mut h_new = vec![T::zero(); h];
    for k in 0..h {
        c[k] = z[h + k] * c_prev[k] + z[k] * z[2 * h + k];
        tanh_c[k] = c[k].tanh();
        h_new[k] = z[3 * h + k] * tanh_c[k];
    }
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: z,
        tanh_c,
    };
    (h_new, c, cache)
}

/// Backward through one step. Returns `(dx, dh_prev_masked, dc_prev)`.
fn backward_step<T: Scalar>(
    cache: &StepCache<T>,
    dh: &[T],
    dc_next: &[T],
    w: &LstmWeights<'_, T>,
    grads: &mut LstmGrads<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let h = w.units();
    let one = T::one();
    let g = &cache.gates;
    let mut dz = vec![T::zero(); 4 * h];
    let mut dc_prev = vec![T::zero(); h];
    for k in 0..h {
        let (i, f, cand, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
        let tc = cache.tanh_c[k];
        let d_o = dh[k] * tc;
        let dc = dc_next[k] + dh[k] * o * (one - tc * tc);
        let di = dc * cand;
        let dcand = dc * i;
        let df = dc * cache.c_prev[k];
        dc_prev[k] = dc * f;
        dz[k] = di * i * (one - i);
        dz[h + k] = df * f * (one - f);
        dz[2 * h + k] = dcand * (one - cand * cand);
        dz[3 * h + k] = d_o * o * (one - o);
    }
    outer_acc(&cache.x, &dz, grads.kernel.data_mut());
    outer_acc(&cache.h_prev, &dz, grads.recurrent.data_mut());
    for (b, &d) in grads.bias.data_mut().iter_mut().zip(&dz) {
        *b += d;
    }
    let mut dx = vec![T::zero(); cache.x.len()];
    mat_vec_t_acc(w.kernel.data(), &dz, &mut dx);
    let mut dh_prev = vec![T::zero(); h];
    mat_vec_t_acc(w.recurrent.data(), &dz, &mut dh_prev);
    (dx, dh_prev, dc_prev)
}

/// One LSTM step: returns `(h', c')`.
pub fn lstm_step<T: Scalar>(
    x: &[T],
    h: &[T],
    c: &[T],
    w: &LstmWeights<'_, T>,
) -> Result<(Vec<T>, Vec<T>)> {
    w.validate()?;
    if x.len() != w.input_dim() || h.len() != w.units() || c.len() != w.units() {
        return Err(Error::Shape(format!(
            "lstm_step: x {}, h {}, c {} for kernel {:?}",
            x.len(),
            h.len(),
            c.len(),
            w.kernel.shape()
        )));
    }
    let (h_new, c_new, _) = forward_step(x, h, c, w);
    Ok((h_new, c_new))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Everything needed to backpropagate through [`lstm_sequence`].
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    steps: Vec<StepCache<T>>,
    order: Vec<usize>,
    rec_mask: Option<Vec<T>>,
    seq_len: usize,
    input_dim: usize,
    last_h: Vec<T>,
}

impl<T: Scalar> LstmTrace<T> {
    /// Hidden state after the last processed step (zeros if none ran).
    pub fn last_hidden(&self) -> &[T] {
        &self.last_h
    }
}

/// Runs an LSTM over the first `length` rows of `inputs` (`[T × d_in]`) in the
/// given direction. Output is `[T × h]` with zero rows at positions `>= length`.
pub fn lstm_sequence<T: Scalar>(
    inputs: &Tensor<T>,
    length: usize,
    direction: Direction,
    w: &LstmWeights<'_, T>,
    rec_mask: Option<&[T]>,
) -> Result<(Tensor<T>, LstmTrace<T>)> {
    w.validate()?;
    let seq_len = inputs.shape()[0];
    if inputs.rank() != 2 || inputs.cols() != w.input_dim() {
        return Err(Error::Shape(format!(
            "lstm input {:?} does not match kernel {:?}",
            inputs.shape(),
            w.kernel.shape()
        )));
    }
    if length > seq_len {
        return Err(Error::InvalidArgument(format!("length {length} exceeds {seq_len} rows")));
    }
    let h = w.units();
    if let Some(m) = rec_mask {
        if m.len() != h {
            return Err(Error::Shape("recurrent mask length must equal units".into()));
        }
    }
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..length).collect(),
        Direction::Backward => (0..length).rev().collect(),
    };
    let mut out = Tensor::zeros(&[seq_len, h]);
    let mut hs = vec![T::zero(); h];
    let mut cs = vec![T::zero(); h];
    let mut steps = Vec::with_capacity(length);
    for &t in &order {
        if let Some(m) = rec_mask {
            for (x, &k) in hs.iter_mut().zip(m) {
                *x *= k;
            }
        }
        let (h_new, c_new, cache) = forward_step(inputs.row(t), &hs, &cs, w);
        out.row_mut(t).copy_from_slice(&h_new);
        hs = h_new;
        cs = c_new;
        steps.push(cache);
    }
    let trace = LstmTrace {
        steps,
        order,
        rec_mask: rec_mask.map(<[T]>::to_vec),
        seq_len,
        input_dim: w.input_dim(),
        last_h: hs,
    };
    Ok((out, trace))
}

/// Backpropagates per-position output gradients `dh_seq` (`[T × h]`, rows past
/// the length ignored) and/or a gradient on the final hidden state.
/// Returns the input gradient `[T × d_in]`.
pub fn lstm_sequence_backward<T: Scalar>(
    trace: &LstmTrace<T>,
    dh_seq: Option<&Tensor<T>>,
    dh_last: Option<&[T]>,
    w: &LstmWeights<'_, T>,
    grads: &mut LstmGrads<T>,
) -> Tensor<T> {
    let h = w.units();
    let mut dx_all = Tensor::zeros(&[trace.seq_len, trace.input_dim]);
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let n = trace.steps.len();
    for s in (0..n).rev() {
        let t = trace.order[s];
        let mut dh = dh_next.clone();
        if let Some(d) = dh_seq {
            for (a, &b) in dh.iter_mut().zip(d.row(t)) {
                *a += b;
            }
        }
        if s == n - 1 {
            if let Some(d) = dh_last {
                for (a, &b) in dh.iter_mut().zip(d) {
                    *a += b;
                }
            }
        }
        let (dx, mut dh_prev, dc_prev) = backward_step(&trace.steps[s], &dh, &dc_next, w, grads);
        if let Some(m) = &trace.rec_mask {
            for (a, &k) in dh_prev.iter_mut().zip(m) {
                *a *= k;
            }
        }
        dx_all.row_mut(t).copy_from_slice(&dx);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    dx_all
}

/// Unidirectional LSTM over a word's characters (`[L × d_c]`), returning the
/// final hidden state. An input with zero true characters encodes to zeros.
pub fn char_lstm_encode<T: Scalar>(
    char_embs: &Tensor<T>,
    length: usize,
    w: &LstmWeights<'_, T>,
    rec_mask: Option<&[T]>,
) -> Result<(Vec<T>, LstmTrace<T>)> {
    let (_, trace) = lstm_sequence(char_embs, length, Direction::Forward, w, rec_mask)?;
    Ok((trace.last_hidden().to_vec(), trace))
}

pub fn char_lstm_backward<T: Scalar>(
    trace: &LstmTrace<T>,
    d_encoding: &[T],
    w: &LstmWeights<'_, T>,
    grads: &mut LstmGrads<T>,
) -> Tensor<T> {
    lstm_sequence_backward(trace, None, Some(d_encoding), w, grads)
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace<T> {
    fwd: LstmTrace<T>,
    bwd: LstmTrace<T>,
    units: usize,
}

/// Bidirectional LSTM over the first `length` rows. Output `[T × 2h]` holds
/// `[h_fwd; h_bwd]` per position and zero rows past `length`.
pub fn bilstm<T: Scalar>(
    seq: &Tensor<T>,
    length: usize,
    w_fwd: &LstmWeights<'_, T>,
    w_bwd: &LstmWeights<'_, T>,
    masks: (Option<&[T]>, Option<&[T]>),
) -> Result<(Tensor<T>, BiLstmTrace<T>)> {
    if length == 0 {
        return Err(Error::InvalidArgument("bilstm needs length >= 1".into()));
    }
    if w_fwd.units() != w_bwd.units() {
        return Err(Error::Shape("forward and backward units differ".into()));
    }
    let (of, tf) = lstm_sequence(seq, length, Direction::Forward, w_fwd, masks.0)?;
    let (ob, tb) = lstm_sequence(seq, length, Direction::Backward, w_bwd, masks.1)?;
    let h = w_fwd.units();
    let t_max = seq.shape()[0];
    let mut out = Tensor::zeros(&[t_max, 2 * h]);
    for t in 0..length {
        let row = out.row_mut(t);
        row[..h].copy_from_slice(of.row(t));
        row[h..].copy_from_slice(ob.row(t));
    }
    Ok((
        out,
        BiLstmTrace {
            fwd: tf,
            bwd: tb,
            units: h,
        },
    ))
}

pub fn bilstm_backward<T: Scalar>(
    trace: &BiLstmTrace<T>,
    dout: &Tensor<T>,
    w_fwd: &LstmWeights<'_, T>,
    w_bwd: &LstmWeights<'_, T>,
    g_fwd: &mut LstmGrads<T>,
    g_bwd: &mut LstmGrads<T>,
) -> Tensor<T> {
    let h = trace.units;
    let t_max = dout.shape()[0];
    let mut df = Tensor::zeros(&[t_max, h]);
    let mut db = Tensor::zeros(&[t_max, h]);
    for t in 0..t_max {
        let r = dout.row(t);
        df.row_mut(t).copy_from_slice(&r[..h]);
        db.row_mut(t).copy_from_slice(&r[h..]);
    }
    let mut dx = lstm_sequence_backward(&trace.fwd, Some(&df), None, w_fwd, g_fwd);
    let dx_b = lstm_sequence_backward(&trace.bwd, Some(&db), None, w_bwd, g_bwd);
    dx.add_assign(&dx_b);
    dx
}
