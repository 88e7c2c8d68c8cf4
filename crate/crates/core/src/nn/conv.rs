//! Character CNN: same-padded 1-D convolution over the character axis, ReLU,
//! then max-over-time pooling.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CnnTrace<T> {
    input: Tensor<T>,
    /// Winning position per filter, `None` when the pooled value is zero.
    argmax: Vec<Option<usize>>,
    length: usize,
}

fn pad_left(kernel: usize) -> usize {
    (kernel - 1) / 2
}

/// Encodes the first `length` rows of `char_embs` (`[L × d_c]`) with
/// `filters` (`[k × d_c × f]`) and `bias` (`[f]`) into a length-`f` vector.
pub fn char_cnn_encode<T: Scalar>(
    char_embs: &Tensor<T>,
    length: usize,
    filters: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<(Vec<T>, CnnTrace<T>)> {
    if filters.rank() != 3 {
        return Err(Error::Shape(format!("filters must be [k, d_c, f], got {:?}", filters.shape())));
    }
    let (k, d_c, f) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    if char_embs.rank() != 2 || char_embs.cols() != d_c {
        return Err(Error::Shape(format!(
            "char embeddings {:?} do not match filters {:?}",
            char_embs.shape(),
            filters.shape()
        )));
    }
    bias.require_shape(&[f], "cnn bias")?;
    if length > char_embs.shape()[0] {
        return Err(Error::InvalidArgument("length exceeds rows".into()));
    }
    let pl = pad_left(k);
    let w = filters.data();
    let mut best = vec![T::zero(); f];
    let mut argmax = vec![None; f];
    let mut pre = vec![T::zero(); f];
    for p in 0..length {
        pre.copy_from_slice(bias.data());
        for j in 0..k {
            let src = p as isize + j as isize - pl as isize;
            if src < 0 || src as usize >= length {
                continue;
            }
            let x = char_embs.row(src as usize);
            for (d, &xd) in x.iter().enumerate() {
                let base = (j * d_c + d) * f;
                for (o, &wv) in pre.iter_mut().zip(&w[base..base + f]) {
                    *o += xd * wv;
                }
            }
        }
        for q in 0..f {
            // strict comparison keeps the first maximizing position
            if pre[q] > best[q] {
                best[q] = pre[q];
                argmax[q] = Some(p);
            }
        }
    }
    let trace = CnnTrace {
        input: char_embs.clone(),
        argmax,
        length,
    };
    Ok((best, trace))
}

/// Returns the input gradient and accumulates filter/bias gradients.
pub fn char_cnn_backward<T: Scalar>(
    trace: &CnnTrace<T>,
    dout: &[T],
    filters: &Tensor<T>,
    d_filters: &mut Tensor<T>,
    d_bias: &mut Tensor<T>,
) -> Tensor<T> {
    let (k, d_c, f) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    let pl = pad_left(k);
    let mut dx = Tensor::zeros(trace.input.shape());
    let w = filters.data();
    for q in 0..f {
        let Some(p) = trace.argmax[q] else { continue };
        let g = dout[q];
        d_bias.data_mut()[q] += g;
        for j in 0..k {
            let src = p as isize + j as isize - pl as isize;
            if src < 0 || src as usize >= trace.length {
                continue;
            }
            let src = src as usize;
            for d in 0..d_c {
                let idx = (j * d_c + d) * f + q;
                d_filters.data_mut()[idx] += trace.input.get2(src, d) * g;
                dx.row_mut(src)[d] += w[idx] * g;
            }
        }
    }
    dx
}
