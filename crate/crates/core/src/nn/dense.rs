use serde::{Deserialize, Serialize};

use super::tensor::{mat_vec_t_acc, outer_acc, vec_mat_acc};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Softmax,
    Relu,
    Tanh,
}

/// Row-wise softmax with max subtraction, in place.
pub fn softmax_rows<T: Scalar>(x: &mut Tensor<T>) {
    for r in 0..x.rows() {
        softmax_in_place(x.row_mut(r));
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// `activation(x·W + b)` applied to every row of `x` (`[.. × d_in]`).
pub fn dense<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    activation: Activation,
) -> Result<Tensor<T>> {
    if w.rank() != 2 || x.cols() != w.shape()[0] {
        return Err(Error::Shape(format!(
            "dense input {:?} vs kernel {:?}",
            x.shape(),
            w.shape()
        )));
    }
    let d_out = w.shape()[1];
    b.require_shape(&[d_out], "dense bias")?;
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = d_out;
    let mut out = Tensor::zeros(&shape);
    for r in 0..x.rows() {
        let o = out.row_mut(r);
        o.copy_from_slice(b.data());
        vec_mat_acc(x.row(r), w.data(), o);
        match activation {
            Activation::None => {}
            Activation::Softmax => softmax_in_place(o),
            Activation::Relu => o.iter_mut().for_each(|v| *v = v.max(T::zero())),
            Activation::Tanh => o.iter_mut().for_each(|v| *v = v.tanh()),
        }
    }
    Ok(out)
}

/// Backward of [`dense`] given its input `x` and output `y`. Returns `dx` and
/// accumulates into `dw`, `db`.
pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    y: &Tensor<T>,
    dy: &Tensor<T>,
    w: &Tensor<T>,
    activation: Activation,
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
) -> Tensor<T> {
    let d_out = w.shape()[1];
    let mut dx = Tensor::zeros(x.shape());
    let mut dz = vec![T::zero(); d_out];
    for r in 0..x.rows() {
        let (yr, gr) = (y.row(r), dy.row(r));
        if gr.iter().all(|&g| g == T::zero()) {
            continue;
        }
        match activation {
            Activation::None => dz.copy_from_slice(gr),
            Activation::Softmax => {
                let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                for k in 0..d_out {
                    dz[k] = yr[k] * (gr[k] - dot);
                }
            }
            Activation::Relu => {
                for k in 0..d_out {
                    dz[k] = if yr[k] > T::zero() { gr[k] } else { T::zero() };
                }
            }
            Activation::Tanh => {
                for k in 0..d_out {
                    dz[k] = gr[k] * (T::one() - yr[k] * yr[k]);
                }
            }
        }
        outer_acc(x.row(r), &dz, dw.data_mut());
        for (b, &d) in db.data_mut().iter_mut().zip(&dz) {
            *b += d;
        }
        mat_vec_t_acc(w.data(), &dz, dx.row_mut(r));
    }
    dx
}
