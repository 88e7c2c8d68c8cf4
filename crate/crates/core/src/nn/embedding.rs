use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Gathers rows of `table` (`[V × d]`) for `ids`, giving `[len × d]`.
pub fn embedding_lookup<T: Scalar>(table: &Tensor<T>, ids: &[u32]) -> Result<Tensor<T>> {
    if table.rank() != 2 {
        return Err(Error::Shape(format!("embedding table must be rank 2, got {:?}", table.shape())));
    }
    if ids.is_empty() {
        return Err(Error::InvalidArgument("embedding lookup of zero ids".into()));
    }
    let vocab = table.shape()[0];
    let dim = table.cols();
    let mut out = Tensor::zeros(&[ids.len(), dim]);
    for (i, &id) in ids.iter().enumerate() {
        let id = id as usize;
        if id >= vocab {
            return Err(Error::IndexOutOfRange { index: id, size: vocab });
        }
        out.row_mut(i).copy_from_slice(table.row(id));
    }
    Ok(out)
}

/// Scatters output-row gradients back into `grad_table`; rows for `pad_id`
/// receive nothing.
pub fn embedding_backward<T: Scalar>(
    grad_table: &mut Tensor<T>,
    ids: &[u32],
    dout: &Tensor<T>,
    pad_id: u32,
) {
    for (i, &id) in ids.iter().enumerate() {
        if id == pad_id {
            continue;
        }
        let row = grad_table.row_mut(id as usize);
        for (g, &d) in row.iter_mut().zip(dout.row(i)) {
            *g += d;
        }
    }
}
