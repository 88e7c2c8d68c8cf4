use super::{RngState, Scalar, Tensor};

/// Uniform Glorot initialization for a kernel with the given fan-in/out.
pub fn glorot_uniform<T: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut RngState,
) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(shape, limit, rng)
}

/// Uniform in `[-limit, limit)`.
pub fn uniform<T: Scalar>(shape: &[usize], limit: f64, rng: &mut RngState) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::of(rng.uniform(-limit, limit)))
}
