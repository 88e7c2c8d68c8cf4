use serde::{Deserialize, Serialize};

use super::{RngState, Scalar, Tensor};
use crate::error::{Error, Result};

/// Dropout variants.
///
/// * `Regular`: one Bernoulli draw per element.
/// * `Spatial`: one draw per feature channel (last axis), shared by all rows.
/// * `Recurrent`: one draw per hidden unit for a whole sequence. Applied to
///   a `[T × C]` tensor it behaves like `Spatial`; LSTMs use
///   [`Mask::recurrent`] directly on their hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropoutKind {
    Regular,
    Spatial,
    Recurrent,
}

/// Inverted-dropout scale factors (`0` or `1/(1-rate)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Mask<T> {
    scales: Vec<T>,
    per_element: bool,
}

impl<T: Scalar> Mask<T> {
    fn draw(n: usize, rate: f64, rng: &mut RngState) -> Vec<T> {
        let keep = T::of(1.0 / (1.0 - rate));
        (0..n)
            .map(|_| if rng.bernoulli(rate) { T::zero() } else { keep })
            .collect()
    }

    /// Per-sequence hidden-state mask, or `None` when dropout is inactive.
    pub fn recurrent(units: usize, rate: f64, rng: &mut RngState, training: bool) -> Option<Vec<T>> {
        (training && rate > 0.0).then(|| Self::draw(units, rate, rng))
    }

    pub fn scales(&self) -> &[T] {
        &self.scales
    }

    pub fn apply(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut out = x.clone();
        if self.per_element {
            for (v, &s) in out.data_mut().iter_mut().zip(&self.scales) {
                *v *= s;
            }
        } else {
            for r in 0..out.rows() {
                for (v, &s) in out.row_mut(r).iter_mut().zip(&self.scales) {
                    *v *= s;
                }
            }
        }
        out
    }

    /// Dropout is linear in its input, so the backward pass is the same product.
    pub fn backward(&self, dout: &Tensor<T>) -> Tensor<T> {
        self.apply(dout)
    }
}

/// Applies dropout. Inference mode, or `rate == 0`, is the identity and yields no mask.
pub fn dropout<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    kind: DropoutKind,
    rng: &mut RngState,
    training: bool,
) -> Result<(Tensor<T>, Option<Mask<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let mask = match kind {
        DropoutKind::Regular => Mask {
            scales: Mask::draw(x.len(), rate, rng),
            per_element: true,
        },
        DropoutKind::Spatial | DropoutKind::Recurrent => Mask {
            scales: Mask::draw(x.cols(), rate, rng),
            per_element: false,
        },
    };
    Ok((mask.apply(x), Some(mask)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones() -> Tensor<f32> {
        Tensor::from_fn(&[4, 6], |_| 1.0)
    }

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let mut rng = RngState::new(0);
        for kind in [DropoutKind::Regular, DropoutKind::Spatial, DropoutKind::Recurrent] {
            let (y, m) = dropout(&ones(), 0.0, kind, &mut rng, true).unwrap();
            assert_eq!(y, ones());
            assert!(m.is_none());
            let (y, _) = dropout(&ones(), 0.6, kind, &mut rng, false).unwrap();
            assert_eq!(y, ones());
        }
        assert_eq!(rng.position(), 0);
    }

    #[test]
    fn spatial_drops_whole_columns() {
        let mut rng = RngState::new(42);
        let (y, _) = dropout(&ones(), 0.5, DropoutKind::Spatial, &mut rng, true).unwrap();
        let mut seen = (false, false);
        for c in 0..6 {
            let col: Vec<f32> = (0..4).map(|r| y.get2(r, c)).collect();
            assert!(col.iter().all(|&v| v == 0.0) || col.iter().all(|&v| v == 2.0), "{col:?}");
            if col[0] == 0.0 { seen.0 = true } else { seen.1 = true }
        }
        assert!(seen.0 && seen.1, "seed 42 should drop some and keep some columns");
    }

    #[test]
    fn regular_mask_is_elementwise() {
        let mut rng = RngState::new(3);
        let (y, m) = dropout(&ones(), 0.5, DropoutKind::Regular, &mut rng, true).unwrap();
        assert_eq!(m.unwrap().scales().len(), 24);
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn rate_one_is_rejected() {
        let mut rng = RngState::new(3);
        assert!(dropout(&ones(), 1.0, DropoutKind::Regular, &mut rng, true).is_err());
    }

    #[test]
    fn fixed_mask_backward_is_exact() {
        let mut rng = RngState::new(5);
        let x = Tensor::<f64>::from_fn(&[3, 4], |i| i as f64 - 5.0);
        let (_, m) = dropout(&x, 0.3, DropoutKind::Regular, &mut rng, true).unwrap();
        let m = m.unwrap();
        let g = Tensor::from_fn(&[3, 4], |i| 1.0 + i as f64);
        // d/dx Σ g ⊙ (m ⊙ x) = g ⊙ m
        let dx = m.backward(&g);
        for i in 0..12 {
            assert_eq!(dx.data()[i], g.data()[i] * m.scales()[i]);
        }
    }
}
