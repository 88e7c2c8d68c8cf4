use serde::{Deserialize, Serialize};

use super::{ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every entry, then zeroes the gradients.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, cfg: &AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - cfg.beta1), T::of(1.0 - cfg.beta2));
    let corr1 = T::of(1.0 - cfg.beta1.powi(t));
    let corr2 = T::of(1.0 - cfg.beta2.powi(t));
    let lr = T::of(cfg.lr);
    let eps = T::of(cfg.eps);
    for (w, g, m, v) in store.adam_parts() {
        let (w, g, m, v) = (w.data_mut(), g.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..w.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + one_b1 * gi;
            v[i] = b2 * v[i] + one_b2 * gi * gi;
            let m_hat = m[i] / corr1;
            let v_hat = v[i] / corr2;
            w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            g[i] = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Gradients, Tensor};

    fn scalar_store(w: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_vec(&[1], vec![w]).unwrap()).unwrap();
        s
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut s = scalar_store(0.7);
        adam_step(&mut s, &AdamConfig::default());
        let id = s.id("w").unwrap();
        assert_eq!(s.value(id).data(), &[0.7]);
        let (m, v) = s.adam_moments(id);
        assert_eq!((m.data()[0], v.data()[0]), (0.0, 0.0));
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_sign() {
        for g in [3.0, -0.02] {
            let mut s = scalar_store(1.0);
            let id = s.id("w").unwrap();
            let mut grads = Gradients::zeros_like(&s);
            grads.get_mut(id).data_mut()[0] = g;
            s.accumulate(&grads);
            adam_step(&mut s, &AdamConfig::default());
            let delta = s.value(id).data()[0] - 1.0;
            assert!((delta + 1e-3 * f64::signum(g)).abs() < 1e-8, "g={g} delta={delta}");
            assert_eq!(s.grad(id).data(), &[0.0]);
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut s = scalar_store(1.0);
        let id = s.id("w").unwrap();
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut prev = 1.0f64;
        for _ in 0..10 {
            let w = s.value(id).data()[0];
            let mut grads = Gradients::zeros_like(&s);
            grads.get_mut(id).data_mut()[0] = 2.0 * w;
            s.accumulate(&grads);
            adam_step(&mut s, &cfg);
            let now = s.value(id).data()[0].abs();
            assert!(now < prev, "|w| did not decrease: {prev} -> {now}");
            prev = now;
        }
    }
}
