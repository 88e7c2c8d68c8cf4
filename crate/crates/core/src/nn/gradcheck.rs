use super::{ParamStore, RngState};

/// Outcome of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat element index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Denominator floor so that gradients which are zero up to round-off do not
/// produce spurious relative errors.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Error relative to the finite-difference reference.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(REL_ERROR_FLOOR)
}

/// Compares the gradients currently stored in `store` with central finite
/// differences of `loss`.
///
/// Tensors larger than `max_per_tensor` elements are checked on a seeded
/// random sample of that many elements.
pub fn grad_check<F>(mut loss: F, store: &mut ParamStore<f64>, h: f64, max_per_tensor: usize) -> GradCheckReport
where
    F: FnMut(&ParamStore<f64>) -> f64,
{
    let mut rng = RngState::new(0x6772_6164);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.value(id).len();
        let mut idx: Vec<usize> = (0..n).collect();
        if n > max_per_tensor {
            rng.shuffle(&mut idx);
            idx.truncate(max_per_tensor);
            idx.sort_unstable();
        }
        for e in idx {
            let orig = store.value(id).data()[e];
            store.value_mut(id).data_mut()[e] = orig + h;
            let plus = loss(store);
            store.value_mut(id).data_mut()[e] = orig - h;
            let minus = loss(store);
            store.value_mut(id).data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = store.grad(id).data()[e];
            let err = relative_error(analytic, numeric);

            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((store.name(id).to_string(), e));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Gradients, Tensor};

    fn store_with(values: Vec<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_vec(&[values.len()], values).unwrap()).unwrap();
        s
    }

    fn set_grad(s: &mut ParamStore<f64>, g: Vec<f64>) {
        let id = s.id("w").unwrap();
        let mut grads = Gradients::zeros_like(s);
        grads.get_mut(id).data_mut().copy_from_slice(&g);
        s.zero_grads();
        s.accumulate(&grads);
    }

    #[test]
    fn linear_function_is_exact() {
        let coef = [0.5, -2.0, 3.0];
        let mut s = store_with(vec![1.0, 2.0, -1.0]);
        set_grad(&mut s, coef.to_vec());
        let r = grad_check(
            |p| p.value(p.id("w").unwrap()).data().iter().zip(coef).map(|(a, b)| a * b).sum(),
            &mut s,
            1e-3,
            100,
        );
        assert!(r.max_rel_error < 1e-10, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn doubled_gradient_is_detected() {
        // f = Σ w², grad = 2w; report 4w instead
        let mut s = store_with(vec![0.3, -0.8]);
        set_grad(&mut s, vec![4.0 * 0.3, 4.0 * -0.8]);
        let r = grad_check(|p| p.value(p.id("w").unwrap()).data().iter().map(|x| x * x).sum(), &mut s, 1e-3, 100);
        assert!((r.max_rel_error - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn large_tensors_are_sampled() {
        let mut s = store_with(vec![0.0; 500]);
        set_grad(&mut s, vec![1.0; 500]);
        let r = grad_check(|p| p.value(p.id("w").unwrap()).data().iter().sum(), &mut s, 1e-3, 20);
        assert_eq!(r.checked, 20);
    }
}
