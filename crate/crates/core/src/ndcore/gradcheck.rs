//! Central finite-difference verification of analytic gradients.

use rand::RngCore;

use super::tensor::Tensor;

/// Denominator floor for relative error. Gradient entries below this
/// magnitude are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, element index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }

    pub fn merge(&mut self, other: &GradCheckReport) {
        if other.max_rel_error > self.max_rel_error {
            self.max_rel_error = other.max_rel_error;
            self.worst = other.worst;
        }
        self.checked += other.checked;
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic[i]` with `(f(θ+h) − f(θ−h)) / 2h` on sampled elements
/// of every parameter. Tensors with at most `samples_per_param` elements are
/// checked exhaustively. `params` is restored before returning.
pub fn finite_diff_check<F>(
    mut loss: F,
    params: &mut [Tensor<f64>],
    analytic: &[Tensor<f64>],
    h: f64,
    samples_per_param: usize,
    rng: &mut impl RngCore,
) -> GradCheckReport
where
    F: FnMut(&[Tensor<f64>]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "one gradient per parameter");
    let mut report = GradCheckReport::default();
    for pi in 0..params.len() {
        let len = params[pi].len();
        let indices: Vec<usize> = if len <= samples_per_param {
            (0..len).collect()
        } else {
            (0..samples_per_param)
                .map(|_| (rng.next_u64() % len as u64) as usize)
                .collect()
        };
        for idx in indices {
            let orig = params[pi].data()[idx];
            params[pi].data_mut()[idx] = orig + h;
            let plus = loss(params);
            params[pi].data_mut()[idx] = orig - h;
            let minus = loss(params);
            params[pi].data_mut()[idx] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[pi].data()[idx], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((pi, idx));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_square(p: &[Tensor<f64>]) -> f64 {
        p.iter().flat_map(|t| t.data()).map(|x| 0.5 * x * x).sum()
    }

    #[test]
    fn quadratic_agrees() {
        let mut params = vec![Tensor::matrix(2, 2, vec![0.3, -1.2, 2.5, 0.01]).unwrap()];
        let grad = params.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = finite_diff_check(half_square, &mut params, &grad, 1e-5, 16, &mut rng);
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_flagged() {
        let mut params = vec![Tensor::matrix(1, 3, vec![0.3, -1.2, 2.5]).unwrap()];
        let mut grad = params.clone();
        grad[0].data_mut()[1] += 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = finite_diff_check(half_square, &mut params, &grad, 1e-5, 16, &mut rng);
        assert!(r.max_rel_error > 0.1);
        assert_eq!(r.worst, Some((0, 1)));
    }

    #[test]
    fn params_restored() {
        let orig = Tensor::matrix(1, 2, vec![0.25, 0.5]).unwrap();
        let mut params = vec![orig.clone()];
        let grad = params.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        finite_diff_check(half_square, &mut params, &grad, 1e-3, 8, &mut rng);
        assert_eq!(params[0], orig);
    }
}
