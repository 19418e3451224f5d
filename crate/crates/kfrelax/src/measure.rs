//! Monte-Carlo measurement of estimator statistics.

use alloc::vec::Vec;

use crate::linalg::Vector;
use crate::math;
use crate::sample::Rng;

/// Sample mean and unbiased sample variance, per coordinate.
#[derive(Clone, Debug)]
pub struct VarianceStats {
    pub mean: Vector,
    pub variance: Vector,
    pub samples: usize,
}

impl VarianceStats {
    /// Total variance: sum of per-coordinate variances.
    pub fn total_variance(&self) -> f64 {
        self.variance.iter().sum()
    }

    /// Per-coordinate standard error of the mean.
    pub fn std_errors(&self) -> Vector {
        self.variance
            .iter()
            .map(|v| math::sqrt(v / self.samples as f64))
            .collect()
    }
}

/// Draws `m ≥ 2` independent estimates at frozen parameters and returns
/// their per-coordinate sample mean and unbiased sample variance.
///
/// The caller supplies the stream the estimates consume; pass a fork of the
/// training stream so measurement never perturbs the run being measured.
pub fn measure_variance<F>(mut estimator: F, m: usize, rng: &mut Rng) -> VarianceStats
where
    F: FnMut(&mut Rng) -> Vector,
{
    assert!(m >= 2, "variance needs at least two samples");
    let first = estimator(rng);
    let dim = first.len();
    let mut sum = first.clone();
    let mut sum_sq: Vector = first.iter().map(|x| x * x).collect();
    for _ in 1..m {
        let est = estimator(rng);
        assert_eq!(est.len(), dim, "estimator dimension changed");
        for i in 0..dim {
            sum[i] += est[i];
            sum_sq[i] += est[i] * est[i];
        }
    }
    let n = m as f64;
    let mean: Vector = sum.iter().map(|s| s / n).collect();
    let variance: Vector = (0..dim)
        .map(|i| (sum_sq[i] - sum[i] * sum[i] / n) / (n - 1.0))
        .collect();
    VarianceStats {
        mean,
        variance,
        samples: m,
    }
}

/// Scalar-estimator convenience for [`measure_variance`].
pub fn measure_variance_scalar<F>(mut estimator: F, m: usize, rng: &mut Rng) -> (f64, f64)
where
    F: FnMut(&mut Rng) -> f64,
{
    let stats = measure_variance(|r| Vector::from(alloc::vec![estimator(r)]), m, rng);
    (stats.mean[0], stats.variance[0])
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F₁ − F₂|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max(math::abs(i as f64 / n - j as f64 / m));
    }
    d
}

/// Two-sample KS critical value at significance 0.01:
/// `1.628·√((n+m)/(n·m))`.
pub fn ks_critical_001(n: usize, m: usize) -> f64 {
    1.628 * math::sqrt((n + m) as f64 / (n as f64 * m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_estimator_has_zero_variance() {
        let mut rng = Rng::new(1);
        let (mean, var) = measure_variance_scalar(|_| 3.25, 1000, &mut rng);
        assert_eq!(mean, 3.25);
        assert_eq!(var, 0.0);
    }

    #[test]
    fn uniform_variance_matches_closed_form() {
        let mut rng = Rng::new(2);
        let (mean, var) = measure_variance_scalar(|r| r.uniform(), 200_000, &mut rng);
        assert!((mean - 0.5).abs() < 3.0 * (1.0f64 / 12.0 / 200_000.0).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 0.002);
    }

    #[test]
    fn ks_statistic_on_identical_and_shifted_samples() {
        let mut rng = Rng::new(3);
        let a: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
        let d_same = ks_two_sample(&a, &b);
        assert!(d_same < ks_critical_001(a.len(), b.len()));

        let shifted: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let d_shift = ks_two_sample(&a, &shifted);
        assert!(d_shift > ks_critical_001(a.len(), a.len()));
    }
}
