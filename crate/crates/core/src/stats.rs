//! Scalar distribution helpers and small summary statistics.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

#[inline]
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// CDF of Beta(2, 4) on `[0, 1]`, clamped outside.
///
/// `I_x(2, 4) = 1 - (1-x)^5 - 5x(1-x)^4`.
pub fn beta_2_4_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let q = 1.0 - x;
    1.0 - q.powi(5) - 5.0 * x * q.powi(4)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
pub fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (v.len() - 1) as f64).sqrt())
}

/// `k`-th order statistic (1-based) of an ascending slice, clamped to the
/// ends.
pub fn order_statistic(sorted: &[f64], k: usize) -> f64 {
    let k = k.clamp(1, sorted.len());
    sorted[k - 1]
}

/// `ceil(level * (n + 1))`, the conformal rank.
pub fn conformal_rank(level: f64, n: usize) -> usize {
    // Guard against 0.95 * 100 = 94.99999... style representation error.
    let raw = level * (n as f64 + 1.0);
    let r = raw.round();
    if (raw - r).abs() < 1e-9 {
        r as usize
    } else {
        raw.ceil() as usize
    }
}

/// Left-continuous empirical quantile of a sample at `level`: the smallest
/// value whose empirical CDF reaches `level`.
pub fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    let mut v = values.to_vec();
    sort_floats(&mut v);
    let n = v.len();
    let k = (level * n as f64).ceil().max(1.0) as usize;
    v[k.min(n) - 1]
}

pub fn sort_floats(v: &mut [f64]) {
    v.sort_by(|a, b| a.total_cmp(b));
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_reference_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-10);
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_quantile(0.75), 0.6744897501960817, epsilon = 1e-9);
        for p in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
            assert_abs_diff_eq!(
                normal_cdf(normal_quantile(p)),
                p,
                epsilon = 1e-10 * p.max(1e-3)
            );
        }
    }

    #[test]
    fn beta_cdf_matches_quadrature() {
        // Density of Beta(2,4) is 20 x (1-x)^3.
        for &x in &[0.1, 0.25, 0.5, 0.8] {
            let steps = 20_000;
            let h = x / steps as f64;
            let mut integral = 0.0;
            for s in 0..steps {
                let t = (s as f64 + 0.5) * h;
                integral += 20.0 * t * (1.0 - t).powi(3) * h;
            }
            assert_abs_diff_eq!(beta_2_4_cdf(x), integral, epsilon = 1e-8);
        }
        assert_eq!(beta_2_4_cdf(-3.0), 0.0);
        assert_eq!(beta_2_4_cdf(3.0), 1.0);
    }

    #[test]
    fn ranks() {
        assert_eq!(conformal_rank(0.95, 99), 95);
        assert_eq!(conformal_rank(0.975, 39), 39);
        assert_eq!(conformal_rank(0.95, 1), 2);
    }

    #[test]
    fn logistic_is_stable() {
        assert_abs_diff_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0);
        assert!(logistic(800.0) <= 1.0);
        assert_abs_diff_eq!(logistic(-1.0), 0.2689414213699951, epsilon = 1e-15);
    }
}
