//! Linear quantile regression.
//!
//! Minimizes the pinball loss with a majorize-minimize scheme: at each step
//! the loss is bounded by a weighted quadratic with weights
//! `1 / (eps + |r_i|)`, whose minimizer is a weighted least-squares solve
//! with shifted targets `y_i - (1 - 2 tau) (eps + |r_i|)`. The width `eps`
//! smooths the kink of the loss; it is `LearnerSpec::smoothing` times the
//! standard deviation of the targets.

use super::{FitFlags, LearnerSpec};
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::linalg::{linear_predict, NormalEquations};
use crate::stats::empirical_quantile;

fn pinball(r: f64, tau: f64) -> f64 {
    if r >= 0.0 {
        tau * r
    } else {
        (tau - 1.0) * r
    }
}

fn objective(x: &Matrix, y: &[f64], beta: &[f64], tau: f64) -> f64 {
    x.iter_rows()
        .zip(y)
        .map(|(row, &t)| pinball(t - linear_predict(beta, row), tau))
        .sum()
}

pub(super) fn fit_linear_quantile(
    x: &Matrix,
    y: &[f64],
    tau: f64,
    spec: &LearnerSpec,
) -> Result<(Vec<f64>, FitFlags)> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let p = x.cols() + 1;
    let mut flags = FitFlags::default();

    if sd == 0.0 {
        let mut beta = vec![0.0; p];
        beta[0] = y[0];
        return Ok((beta, flags));
    }
    let eps = spec.smoothing * sd;

    // Start from least squares with the intercept moved to the residual
    // quantile.
    let mut ne = NormalEquations::new(x.cols());
    for (row, &t) in x.iter_rows().zip(y) {
        ne.add(row, 1.0, t);
    }
    let (mut beta, fallback) = ne
        .solve(spec.ridge)
        .ok_or_else(|| Error::Numerical("quantile start system is singular".into()))?;
    flags.rank_deficient |= fallback;
    let residuals: Vec<f64> = x
        .iter_rows()
        .zip(y)
        .map(|(row, &t)| t - linear_predict(&beta, row))
        .collect();
    beta[0] += empirical_quantile(&residuals, tau);

    let mut best = beta.clone();
    let mut best_obj = objective(x, y, &beta, tau);
    let mut converged = false;
    for _ in 0..spec.max_iter {
        let mut ne = NormalEquations::new(x.cols());
        for (row, &t) in x.iter_rows().zip(y) {
            let a = eps + (t - linear_predict(&beta, row)).abs();
            ne.add(row, 1.0 / a, t - (1.0 - 2.0 * tau) * a);
        }
        let Some((next, fallback)) = ne.solve(spec.ridge) else {
            break;
        };
        flags.rank_deficient |= fallback;
        let step = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = next;
        let obj = objective(x, y, &beta, tau);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&beta);
        }
        if step <= 1e-9 * sd {
            converged = true;
            break;
        }
    }
    flags.not_converged = !converged;
    Ok((best, flags))
}
