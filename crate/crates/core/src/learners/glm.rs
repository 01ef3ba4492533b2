use super::FitFlags;
use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::linalg::{linear_predict, NormalEquations};
use crate::stats::logistic;

pub(super) fn fit_least_squares(x: &Matrix, y: &[f64], ridge: f64) -> Result<(Vec<f64>, FitFlags)> {
    let mut ne = NormalEquations::new(x.cols());
    for (row, &t) in x.iter_rows().zip(y) {
        ne.add(row, 1.0, t);
    }
    // Plain least squares first; the ridge only stabilizes singular designs.
    let (beta, fallback) = match ne.clone().solve(0.0) {
        Some((beta, false)) => (beta, false),
        _ => {
            let (beta, _) = ne
                .solve(ridge)
                .ok_or_else(|| Error::Numerical("least-squares system is singular".into()))?;
            (beta, true)
        }
    };
    Ok((
        beta,
        FitFlags {
            rank_deficient: fallback,
            ..Default::default()
        },
    ))
}

/// Logistic regression by iteratively reweighted least squares.
pub(super) fn fit_logistic(
    x: &Matrix,
    y: &[f64],
    ridge: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, FitFlags)> {
    let p = x.cols() + 1;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut beta = vec![0.0; p];
    beta[0] = (mean / (1.0 - mean)).ln();
    let mut flags = FitFlags::default();
    // Linear predictors beyond this are saturated; capping them keeps the
    // working weights away from zero under separation.
    const ETA_CAP: f64 = 30.0;

    for iter in 0..max_iter {
        let mut ne = NormalEquations::new(x.cols());
        for (row, &t) in x.iter_rows().zip(y) {
            let eta = linear_predict(&beta, row).clamp(-ETA_CAP, ETA_CAP);
            let mu = logistic(eta);
            let w = (mu * (1.0 - mu)).max(1e-10);
            ne.add(row, w, eta + (t - mu) / w);
        }
        let (next, fallback) = ne
            .solve(ridge)
            .ok_or_else(|| Error::Numerical("IRLS system is singular".into()))?;
        flags.rank_deficient |= fallback;
        let delta = next
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = next;
        if delta < 1e-8 {
            return Ok((beta, flags));
        }
        if beta.iter().any(|b| b.abs() > 1e6) {
            // Separated data: coefficients diverge, predictions are already
            // saturated at the clip bounds.
            flags.not_converged = true;
            return Ok((beta, flags));
        }
        if iter + 1 == max_iter {
            flags.not_converged = true;
        }
    }
    Ok((beta, flags))
}
