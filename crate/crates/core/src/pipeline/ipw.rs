//! Observed-group average treatment effect estimators.

use crate::data::ExperimentDataset;
use crate::error::{Error, Result};
use crate::learners::fit_propensity;
use crate::stats::{mean, sample_sd};
use crate::LearnerRoles;

use super::{seeded, Estimate};

fn arms(ds: &ExperimentDataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let (treated, control): (Vec<usize>, Vec<usize>) =
        ds.observed_rows().into_iter().partition(|&i| ds.d[i] == 1);
    if treated.is_empty() || control.is_empty() {
        return Err(Error::InsufficientData(
            "observed rows must include both arms".into(),
        ));
    }
    Ok((treated, control))
}

/// Difference in means on `R = 1` rows with the unpooled standard error.
pub fn difference_in_means(ds: &ExperimentDataset) -> Result<Estimate> {
    let (treated, control) = arms(ds)?;
    let y1: Vec<f64> = treated.iter().map(|&i| ds.outcome(i)).collect();
    let y0: Vec<f64> = control.iter().map(|&i| ds.outcome(i)).collect();
    let var = |v: &[f64]| sample_sd(v).map(|s| s * s / v.len() as f64);
    let se = match (var(&y1), var(&y0)) {
        (Some(a), Some(b)) => Some((a + b).sqrt()),
        _ => None,
    };
    Ok(Estimate {
        value: mean(&y1) - mean(&y0),
        se,
    })
}

/// Self-normalized weighted mean and its variance
/// `sum w^2 (y - mu)^2 / (sum w)^2`.
fn hajek(pairs: &[(f64, f64)]) -> (f64, f64) {
    let sw: f64 = pairs.iter().map(|p| p.0).sum();
    let mu = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / sw;
    let v = pairs
        .iter()
        .map(|p| (p.0 * (p.1 - mu)).powi(2))
        .sum::<f64>()
        / (sw * sw);
    (mu, v)
}

/// Inverse-probability-weighted ATE on `R = 1` rows with weights
/// `1 / (e_D(x) e_R(x, 1))` for treated and `1 / ((1 - e_D(x)) e_R(x, 0))`
/// for controls. Both propensities are fitted on all rows.
pub fn ipw_ate(ds: &ExperimentDataset, roles: &LearnerRoles, clip: f64) -> Result<Estimate> {
    arms(ds)?;
    let e_d = fit_propensity(&ds.x, &ds.d, &seeded(&roles.propensity, 1), clip)?;
    let xd = ds.x_with_treatment();
    let e_r = fit_propensity(&xd, &ds.r, &seeded(&roles.propensity, 2), clip)?;
    ipw_ate_with(ds, &|x| e_d.predict(x), &|x, d| {
        let mut row = x.to_vec();
        row.push(f64::from(d));
        e_r.predict(&row)
    })
}

/// [`ipw_ate`] with given propensity functions.
pub fn ipw_ate_with(
    ds: &ExperimentDataset,
    e_d: &dyn Fn(&[f64]) -> f64,
    e_r: &dyn Fn(&[f64], u8) -> f64,
) -> Result<Estimate> {
    let (treated, control) = arms(ds)?;
    let pairs = |rows: &[usize]| -> Vec<(f64, f64)> {
        rows.iter()
            .map(|&i| {
                let x = ds.x.row(i);
                let p = e_d(x);
                let pd = if ds.d[i] == 1 { p } else { 1.0 - p };
                (1.0 / (pd * e_r(x, ds.d[i])), ds.outcome(i))
            })
            .collect()
    };
    let (mu1, v1) = hajek(&pairs(&treated));
    let (mu0, v0) = hajek(&pairs(&control));
    Ok(Estimate {
        value: mu1 - mu0,
        se: Some((v1 + v0).sqrt()),
    })
}
