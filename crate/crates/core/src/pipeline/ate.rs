//! Group-level average treatment effects.

use serde::{Deserialize, Serialize};

use crate::data::ExperimentDataset;
use crate::error::{Error, Result};
use crate::io::json_opt_f64;

use super::CiseResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    #[serde(with = "json_opt_f64")]
    pub se: Option<f64>,
}

impl Estimate {
    pub fn new(value: f64, se: Option<f64>) -> Self {
        Self { value, se }
    }
}

/// Effects for responders, attrited units and everyone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteSummary {
    pub n_r1: usize,
    pub n_r0: usize,
    pub ate_r1: Estimate,
    /// Absent when nobody attrited.
    pub ate_r0: Option<Estimate>,
    pub ate_all: Estimate,
}

impl AteSummary {
    /// `ate_all = (n1 ate_r1 + n0 ate_r0) / N` with
    /// `SE = sqrt((n1/N)^2 SE1^2 + (n0/N)^2 SE0^2)`.
    pub fn combine(n_r1: usize, n_r0: usize, ate_r1: Estimate, ate_r0: Option<Estimate>) -> Self {
        let ate_all = match ate_r0 {
            Some(r0) if n_r0 > 0 => {
                let total = (n_r1 + n_r0) as f64;
                let (w1, w0) = (n_r1 as f64 / total, n_r0 as f64 / total);
                let se = match (ate_r1.se, r0.se) {
                    (Some(s1), Some(s0)) => Some(((w1 * s1).powi(2) + (w0 * s0).powi(2)).sqrt()),
                    _ => None,
                };
                Estimate::new(w1 * ate_r1.value + w0 * r0.value, se)
            }
            _ => ate_r1,
        };
        Self {
            n_r1,
            n_r0,
            ate_r1,
            ate_r0: if n_r0 > 0 { ate_r0 } else { None },
            ate_all,
        }
    }
}

/// Attrition-group effect as the mean midpoint of the extrapolated
/// intervals. Its standard error comes from repeated runs, so it is left
/// empty here.
pub fn aggregate_ate(
    result: &CiseResult,
    ds: &ExperimentDataset,
    ate_r1: Estimate,
) -> Result<AteSummary> {
    let n_r0 = ds.attrition_rows().len();
    let n_r1 = ds.n() - n_r0;
    if result.attrition.is_empty() {
        return Ok(AteSummary::combine(n_r1, 0, ate_r1, None));
    }
    if let Some(bad) = result.attrition.iter().find(|a| !a.interval.is_finite()) {
        return Err(Error::Numerical(format!(
            "attrition interval for row {} is unbounded",
            bad.row
        )));
    }
    let mid = result
        .attrition
        .iter()
        .map(|a| a.interval.midpoint())
        .sum::<f64>()
        / result.attrition.len() as f64;
    Ok(AteSummary::combine(
        n_r1,
        n_r0,
        ate_r1,
        Some(Estimate::new(mid, None)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_groups_halve_the_variance() {
        let s = 0.3;
        let a = AteSummary::combine(
            500,
            500,
            Estimate::new(1.0, Some(s)),
            Some(Estimate::new(2.0, Some(s))),
        );
        assert!((a.ate_all.value - 1.5).abs() < 1e-15);
        assert!((a.ate_all.se.unwrap() - s / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_attrition_returns_observed_effect() {
        let r1 = Estimate::new(0.42, Some(0.1));
        let a = AteSummary::combine(100, 0, r1, None);
        assert_eq!(a.ate_all, r1);
        assert!(a.ate_r0.is_none());
    }

    #[test]
    fn published_weighting() {
        let a = AteSummary::combine(
            2223,
            480,
            Estimate::new(0.098, None),
            Some(Estimate::new(0.190, None)),
        );
        let by_hand = (2223.0 * 0.098 + 480.0 * 0.190) / 2703.0;
        assert!((a.ate_all.value - by_hand).abs() < 1e-15);
        assert!((a.ate_all.value - 0.114).abs() < 5e-4);
        assert!(a.ate_all.se.is_none());
    }
}
