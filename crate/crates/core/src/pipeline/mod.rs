//! End-to-end interval pipelines and treatment-effect summaries.

mod ate;
mod baseline;
pub mod cise;
mod ipw;

use serde::{Deserialize, Serialize};

use crate::data::{ExperimentDataset, PredictionInterval};
use crate::eif::EtaSolution;
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::rng::derive_seed;
use crate::{ConformalConfig, LearnerRoles};

pub use ate::{aggregate_ate, AteSummary, Estimate};
pub use baseline::{wcqr_nested_baseline, BaselineVariant};
pub use cise::{
    cise, cise_step1, cise_step2, extrapolate, Extrapolation, ExtrapolationInput, Step1State,
};
pub use ipw::{difference_in_means, ipw_ate, ipw_ate_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cise,
    WcqrNestedExact,
    WcqrNestedInexact,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cise => "cise",
            Method::WcqrNestedExact => "wcqr_nested_exact",
            Method::WcqrNestedInexact => "wcqr_nested_inexact",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cise" => Ok(Method::Cise),
            "wcqr_nested_exact" | "wcqr_exact" => Ok(Method::WcqrNestedExact),
            "wcqr_nested_inexact" | "wcqr_inexact" => Ok(Method::WcqrNestedInexact),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// ITE interval for an observed row, with the counterfactual interval it
/// was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedIte {
    pub row: usize,
    pub d: u8,
    pub counterfactual: PredictionInterval,
    pub ite: PredictionInterval,
}

/// Extrapolated ITE interval for an attrited row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttritionIte {
    pub row: usize,
    pub interval: PredictionInterval,
}

/// Output of any pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiseResult {
    pub method: Method,
    pub observed: Vec<ObservedIte>,
    pub attrition: Vec<AttritionIte>,
    /// Threshold of the `Y(1)` intervals.
    pub eta_treated: Option<EtaSolution>,
    /// Threshold of the `Y(0)` intervals.
    pub eta_control: Option<EtaSolution>,
    pub eta_extrapolation: Option<EtaSolution>,
    pub notes: Vec<String>,
}

impl CiseResult {
    pub fn attrition_intervals(&self) -> Vec<PredictionInterval> {
        self.attrition.iter().map(|a| a.interval).collect()
    }
}

/// Turn a counterfactual interval into an ITE interval.
///
/// Treated rows observe `Y(1)` and need `Y(0)`: `[y - c.hi, y - c.lo]`.
/// Control rows observe `Y(0)` and need `Y(1)`: `[c.lo - y, c.hi - y]`.
pub fn ite_from_counterfactual(d: u8, y: f64, c: PredictionInterval) -> PredictionInterval {
    if d == 1 {
        PredictionInterval::new(y - c.hi, y - c.lo)
    } else {
        PredictionInterval::new(c.lo - y, c.hi - y)
    }
}

/// Run `method` end to end.
pub fn run_method(
    method: Method,
    ds: &ExperimentDataset,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
) -> Result<CiseResult> {
    match method {
        Method::Cise => cise(ds, cfg, roles),
        Method::WcqrNestedExact => wcqr_nested_baseline(ds, cfg, roles, BaselineVariant::Exact),
        Method::WcqrNestedInexact => wcqr_nested_baseline(ds, cfg, roles, BaselineVariant::Inexact),
    }
}

pub(crate) fn seeded(spec: &LearnerSpec, tag: u64) -> LearnerSpec {
    spec.clone().with_seed(derive_seed(spec.seed, tag))
}

pub(crate) fn pick(values: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| values[i]).collect()
}
