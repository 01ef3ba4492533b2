//! Weighted-CQR counterfactual intervals followed by an unweighted nested
//! extrapolation step.

use crate::conformal::{IntervalConformal, WeightedCqr};
use crate::data::{ExperimentDataset, Matrix, PredictionInterval};
use crate::error::{Error, Result};
use crate::learners::{fit_propensity, fit_quantile_pair, ProbabilityModel};
use crate::rng::{derive_seed, stream, SplitMix64};
use crate::{validate_dataset, ConformalConfig, LearnerRoles};

use super::{ite_from_counterfactual, pick, seeded, AttritionIte, CiseResult, Method, ObservedIte};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineVariant {
    /// Split conformal on the interval-valued ITE data.
    Exact,
    /// Conditional quantiles of the lower and upper endpoints, no calibration.
    Inexact,
}

fn fit_arm(
    ds: &ExperimentDataset,
    rows: &[usize],
    arm: u8,
    e_d: &ProbabilityModel,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
    seed: u64,
) -> Result<WeightedCqr> {
    let mut own: Vec<usize> = rows.iter().copied().filter(|&i| ds.d[i] == arm).collect();
    SplitMix64::new(seed).shuffle(&mut own);
    let (train, cal) = own.split_at(own.len() / 2);
    let y = |idx: &[usize]| idx.iter().map(|&i| ds.outcome(i)).collect::<Vec<_>>();
    // Likelihood ratio from the source arm to the opposite arm.
    let weight = move |x: &[f64]| {
        let p = e_d.predict(x);
        if arm == 0 {
            p / (1.0 - p)
        } else {
            (1.0 - p) / p
        }
    };
    WeightedCqr::fit(
        &ds.x.select_rows(train),
        &y(train),
        &ds.x.select_rows(cal),
        &y(cal),
        cfg.alpha,
        &weight,
        &seeded(&roles.quantile, u64::from(arm)),
    )
}

pub fn wcqr_nested_baseline(
    ds: &ExperimentDataset,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
    variant: BaselineVariant,
) -> Result<CiseResult> {
    cfg.validate()?;
    roles.validate()?;
    let report = validate_dataset(ds)?;
    if !report.both_arms_observed() {
        return Err(Error::InsufficientData(
            "both arms need observed outcomes".into(),
        ));
    }
    let roles = roles.reseeded(derive_seed(cfg.seed, stream::LEARNERS));
    let split_seed = derive_seed(cfg.seed, stream::BASELINE_SPLIT);

    let mut source = ds.observed_rows();
    SplitMix64::new(split_seed).shuffle(&mut source);
    let (z1, z2) = source.split_at(source.len() / 2);

    let z1_d: Vec<u8> = z1.iter().map(|&i| ds.d[i]).collect();
    let e_d = fit_propensity(
        &ds.x.select_rows(z1),
        &z1_d,
        &seeded(&roles.propensity, 1),
        cfg.propensity_clip,
    )?;
    let cqr = [
        fit_arm(ds, z1, 0, &e_d, cfg, &roles, derive_seed(split_seed, 0))?,
        fit_arm(ds, z1, 1, &e_d, cfg, &roles, derive_seed(split_seed, 1))?,
    ];

    let observed: Vec<ObservedIte> = z2
        .iter()
        .map(|&i| {
            let x = ds.x.row(i);
            let d = ds.d[i];
            let target = 1 - d;
            let p = e_d.predict(x);
            let w = if target == 0 {
                p / (1.0 - p)
            } else {
                (1.0 - p) / p
            };
            let counterfactual = cqr[usize::from(target)].interval(x, w);
            ObservedIte {
                row: i,
                d,
                counterfactual,
                ite: ite_from_counterfactual(d, ds.outcome(i), counterfactual),
            }
        })
        .collect();

    let mut notes = report.warnings;
    let att = ds.attrition_rows();
    let attrition = if att.is_empty() {
        notes.push("no attrited rows; extrapolation skipped".into());
        Vec::new()
    } else {
        let obs_x = ds.x.select_rows(z2);
        let lo: Vec<f64> = observed.iter().map(|o| o.ite.lo).collect();
        let hi: Vec<f64> = observed.iter().map(|o| o.ite.hi).collect();
        let intervals: Vec<PredictionInterval> = match variant {
            BaselineVariant::Exact => {
                let ic = IntervalConformal::fit(
                    &obs_x,
                    &lo,
                    &hi,
                    cfg.gamma,
                    &roles.mean,
                    derive_seed(split_seed, 2),
                )?;
                if ic.is_uninformative() {
                    notes.push(
                        "nested threshold is infinite; attrition intervals are unbounded".into(),
                    );
                }
                att.iter().map(|&i| ic.interval(ds.x.row(i))).collect()
            }
            BaselineVariant::Inexact => {
                let finite: Vec<usize> = (0..lo.len())
                    .filter(|&j| lo[j].is_finite() && hi[j].is_finite())
                    .collect();
                let fx: Matrix = obs_x.select_rows(&finite);
                let (g_lo, g_hi) = (cfg.gamma / 2.0, 1.0 - cfg.gamma / 2.0);
                let q_lo = fit_quantile_pair(
                    &fx,
                    &pick(&lo, &finite),
                    g_lo,
                    g_hi,
                    &seeded(&roles.quantile, 2),
                )?;
                let q_hi = fit_quantile_pair(
                    &fx,
                    &pick(&hi, &finite),
                    g_lo,
                    g_hi,
                    &seeded(&roles.quantile, 3),
                )?;
                att.iter()
                    .map(|&i| {
                        let x = ds.x.row(i);
                        let lo = q_lo.predict(x).0;
                        let hi = q_hi.predict(x).1;
                        PredictionInterval::new(lo.min(hi), hi.max(lo))
                    })
                    .collect()
            }
        };
        att.iter()
            .zip(intervals)
            .map(|(&row, interval)| AttritionIte { row, interval })
            .collect()
    };

    Ok(CiseResult {
        method: match variant {
            BaselineVariant::Exact => Method::WcqrNestedExact,
            BaselineVariant::Inexact => Method::WcqrNestedInexact,
        },
        observed,
        attrition,
        eta_treated: None,
        eta_control: None,
        eta_extrapolation: None,
        notes,
    })
}
