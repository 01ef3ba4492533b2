//! The two-step procedure: EIF-calibrated counterfactual intervals inside
//! the observed group, then a calibrated expansion to the attrited group.

use crate::conformal::{cqr_score, interval_score};
use crate::data::{ExperimentDataset, Matrix, PredictionInterval};
use crate::eif::{
    initial_eta, solve_balanced, solve_over_scores, ControlArmMoment, CounterfactualRow,
    EtaSolution, ExtrapolationMoment, ExtrapolationRow, Moment, TreatedArmMoment,
};
use crate::error::{Error, Result};
use crate::learners::{
    fit_conditional_cdf, fit_mean, fit_propensity, fit_quantile_pair, ProbabilityModel,
    QuantilePairModel,
};
use crate::rng::{derive_seed, stream};
use crate::{make_splits, validate_dataset, ConformalConfig, LearnerRoles, SplitPlan};

use super::{ite_from_counterfactual, pick, seeded, AttritionIte, CiseResult, Method, ObservedIte};

fn arm_name(d: u8) -> &'static str {
    if d == 1 {
        "treated"
    } else {
        "control"
    }
}

fn solve<M: Moment>(moment: &M, rows: &[M::Row], balance: bool) -> EtaSolution {
    if balance {
        solve_balanced(moment, rows)
    } else {
        solve_over_scores(moment, rows)
    }
}

fn with_flag(row: &[f64], flag: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(row.len() + 1);
    v.extend_from_slice(row);
    v.push(flag);
    v
}

/// Fitted step-1 state.
#[derive(Debug, Clone)]
pub struct Step1State {
    quantiles: [QuantilePairModel; 2],
    /// `eta[d]` is the threshold of the `Y(d)` intervals.
    pub eta: [EtaSolution; 2],
    pub eta_init: [f64; 2],
    /// One entry per calibration row with `R = 1`.
    pub observed: Vec<ObservedIte>,
    pub notes: Vec<String>,
}

impl Step1State {
    /// Interval for `Y(arm)` at `x`.
    pub fn counterfactual(&self, x: &[f64], arm: u8) -> PredictionInterval {
        let (lo, hi) = self.quantiles[usize::from(arm)].predict(x);
        PredictionInterval::expand(lo, hi, self.eta[usize::from(arm)].eta)
    }

    /// `(C_{1-d}(x), C_ITE)` for an observed unit.
    pub fn ite(&self, x: &[f64], d: u8, y: f64) -> (PredictionInterval, PredictionInterval) {
        let c = self.counterfactual(x, 1 - d);
        (c, ite_from_counterfactual(d, y, c))
    }
}

/// Steps I and II on the folds of `plan`.
pub fn cise_step1(
    ds: &ExperimentDataset,
    plan: &SplitPlan,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
) -> Result<Step1State> {
    cfg.validate()?;
    let clip = cfg.propensity_clip;
    let (lo_level, hi_level) = cfg.alpha_quantile_levels();
    let arm_rows = |fold: &[usize], arm: u8| -> Vec<usize> {
        fold.iter()
            .copied()
            .filter(|&i| ds.r[i] == 1 && ds.d[i] == arm)
            .collect()
    };
    let outcomes = |rows: &[usize]| -> Vec<f64> { rows.iter().map(|&i| ds.outcome(i)).collect() };

    let mut fitted = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let rows = arm_rows(&plan.pretrain, arm);
        if rows.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no observed {} rows in the pretraining fold",
                arm_name(arm)
            )));
        }
        fitted.push(fit_quantile_pair(
            &ds.x.select_rows(&rows),
            &outcomes(&rows),
            lo_level,
            hi_level,
            &seeded(&roles.quantile, u64::from(arm)),
        )?);
    }
    let quantiles: [QuantilePairModel; 2] = [fitted.remove(0), fitted.remove(0)];

    let pr_d: Vec<u8> = plan.pretrain.iter().map(|&i| ds.d[i]).collect();
    let pr_r: Vec<u8> = plan.pretrain.iter().map(|&i| ds.r[i]).collect();
    let e_d = fit_propensity(
        &ds.x.select_rows(&plan.pretrain),
        &pr_d,
        &seeded(&roles.propensity, 1),
        clip,
    )?;
    let e_r = fit_propensity(
        &ds.x_with_treatment().select_rows(&plan.pretrain),
        &pr_r,
        &seeded(&roles.propensity, 2),
        clip,
    )?;

    let score = |i: usize| {
        let (lo, hi) = quantiles[usize::from(ds.d[i])].predict(ds.x.row(i));
        cqr_score(ds.outcome(i), lo, hi)
    };

    let mut eta_init = [0.0; 2];
    let mut cdf: Vec<ProbabilityModel> = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let rows1 = arm_rows(&plan.train1, arm);
        if rows1.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no observed {} rows in the first training fold",
                arm_name(arm)
            )));
        }
        let s1: Vec<f64> = rows1.iter().map(|&i| score(i)).collect();
        eta_init[usize::from(arm)] = initial_eta(&s1, 1.0 - cfg.alpha)?;

        let rows2 = arm_rows(&plan.train2, arm);
        if rows2.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no observed {} rows in the second training fold",
                arm_name(arm)
            )));
        }
        let s2: Vec<f64> = rows2.iter().map(|&i| score(i)).collect();
        cdf.push(fit_conditional_cdf(
            &ds.x.select_rows(&rows2),
            &s2,
            eta_init[usize::from(arm)],
            &seeded(&roles.cdf, u64::from(arm)),
            clip,
        )?);
    }

    let mut solutions = Vec::with_capacity(2);
    for arm in 0..2u8 {
        let rows: Vec<CounterfactualRow> = plan
            .calibration
            .iter()
            .map(|&i| {
                let x = ds.x.row(i);
                let ed = e_d.predict(x);
                CounterfactualRow {
                    d: ds.d[i],
                    r: ds.r[i],
                    score: if ds.r[i] == 1 && ds.d[i] == arm {
                        score(i)
                    } else {
                        f64::NAN
                    },
                    m: cdf[usize::from(arm)].predict(x),
                    e_r1: e_r.predict(&with_flag(x, 1.0)),
                    e_r0: e_r.predict(&with_flag(x, 0.0)),
                    pi_d: ed / (1.0 - ed),
                }
            })
            .collect();
        solutions.push(if arm == 1 {
            solve(
                &TreatedArmMoment::new(cfg.alpha),
                &rows,
                cfg.balance_weights,
            )
        } else {
            solve(
                &ControlArmMoment::new(cfg.alpha),
                &rows,
                cfg.balance_weights,
            )
        });
    }

    let mut notes = Vec::new();
    for arm in 0..2u8 {
        if solutions[usize::from(arm)].degenerate {
            notes.push(format!(
                "{} threshold is infinite; Y({arm}) intervals are unbounded",
                arm_name(arm)
            ));
        }
    }
    let mut state = Step1State {
        quantiles,
        eta: [solutions[0], solutions[1]],
        eta_init,
        observed: Vec::new(),
        notes,
    };
    state.observed = plan
        .calibration
        .iter()
        .copied()
        .filter(|&i| ds.r[i] == 1)
        .map(|i| {
            let (counterfactual, ite) = state.ite(ds.x.row(i), ds.d[i], ds.outcome(i));
            ObservedIte {
                row: i,
                d: ds.d[i],
                counterfactual,
                ite,
            }
        })
        .collect();
    Ok(state)
}

/// Observed interval-valued data and attrited covariates for step 2.
///
/// `train` and `calibration` index into the observed arrays.
#[derive(Debug, Clone, Copy)]
pub struct ExtrapolationInput<'a> {
    pub obs_x: &'a Matrix,
    pub obs_d: &'a [u8],
    pub obs_lo: &'a [f64],
    pub obs_hi: &'a [f64],
    pub train: &'a [usize],
    pub calibration: &'a [usize],
    pub att_x: &'a Matrix,
    pub att_d: &'a [u8],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    /// One interval per attrited row, in input order.
    pub intervals: Vec<PredictionInterval>,
    pub eta: EtaSolution,
    pub eta_init: f64,
}

impl Extrapolation {
    fn unbounded(n_att: usize, eta_init: f64) -> Self {
        Self {
            intervals: vec![PredictionInterval::unbounded(); n_att],
            eta: EtaSolution {
                eta: f64::INFINITY,
                moment_value_at_eta: f64::NAN,
                candidates_scanned: 0,
                degenerate: true,
            },
            eta_init,
        }
    }
}

/// Step III: calibrate `[h_lo - eta, h_hi + eta]` so that it contains the
/// observed-group ITE intervals on the attrited population.
pub fn extrapolate(
    input: &ExtrapolationInput<'_>,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
) -> Result<Extrapolation> {
    let clip = cfg.propensity_clip;
    let n_obs = input.obs_lo.len();
    if input.obs_x.rows() != n_obs
        || input.obs_d.len() != n_obs
        || input.obs_hi.len() != n_obs
        || input.att_x.rows() != input.att_d.len()
    {
        return Err(Error::Data(
            "extrapolation inputs have mismatched lengths".into(),
        ));
    }
    let finite_train: Vec<usize> = input
        .train
        .iter()
        .copied()
        .filter(|&i| input.obs_lo[i].is_finite() && input.obs_hi[i].is_finite())
        .collect();
    if finite_train.len() < 8 && finite_train.len() < input.train.len() {
        // Unbounded observed intervals already force an unbounded expansion.
        return Ok(Extrapolation::unbounded(input.att_d.len(), f64::INFINITY));
    }
    if finite_train.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "extrapolation needs at least 8 finite training intervals, got {}",
            finite_train.len()
        )));
    }

    let with_d =
        |x: &Matrix, d: &[u8]| x.with_column(&d.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
    let obs_xd = with_d(input.obs_x, input.obs_d);
    let att_xd = with_d(input.att_x, input.att_d);
    let (obs_h, att_h) = if cfg.endpoint_uses_treatment {
        (&obs_xd, &att_xd)
    } else {
        (input.obs_x, input.att_x)
    };

    let tx = obs_h.select_rows(&finite_train);
    let h_lo = fit_mean(
        &tx,
        &pick(input.obs_lo, &finite_train),
        &seeded(&roles.mean, 1),
    )?;
    let h_hi = fit_mean(
        &tx,
        &pick(input.obs_hi, &finite_train),
        &seeded(&roles.mean, 2),
    )?;
    let v_c = |i: usize| {
        let row = obs_h.row(i);
        interval_score(
            input.obs_lo[i],
            input.obs_hi[i],
            h_lo.predict(row),
            h_hi.predict(row),
        )
    };

    // Response model: observed training rows against every attrited row.
    let n_att = input.att_d.len();
    let mut pr_rows: Vec<Vec<f64>> = input
        .train
        .iter()
        .map(|&i| obs_xd.row(i).to_vec())
        .collect();
    pr_rows.extend(att_xd.iter_rows().map(<[f64]>::to_vec));
    let mut pr_labels = vec![1u8; input.train.len()];
    pr_labels.extend(std::iter::repeat_n(0u8, n_att));
    let e_r = fit_propensity(
        &Matrix::from_rows(&pr_rows)?,
        &pr_labels,
        &seeded(&roles.propensity, 3),
        clip,
    )?;

    let train_scores: Vec<f64> = input.train.iter().map(|&i| v_c(i)).collect();
    let eta_init = initial_eta(&train_scores, 1.0 - cfg.gamma)?;
    if !eta_init.is_finite() {
        return Ok(Extrapolation::unbounded(n_att, eta_init));
    }
    let m_c = fit_conditional_cdf(
        &obs_xd.select_rows(input.train),
        &train_scores,
        eta_init,
        &seeded(&roles.cdf, 3),
        clip,
    )?;

    let odds = |row: &[f64]| {
        let p = e_r.predict(row);
        p / (1.0 - p)
    };
    let mut rows: Vec<ExtrapolationRow> = input
        .calibration
        .iter()
        .map(|&i| {
            let xd = obs_xd.row(i);
            ExtrapolationRow {
                r: 1,
                score: v_c(i),
                m: m_c.predict(xd),
                pi_r: odds(xd),
            }
        })
        .collect();
    rows.extend(att_xd.iter_rows().map(|xd| ExtrapolationRow {
        r: 0,
        score: f64::NAN,
        m: m_c.predict(xd),
        pi_r: odds(xd),
    }));
    let eta = solve(
        &ExtrapolationMoment::new(cfg.gamma),
        &rows,
        cfg.balance_weights,
    );

    let intervals = att_h
        .iter_rows()
        .map(|row| PredictionInterval::expand(h_lo.predict(row), h_hi.predict(row), eta.eta))
        .collect();
    Ok(Extrapolation {
        intervals,
        eta,
        eta_init,
    })
}

/// Step III on the step-1 output: the observed data are the calibration
/// rows with `R = 1`, split by `plan.obs_train` / `plan.obs_calibration`.
pub fn cise_step2(
    step1: &Step1State,
    ds: &ExperimentDataset,
    plan: &SplitPlan,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
) -> Result<(Vec<AttritionIte>, Option<EtaSolution>, Vec<String>)> {
    let att = ds.attrition_rows();
    if att.is_empty() {
        return Ok((
            Vec::new(),
            None,
            vec!["no attrited rows; extrapolation skipped".into()],
        ));
    }
    let rows: Vec<usize> = step1.observed.iter().map(|o| o.row).collect();
    let position = |i: usize| rows.iter().position(|&r| r == i);
    let to_local = |fold: &[usize]| -> Result<Vec<usize>> {
        fold.iter()
            .map(|&i| {
                position(i).ok_or_else(|| {
                    Error::Data(format!("row {i} of the step-2 plan has no step-1 interval"))
                })
            })
            .collect()
    };
    let train = to_local(&plan.obs_train)?;
    let calibration = to_local(&plan.obs_calibration)?;
    let lo: Vec<f64> = step1.observed.iter().map(|o| o.ite.lo).collect();
    let hi: Vec<f64> = step1.observed.iter().map(|o| o.ite.hi).collect();
    let obs_d: Vec<u8> = step1.observed.iter().map(|o| o.d).collect();
    let obs_x = ds.x.select_rows(&rows);
    let att_x = ds.x.select_rows(&att);
    let att_d: Vec<u8> = att.iter().map(|&i| ds.d[i]).collect();

    let out = extrapolate(
        &ExtrapolationInput {
            obs_x: &obs_x,
            obs_d: &obs_d,
            obs_lo: &lo,
            obs_hi: &hi,
            train: &train,
            calibration: &calibration,
            att_x: &att_x,
            att_d: &att_d,
        },
        cfg,
        roles,
    )?;
    let mut notes = Vec::new();
    if out.eta.degenerate {
        notes.push("extrapolation threshold is infinite; attrition intervals are unbounded".into());
    }
    let attrition = att
        .iter()
        .zip(out.intervals)
        .map(|(&row, interval)| AttritionIte { row, interval })
        .collect();
    Ok((attrition, Some(out.eta), notes))
}

/// Full pipeline. Fold assignment and learner seeds derive from `cfg.seed`.
pub fn cise(
    ds: &ExperimentDataset,
    cfg: &ConformalConfig,
    roles: &LearnerRoles,
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
    let plan = make_splits(ds.n(), &ds.r, cfg)?;
    let step1 = cise_step1(ds, &plan, cfg, &roles)?;
    let (attrition, eta_extrapolation, notes2) = cise_step2(&step1, ds, &plan, cfg, &roles)?;
    let mut notes = report.warnings;
    notes.extend(step1.notes.iter().cloned());
    notes.extend(notes2);
    Ok(CiseResult {
        method: Method::Cise,
        observed: step1.observed,
        attrition,
        eta_treated: Some(step1.eta[1]),
        eta_control: Some(step1.eta[0]),
        eta_extrapolation,
        notes,
    })
}
