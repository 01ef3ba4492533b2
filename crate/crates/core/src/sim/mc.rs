//! Monte Carlo replication harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{json_digest, json_f64, json_opt_f64};
use crate::par;
use crate::pipeline::{difference_in_means, run_method, Method};
use crate::rng::{derive_seed, stream};
use crate::stats::{mean, sample_sd};
use crate::{ConformalConfig, LearnerRoles};

use super::dgp::{generate, oracle_length, DgpSpec};
use super::metrics::{compute_metrics, IntervalMetrics};

/// Everything that determines a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// `dgp.seed` is the master seed of the run.
    pub dgp: DgpSpec,
    pub method: Method,
    pub learner: String,
    pub cfg: ConformalConfig,
    pub roles: LearnerRoles,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub rep: usize,
    pub seed: u64,
    pub metrics: Option<IntervalMetrics>,
    #[serde(with = "json_opt_f64")]
    pub ate_r1: Option<f64>,
    /// Mean midpoint of the attrition intervals, when all are bounded.
    #[serde(with = "json_opt_f64")]
    pub ate_r0: Option<f64>,
    /// Mean true ITE over attrited units.
    #[serde(with = "json_opt_f64")]
    pub true_ate_r0: Option<f64>,
    pub n_attrition: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "json_f64")]
    pub mean: f64,
    /// Absent with fewer than two values.
    #[serde(with = "json_opt_f64")]
    pub sd: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let sd = if values.iter().all(|v| v.is_finite()) {
            sample_sd(values)
        } else {
            None
        };
        Self {
            mean: if values.is_empty() {
                f64::NAN
            } else {
                mean(values)
            },
            sd,
            count: values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub settings: McSettings,
    /// Digest of `settings`; identical runs share it.
    pub settings_digest: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub coverage: Summary,
    pub length: Summary,
    /// Mean length over bounded intervals.
    pub finite_length: Summary,
    pub ate_r1: Summary,
    pub ate_r0: Summary,
    pub oracle_length: f64,
    pub reps: Vec<RepResult>,
    /// Excluded from the serialized report so that reruns are
    /// byte-identical.
    #[serde(skip)]
    pub wall_seconds: f64,
}

fn run_rep(settings: &McSettings, rep: usize) -> RepResult {
    let seed = derive_seed(settings.dgp.seed, rep as u64);
    let mut out = RepResult {
        rep,
        seed,
        metrics: None,
        ate_r1: None,
        ate_r0: None,
        true_ate_r0: None,
        n_attrition: 0,
        error: None,
    };
    let mut attempt = || -> Result<()> {
        let draw = generate(&settings.dgp.clone().with_seed(seed))?;
        let cfg = settings
            .cfg
            .clone()
            .with_seed(derive_seed(seed, stream::PIPELINE));
        let res = run_method(settings.method, &draw.data, &cfg, &settings.roles)?;
        let truths: Vec<f64> = res
            .attrition
            .iter()
            .map(|a| draw.truth.ite[a.row])
            .collect();
        out.n_attrition = truths.len();
        out.ate_r1 = difference_in_means(&draw.data).ok().map(|e| e.value);
        if !truths.is_empty() {
            out.metrics = Some(compute_metrics(&res.attrition_intervals(), &truths)?);
            out.true_ate_r0 = Some(mean(&truths));
            if res.attrition.iter().all(|a| a.interval.is_finite()) {
                out.ate_r0 = Some(mean(
                    &res.attrition
                        .iter()
                        .map(|a| a.interval.midpoint())
                        .collect::<Vec<_>>(),
                ));
            }
        }
        Ok(())
    };
    if let Err(e) = attempt() {
        out.error = Some(e.to_string());
    }
    out
}

/// Run `settings.reps` independent replications. Replication `i` draws its
/// data and fold seeds from `derive_seed(settings.dgp.seed, i)`, so results
/// do not depend on `threads`.
pub fn run_mc(settings: &McSettings, threads: Option<usize>) -> Result<McReport> {
    if settings.reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    settings.dgp.validate()?;
    settings.cfg.validate()?;
    settings.roles.validate()?;
    let start = std::time::Instant::now();
    let reps = par::with_threads(threads, || {
        par::map_indexed(settings.reps, |r| run_rep(settings, r))
    });

    let failed: Vec<&RepResult> = reps.iter().filter(|r| r.error.is_some()).collect();
    if failed.len() * 5 > settings.reps {
        return Err(Error::Numerical(format!(
            "{} of {} replications failed; first error: {}",
            failed.len(),
            settings.reps,
            failed[0].error.as_deref().unwrap_or("")
        )));
    }
    let ok: Vec<&RepResult> = reps.iter().filter(|r| r.error.is_none()).collect();
    let with_metrics: Vec<&IntervalMetrics> =
        ok.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let collect = |f: &dyn Fn(&RepResult) -> Option<f64>| -> Vec<f64> {
        ok.iter().filter_map(|r| f(r)).collect()
    };
    Ok(McReport {
        settings_digest: json_digest(settings)?,
        settings: settings.clone(),
        n_ok: ok.len(),
        n_failed: failed.len(),
        coverage: Summary::of(&with_metrics.iter().map(|m| m.coverage).collect::<Vec<_>>()),
        length: Summary::of(
            &with_metrics
                .iter()
                .map(|m| m.avg_length)
                .collect::<Vec<_>>(),
        ),
        finite_length: Summary::of(
            &with_metrics
                .iter()
                .filter_map(|m| m.avg_finite_length)
                .collect::<Vec<_>>(),
        ),
        ate_r1: Summary::of(&collect(&|r| r.ate_r1)),
        ate_r0: Summary::of(&collect(&|r| r.ate_r0)),
        oracle_length: oracle_length(settings.cfg.alpha + settings.cfg.gamma),
        reps,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
