//! Nonconformity scores and split-conformal calibration, weighted and
//! unweighted.

use crate::data::{Matrix, PredictionInterval};
use crate::error::{Error, Result};
use crate::learners::{fit_mean, fit_quantile_pair, LearnerSpec, MeanModel, QuantilePairModel};
use crate::rng::SplitMix64;
use crate::stats::{conformal_rank, sort_floats};

/// CQR score `max(q_lo - y, y - q_hi)`; negative iff `y` is strictly inside.
#[inline]
pub fn cqr_score(y: f64, q_lo: f64, q_hi: f64) -> f64 {
    (q_lo - y).max(y - q_hi)
}

/// Interval score `max(h_lo - c_lo, c_hi - h_hi)`; `<= 0` iff
/// `[c_lo, c_hi] ⊆ [h_lo, h_hi]`.
#[inline]
pub fn interval_score(c_lo: f64, c_hi: f64, h_lo: f64, h_hi: f64) -> f64 {
    (h_lo - c_lo).max(c_hi - h_hi)
}

/// Calibration scores with optional weights and the test point's mass,
/// which sits at `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub scores: Vec<f64>,
    /// Empty means unweighted.
    pub weights: Vec<f64>,
    pub test_weight: f64,
}

impl ScoreSet {
    pub fn unweighted(scores: Vec<f64>) -> Self {
        Self {
            scores,
            weights: Vec::new(),
            test_weight: 1.0,
        }
    }

    pub fn weighted(scores: Vec<f64>, weights: Vec<f64>, test_weight: f64) -> Result<Self> {
        if weights.len() != scores.len() {
            return Err(Error::Data(format!(
                "{} weights for {} scores",
                weights.len(),
                scores.len()
            )));
        }
        if weights
            .iter()
            .chain(std::iter::once(&test_weight))
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::Data(
                "weights must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            scores,
            weights,
            test_weight,
        })
    }
}

#[inline]
fn reaches(cum: f64, target: f64) -> bool {
    cum >= target - 1e-12 * target.abs()
}

/// Quantile at `level` of `sum_i p_i delta_{S_i} + p_inf delta_{+inf}`.
///
/// Returns the smallest score whose cumulative normalized mass reaches
/// `level`, or `+inf` when only the atom at infinity does. Without weights
/// this is the `ceil(level (n + 1))`-th order statistic.
pub fn weighted_quantile(ss: &ScoreSet, level: f64) -> f64 {
    if ss.scores.is_empty() {
        return f64::INFINITY;
    }
    if ss.weights.is_empty() {
        let mut sorted = ss.scores.clone();
        sort_floats(&mut sorted);
        let rank = conformal_rank(level, sorted.len());
        return if rank > sorted.len() {
            f64::INFINITY
        } else {
            sorted[rank.max(1) - 1]
        };
    }
    let mut pairs: Vec<(f64, f64)> = ss
        .scores
        .iter()
        .copied()
        .zip(ss.weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = ss.weights.iter().sum::<f64>() + ss.test_weight;
    if total <= 0.0 {
        return f64::INFINITY;
    }
    let target = level * total;
    let mut cum = 0.0;
    for (s, w) in pairs {
        cum += w;
        if reaches(cum, target) {
            return s;
        }
    }
    f64::INFINITY
}

/// Weighted split CQR with the quantile model fitted once and calibration
/// scores pre-sorted, so per-test-point thresholds cost a binary search.
#[derive(Debug, Clone)]
pub struct WeightedCqr {
    model: QuantilePairModel,
    sorted_scores: Vec<f64>,
    cum_weights: Vec<f64>,
    level: f64,
}

impl WeightedCqr {
    /// Fit the quantile pair at `(miscoverage/2, 1 - miscoverage/2)` on the
    /// training rows and score the calibration rows, each weighted by
    /// `weight_fn(x_i)`.
    pub fn fit(
        train_x: &Matrix,
        train_y: &[f64],
        cal_x: &Matrix,
        cal_y: &[f64],
        miscoverage: f64,
        weight_fn: &dyn Fn(&[f64]) -> f64,
        spec: &LearnerSpec,
    ) -> Result<Self> {
        if cal_y.is_empty() || train_y.is_empty() {
            return Err(Error::InsufficientData(
                "weighted CQR needs training and calibration rows".into(),
            ));
        }
        let model = fit_quantile_pair(
            train_x,
            train_y,
            miscoverage / 2.0,
            1.0 - miscoverage / 2.0,
            spec,
        )?;
        let mut pairs = Vec::with_capacity(cal_y.len());
        for (row, &y) in cal_x.iter_rows().zip(cal_y) {
            let (lo, hi) = model.predict(row);
            let w = weight_fn(row);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Numerical(format!(
                    "weight {w} is not finite positive"
                )));
            }
            pairs.push((cqr_score(y, lo, hi), w));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = 0.0;
        let cum_weights = pairs
            .iter()
            .map(|&(_, w)| {
                cum += w;
                cum
            })
            .collect();
        Ok(Self {
            model,
            sorted_scores: pairs.into_iter().map(|p| p.0).collect(),
            cum_weights,
            level: 1.0 - miscoverage,
        })
    }

    pub fn model(&self) -> &QuantilePairModel {
        &self.model
    }

    /// Threshold for a test point carrying mass `test_weight` at infinity.
    pub fn eta(&self, test_weight: f64) -> f64 {
        let total = self.cum_weights.last().copied().unwrap_or(0.0) + test_weight;
        let target = self.level * total;
        let at = self.cum_weights.partition_point(|&c| !reaches(c, target));
        self.sorted_scores.get(at).copied().unwrap_or(f64::INFINITY)
    }

    pub fn interval(&self, x: &[f64], test_weight: f64) -> PredictionInterval {
        let (lo, hi) = self.model.predict(x);
        PredictionInterval::expand(lo, hi, self.eta(test_weight))
    }
}

/// One-shot weighted split CQR at a single test point.
#[allow(clippy::too_many_arguments)]
pub fn weighted_split_cqr(
    train_x: &Matrix,
    train_y: &[f64],
    cal_x: &Matrix,
    cal_y: &[f64],
    x_test: &[f64],
    miscoverage: f64,
    weight_fn: &dyn Fn(&[f64]) -> f64,
    spec: &LearnerSpec,
) -> Result<PredictionInterval> {
    let cqr = WeightedCqr::fit(train_x, train_y, cal_x, cal_y, miscoverage, weight_fn, spec)?;
    let w = weight_fn(x_test);
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::Numerical(format!(
            "test weight {w} is not finite positive"
        )));
    }
    Ok(cqr.interval(x_test, w))
}

/// Threshold for interval outcomes: the `ceil((1-gamma)(n+1))`-th smallest
/// score, `+inf` when that rank exceeds `n`.
pub fn interval_conformal_eta(scores: &[f64], gamma: f64) -> f64 {
    weighted_quantile(&ScoreSet::unweighted(scores.to_vec()), 1.0 - gamma)
}

/// Unweighted split conformal inference for interval-valued outcomes.
#[derive(Debug, Clone)]
pub struct IntervalConformal {
    h_lo: MeanModel,
    h_hi: MeanModel,
    pub eta: f64,
    pub n_calibration: usize,
}

impl IntervalConformal {
    /// Halve the rows by a seeded shuffle, fit endpoint means on one half,
    /// calibrate on the other.
    pub fn fit(
        x: &Matrix,
        lo: &[f64],
        hi: &[f64],
        gamma: f64,
        spec: &LearnerSpec,
        seed: u64,
    ) -> Result<Self> {
        let n = lo.len();
        if n < 4 {
            return Err(Error::InsufficientData(format!(
                "interval conformal needs at least 4 rows, got {n}"
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        SplitMix64::new(seed).shuffle(&mut perm);
        let (train, cal) = perm.split_at(n / 2);
        // Unbounded intervals cannot train a mean model; they still score
        // (at +inf) during calibration.
        let train: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&i| lo[i].is_finite() && hi[i].is_finite())
            .collect();
        let tx = x.select_rows(&train);
        let pick = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let h_lo = fit_mean(&tx, &pick(lo, &train), spec)?;
        let h_hi = fit_mean(&tx, &pick(hi, &train), spec)?;
        let scores: Vec<f64> = cal
            .iter()
            .map(|&i| {
                let row = x.row(i);
                interval_score(lo[i], hi[i], h_lo.predict(row), h_hi.predict(row))
            })
            .collect();
        Ok(Self {
            h_lo,
            h_hi,
            eta: interval_conformal_eta(&scores, gamma),
            n_calibration: cal.len(),
        })
    }

    pub fn interval(&self, x: &[f64]) -> PredictionInterval {
        PredictionInterval::expand(self.h_lo.predict(x), self.h_hi.predict(x), self.eta)
    }

    pub fn is_uninformative(&self) -> bool {
        self.eta == f64::INFINITY
    }
}

/// Fit-and-predict wrapper for a single test point.
pub fn unweighted_interval_conformal(
    x: &Matrix,
    lo: &[f64],
    hi: &[f64],
    x_test: &[f64],
    gamma: f64,
    spec: &LearnerSpec,
    seed: u64,
) -> Result<PredictionInterval> {
    Ok(IntervalConformal::fit(x, lo, hi, gamma, spec, seed)?.interval(x_test))
}
