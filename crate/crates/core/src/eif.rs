//! Efficient-influence-function moments for the calibration thresholds and
//! the smallest-root solver.
//!
//! Each moment is affine in a single indicator:
//! `psi(row, eta) = base(row) + jump(row) * 1{score(row) < eta}`,
//! with the conditional-CDF nuisance frozen at its localized value. The
//! sample mean is therefore a nondecreasing step function of `eta` that
//! only moves at scored rows, and the solver scans those scores in order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{conformal_rank, order_statistic, sort_floats};

/// Per-row nuisances for the counterfactual thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterfactualRow {
    pub d: u8,
    pub r: u8,
    /// Score on the source arm; ignored elsewhere.
    pub score: f64,
    /// Localized conditional CDF of the source-arm score at this row.
    pub m: f64,
    /// `P(R = 1 | X, D = 1)`.
    pub e_r1: f64,
    /// `P(R = 1 | X, D = 0)`.
    pub e_r0: f64,
    /// Treatment odds `e_D / (1 - e_D)`.
    pub pi_d: f64,
}

/// Per-row nuisances for the extrapolation threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationRow {
    pub r: u8,
    /// Interval score on observed rows; ignored where `r = 0`.
    pub score: f64,
    /// Localized conditional CDF of the interval score at `(X, D)`.
    pub m: f64,
    /// Response odds `P(R=1|X,D) / P(R=0|X,D)`.
    pub pi_r: f64,
}

/// `psi(row, eta) = base + jump * 1{score < eta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentTerms {
    pub base: f64,
    pub jump: f64,
    /// `None` when the row carries no indicator.
    pub score: Option<f64>,
}

pub trait Moment {
    type Row;

    fn terms(&self, row: &Self::Row) -> MomentTerms;

    /// Indicator of the target group the threshold is calibrated for.
    fn target(&self, row: &Self::Row) -> f64;

    /// Same moment with the inverse-odds weights multiplied by `scale`.
    fn rescaled(&self, scale: f64) -> Self
    where
        Self: Sized;

    fn eval(&self, row: &Self::Row, eta: f64) -> f64 {
        let t = self.terms(row);
        match t.score {
            Some(s) if s < eta => t.base + t.jump,
            _ => t.base,
        }
    }
}

/// Moment for the threshold of `Y(1)` intervals, scored on treated rows and
/// targeting observed controls.
#[derive(Debug, Clone, Copy)]
pub struct TreatedArmMoment {
    pub alpha: f64,
    /// Multiplier on the inverse-odds weights; 1 gives the plain EIF.
    pub weight_scale: f64,
}

impl TreatedArmMoment {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            weight_scale: 1.0,
        }
    }
}

/// Moment for the threshold of `Y(0)` intervals, scored on control rows and
/// targeting observed treated units.
#[derive(Debug, Clone, Copy)]
pub struct ControlArmMoment {
    pub alpha: f64,
    /// Multiplier on the inverse-odds weights; 1 gives the plain EIF.
    pub weight_scale: f64,
}

impl ControlArmMoment {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            weight_scale: 1.0,
        }
    }
}

/// Moment for the extrapolation threshold, scored on observed rows and
/// targeting attrited rows.
#[derive(Debug, Clone, Copy)]
pub struct ExtrapolationMoment {
    pub gamma: f64,
    /// Multiplier on the inverse-odds weights; 1 gives the plain EIF.
    pub weight_scale: f64,
}

impl ExtrapolationMoment {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            weight_scale: 1.0,
        }
    }
}

impl Moment for TreatedArmMoment {
    type Row = CounterfactualRow;

    fn terms(&self, row: &CounterfactualRow) -> MomentTerms {
        let r = f64::from(row.r);
        let d = f64::from(row.d);
        let target = r * (1.0 - d) * (row.m - (1.0 - self.alpha));
        let weight = self.weight_scale * d * r * row.e_r0 / (row.pi_d * row.e_r1);
        MomentTerms {
            base: target - weight * row.m,
            jump: weight,
            score: (row.d == 1 && row.r == 1).then_some(row.score),
        }
    }

    fn target(&self, row: &CounterfactualRow) -> f64 {
        f64::from(row.r == 1 && row.d == 0)
    }

    fn rescaled(&self, scale: f64) -> Self {
        Self {
            weight_scale: self.weight_scale * scale,
            ..*self
        }
    }
}

impl Moment for ControlArmMoment {
    type Row = CounterfactualRow;

    fn terms(&self, row: &CounterfactualRow) -> MomentTerms {
        let r = f64::from(row.r);
        let d = f64::from(row.d);
        let target = r * d * (row.m - (1.0 - self.alpha));
        let weight = self.weight_scale * (1.0 - d) * r * row.e_r1 * row.pi_d / row.e_r0;
        MomentTerms {
            base: target - weight * row.m,
            jump: weight,
            score: (row.d == 0 && row.r == 1).then_some(row.score),
        }
    }

    fn target(&self, row: &CounterfactualRow) -> f64 {
        f64::from(row.r == 1 && row.d == 1)
    }

    fn rescaled(&self, scale: f64) -> Self {
        Self {
            weight_scale: self.weight_scale * scale,
            ..*self
        }
    }
}

impl Moment for ExtrapolationMoment {
    type Row = ExtrapolationRow;

    fn terms(&self, row: &ExtrapolationRow) -> MomentTerms {
        let r = f64::from(row.r);
        let target = (1.0 - r) * (row.m - (1.0 - self.gamma));
        let weight = self.weight_scale * r / row.pi_r;
        MomentTerms {
            base: target - weight * row.m,
            jump: weight,
            score: (row.r == 1).then_some(row.score),
        }
    }

    fn target(&self, row: &ExtrapolationRow) -> f64 {
        f64::from(row.r == 0)
    }

    fn rescaled(&self, scale: f64) -> Self {
        Self {
            weight_scale: self.weight_scale * scale,
            ..*self
        }
    }
}

/// `psi_1` at `eta`.
pub fn psi1_eval(row: &CounterfactualRow, eta: f64, alpha: f64) -> f64 {
    TreatedArmMoment::new(alpha).eval(row, eta)
}

/// `psi_0` at `eta`.
pub fn psi0_eval(row: &CounterfactualRow, eta: f64, alpha: f64) -> f64 {
    ControlArmMoment::new(alpha).eval(row, eta)
}

/// `psi_C` at `eta`.
pub fn psi_c_eval(row: &ExtrapolationRow, eta: f64, gamma: f64) -> f64 {
    ExtrapolationMoment::new(gamma).eval(row, eta)
}

/// Root of the sample moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaSolution {
    /// Smallest candidate `c` with mean `psi(c+) >= 0`, or `+inf`.
    #[serde(with = "crate::io::json_f64")]
    pub eta: f64,
    /// Sample mean of the moment at `eta+` (or at the last candidate).
    pub moment_value_at_eta: f64,
    pub candidates_scanned: usize,
    /// No candidate satisfied the moment condition.
    pub degenerate: bool,
}

/// `ceil(level (n+1))`-th order statistic, clamped to the maximum.
pub fn initial_eta(scores: &[f64], level: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientData(
            "initial threshold needs at least one score".into(),
        ));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {level} must lie in (0,1)")));
    }
    let mut sorted = scores.to_vec();
    sort_floats(&mut sorted);
    Ok(order_statistic(
        &sorted,
        conformal_rank(level, sorted.len()),
    ))
}

/// Sorted, de-duplicated finite scores of the rows that carry an indicator.
pub fn score_candidates<M: Moment>(moment: &M, rows: &[M::Row]) -> Vec<f64> {
    let mut c: Vec<f64> = rows
        .iter()
        .filter_map(|row| moment.terms(row).score)
        .filter(|s| s.is_finite())
        .collect();
    sort_floats(&mut c);
    c.dedup();
    c
}

/// Smallest candidate `c` (ascending) with `mean psi(c+) >= 0`.
///
/// The moment is evaluated just above each candidate, i.e. the indicator
/// counts scores `<= c`; a candidate of `+inf` counts every finite score.
pub fn solve_smallest_eta<M: Moment>(
    moment: &M,
    rows: &[M::Row],
    candidates: &[f64],
) -> EtaSolution {
    let n = rows.len().max(1) as f64;
    let mut base = 0.0;
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    for row in rows {
        let t = moment.terms(row);
        base += t.base;
        if let Some(s) = t.score {
            jumps.push((s, t.jump));
        }
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut sum = base;
    let mut next = 0;
    let mut last = base / n;
    for (scanned, &c) in candidates.iter().enumerate() {
        while next < jumps.len() {
            let s = jumps[next].0;
            let counted = if c == f64::INFINITY { s < c } else { s <= c };
            if !counted {
                break;
            }
            sum += jumps[next].1;
            next += 1;
        }
        last = sum / n;
        if last >= 0.0 {
            return EtaSolution {
                eta: c,
                moment_value_at_eta: last,
                candidates_scanned: scanned + 1,
                degenerate: false,
            };
        }
    }
    EtaSolution {
        eta: f64::INFINITY,
        moment_value_at_eta: last,
        candidates_scanned: candidates.len(),
        degenerate: true,
    }
}

/// Factor that makes the scored-row weights sum to the size of the target
/// group. Returns 1 when either side is empty.
pub fn balancing_scale<M: Moment>(moment: &M, rows: &[M::Row]) -> f64 {
    let mut targets = 0.0;
    let mut weights = 0.0;
    for row in rows {
        targets += moment.target(row);
        let t = moment.terms(row);
        if t.score.is_some() {
            weights += t.jump;
        }
    }
    if targets > 0.0 && weights > 0.0 && weights.is_finite() {
        targets / weights
    } else {
        1.0
    }
}

/// [`solve_over_scores`] after rescaling the weights by [`balancing_scale`].
pub fn solve_balanced<M: Moment>(moment: &M, rows: &[M::Row]) -> EtaSolution {
    let balanced = moment.rescaled(balancing_scale(moment, rows));
    solve_over_scores(&balanced, rows)
}

/// Solve over the row scores themselves.
pub fn solve_over_scores<M: Moment>(moment: &M, rows: &[M::Row]) -> EtaSolution {
    let candidates = score_candidates(moment, rows);
    solve_smallest_eta(moment, rows, &candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn cf(d: u8, r: u8, score: f64, m: f64, e_r1: f64, e_r0: f64, pi_d: f64) -> CounterfactualRow {
        CounterfactualRow {
            d,
            r,
            score,
            m,
            e_r1,
            e_r0,
            pi_d,
        }
    }

    #[test]
    fn psi1_examples() {
        let alpha = 0.05;
        assert_eq!(
            psi1_eval(&cf(0, 1, 0.0, 1.0 - alpha, 0.5, 0.5, 1.0), 1.0, alpha),
            0.0
        );
        assert_eq!(
            psi1_eval(&cf(1, 1, 0.0, 0.5, 0.7, 0.7, 1.0), 1.0, alpha),
            0.5
        );
        for d in [0, 1] {
            assert_eq!(
                psi1_eval(&cf(d, 0, 0.0, 0.3, 0.6, 0.4, 2.0), 1.0, alpha),
                0.0
            );
        }
    }

    #[test]
    fn psi0_examples() {
        let alpha = 0.05;
        assert_eq!(
            psi0_eval(&cf(1, 1, 0.0, 1.0 - alpha, 0.5, 0.5, 1.0), 1.0, alpha),
            0.0
        );
        assert_eq!(
            psi0_eval(&cf(0, 1, 2.0, 0.5, 0.6, 0.6, 1.0), 1.0, alpha),
            -0.5
        );
    }

    #[test]
    fn psi0_is_psi1_after_relabeling() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..1000 {
            let row = cf(
                u8::from(rng.bernoulli(0.5)),
                u8::from(rng.bernoulli(0.7)),
                rng.normal(),
                rng.uniform(),
                0.05 + 0.9 * rng.uniform(),
                0.05 + 0.9 * rng.uniform(),
                0.1 + 3.0 * rng.uniform(),
            );
            let eta = rng.normal();
            let alpha = 0.1 * rng.uniform() + 0.01;
            let swapped = CounterfactualRow {
                d: 1 - row.d,
                e_r1: row.e_r0,
                e_r0: row.e_r1,
                pi_d: 1.0 / row.pi_d,
                ..row
            };
            let a = psi0_eval(&row, eta, alpha);
            let b = psi1_eval(&swapped, eta, alpha);
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn psi_c_examples() {
        let gamma = 0.05;
        let row = |r, score, m, pi_r| ExtrapolationRow { r, score, m, pi_r };
        assert_eq!(psi_c_eval(&row(0, 0.0, 1.0 - gamma, 1.0), 0.0, gamma), 0.0);
        assert_eq!(psi_c_eval(&row(1, 0.0, 0.5, 1.0), 1.0, gamma), 0.5);
        assert_eq!(psi_c_eval(&row(1, 2.0, 0.5, 2.0), 1.0, gamma), -0.25);
        // m equal to the realized indicator zeroes an observed row.
        assert_eq!(psi_c_eval(&row(1, 0.5, 1.0, 3.0), 1.0, gamma), 0.0);
        assert_eq!(psi_c_eval(&row(1, 1.5, 0.0, 3.0), 1.0, gamma), 0.0);
    }

    #[test]
    fn initial_eta_examples() {
        let s: Vec<f64> = (1..=99).map(f64::from).collect();
        assert_eq!(initial_eta(&s, 0.95).unwrap(), 95.0);
        assert_eq!(initial_eta(&[4.2], 0.9).unwrap(), 4.2);
        let s39: Vec<f64> = (1..=39).map(f64::from).collect();
        assert_eq!(initial_eta(&s39, 0.975).unwrap(), 39.0);
        assert!(initial_eta(&[], 0.9).is_err());
    }

    #[test]
    fn target_only_rows_give_constant_moment() {
        let m = ExtrapolationMoment::new(0.1);
        let pos = vec![
            ExtrapolationRow {
                r: 0,
                score: f64::NAN,
                m: 0.95,
                pi_r: 1.0
            };
            5
        ];
        let sol = solve_smallest_eta(&m, &pos, &[0.0, 1.0, f64::INFINITY]);
        assert_eq!(sol.eta, 0.0);
        let neg = vec![
            ExtrapolationRow {
                r: 0,
                score: f64::NAN,
                m: 0.5,
                pi_r: 1.0
            };
            5
        ];
        let sol = solve_smallest_eta(&m, &neg, &[0.0, 1.0, f64::INFINITY]);
        assert!(sol.degenerate && sol.eta == f64::INFINITY);
    }

    #[test]
    fn unit_weights_recover_empirical_quantile() {
        // m = 1 - gamma and unit odds: the moment becomes
        // sum_i [1{V_i <= c} - (1 - gamma)] over observed rows, whose root is
        // the ceil((1-gamma) n)-th order statistic.
        let mut rng = SplitMix64::new(4);
        let gamma = 0.1;
        let n = 199;
        let rows: Vec<ExtrapolationRow> = (0..n)
            .map(|_| ExtrapolationRow {
                r: 1,
                score: rng.normal(),
                m: 1.0 - gamma,
                pi_r: 1.0,
            })
            .collect();
        let sol = solve_over_scores(&ExtrapolationMoment::new(gamma), &rows);
        let mut sorted: Vec<f64> = rows.iter().map(|r| r.score).collect();
        sort_floats(&mut sorted);
        let k = ((1.0 - gamma) * n as f64).ceil() as usize;
        let idx = sorted.iter().position(|&s| s == sol.eta).unwrap() + 1;
        assert!((idx as i64 - k as i64).abs() <= 1, "rank {idx} vs {k}");
    }

    #[test]
    fn balancing_scale_matches_target_count() {
        let rows = vec![
            ExtrapolationRow {
                r: 1,
                score: 0.1,
                m: 0.9,
                pi_r: 0.5,
            },
            ExtrapolationRow {
                r: 1,
                score: 0.2,
                m: 0.9,
                pi_r: 2.0,
            },
            ExtrapolationRow {
                r: 0,
                score: f64::NAN,
                m: 0.9,
                pi_r: 1.0,
            },
        ];
        // Weights 1/0.5 + 1/2 = 2.5 against one target row.
        let m = ExtrapolationMoment::new(0.1);
        assert!((balancing_scale(&m, &rows) - 0.4).abs() < 1e-15);
        let only_targets = &rows[2..];
        assert_eq!(balancing_scale(&m, only_targets), 1.0);
    }

    proptest! {
        #[test]
        fn moment_is_nondecreasing(seed in any::<u64>(), n in 1usize..60) {
            let mut rng = SplitMix64::new(seed);
            let rows: Vec<CounterfactualRow> = (0..n).map(|_| cf(
                u8::from(rng.bernoulli(0.5)),
                u8::from(rng.bernoulli(0.8)),
                rng.normal(),
                rng.uniform(),
                0.05 + 0.9 * rng.uniform(),
                0.05 + 0.9 * rng.uniform(),
                0.2 + 2.0 * rng.uniform(),
            )).collect();
            let moment = TreatedArmMoment::new(0.1);
            let mean = |eta: f64| rows.iter().map(|r| moment.eval(r, eta)).sum::<f64>() / n as f64;
            let mut grid: Vec<f64> = (0..40).map(|i| -3.0 + 0.15 * i as f64).collect();
            grid.push(f64::INFINITY);
            for w in grid.windows(2) {
                prop_assert!(mean(w[0]) <= mean(w[1]) + 1e-12);
            }
        }

        #[test]
        fn balanced_root_ignores_odds_scale(seed in any::<u64>(), n in 2usize..50, c in 0.1f64..10.0) {
            let mut rng = SplitMix64::new(seed);
            let rows: Vec<ExtrapolationRow> = (0..n).map(|_| ExtrapolationRow {
                r: u8::from(rng.bernoulli(0.6)),
                score: rng.normal(),
                m: 0.5 + 0.5 * rng.uniform(),
                pi_r: 0.2 + 3.0 * rng.uniform(),
            }).collect();
            let scaled: Vec<ExtrapolationRow> = rows.iter().map(|r| ExtrapolationRow { pi_r: r.pi_r * c, ..*r }).collect();
            let m = ExtrapolationMoment::new(0.1);
            prop_assert_eq!(solve_balanced(&m, &rows).eta, solve_balanced(&m, &scaled).eta);
        }
    }
}
