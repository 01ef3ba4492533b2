use serde::{Deserialize, Serialize};

use crate::data::PredictionInterval;
use crate::error::{Error, Result};
use crate::io::{json_f64, json_opt_f64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub coverage: f64,
    /// `+inf` when any interval is unbounded.
    #[serde(with = "json_f64")]
    pub avg_length: f64,
    /// Mean length over bounded intervals only.
    #[serde(with = "json_opt_f64")]
    pub avg_finite_length: Option<f64>,
    pub n_infinite: usize,
    pub n: usize,
}

/// Share of truths inside their (closed) interval and mean length.
pub fn compute_metrics(
    intervals: &[PredictionInterval],
    truths: &[f64],
) -> Result<IntervalMetrics> {
    if intervals.len() != truths.len() {
        return Err(Error::Data(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if intervals.is_empty() {
        return Err(Error::InsufficientData("no intervals to evaluate".into()));
    }
    let n = intervals.len();
    let hits = intervals
        .iter()
        .zip(truths)
        .filter(|(iv, &t)| iv.contains(t))
        .count();
    let finite: Vec<f64> = intervals
        .iter()
        .filter(|iv| iv.is_finite())
        .map(|iv| iv.length())
        .collect();
    let n_infinite = n - finite.len();
    let finite_mean =
        (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
    Ok(IntervalMetrics {
        coverage: hits as f64 / n as f64,
        avg_length: if n_infinite > 0 {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / n as f64
        },
        avg_finite_length: finite_mean,
        n_infinite,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn unbounded_intervals_cover() {
        let ivs = vec![PredictionInterval::unbounded(); 4];
        let m = compute_metrics(&ivs, &[0.0, 1e300, -5.0, 2.0]).unwrap();
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.n_infinite, 4);
        assert_eq!(m.avg_length, f64::INFINITY);
        assert_eq!(m.avg_finite_length, None);
    }

    #[test]
    fn endpoints_are_covered() {
        let ivs = [
            PredictionInterval::new(1.0, 2.0),
            PredictionInterval::new(-1.0, 0.0),
        ];
        let m = compute_metrics(&ivs, &[1.0, 0.0]).unwrap();
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.avg_length, 1.0);
    }

    #[test]
    fn random_fixture_matches_recomputation() {
        let mut rng = SplitMix64::new(10);
        let mut ivs = Vec::new();
        let mut truths = Vec::new();
        for _ in 0..257 {
            let a = rng.normal();
            let b = a + rng.uniform() * 3.0;
            ivs.push(PredictionInterval::new(a, b));
            truths.push(rng.normal());
        }
        let m = compute_metrics(&ivs, &truths).unwrap();
        let mut hits = 0.0;
        let mut total = 0.0;
        for (iv, t) in ivs.iter().zip(&truths) {
            if iv.lo <= *t && *t <= iv.hi {
                hits += 1.0;
            }
            total += iv.hi - iv.lo;
        }
        assert!((m.coverage - hits / 257.0).abs() < 1e-12);
        assert!((m.avg_length - total / 257.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[PredictionInterval::new(0.0, 1.0)], &[]).is_err());
    }
}
