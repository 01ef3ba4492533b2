//! Run configuration and the deterministic fold plan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalConfig {
    /// Miscoverage of the counterfactual step.
    pub alpha: f64,
    /// Miscoverage of the extrapolation step.
    pub gamma: f64,
    /// Quantile levels for the outcome models; `None` means `(alpha/2, 1 - alpha/2)`.
    pub alpha_levels: Option<(f64, f64)>,
    /// Quantile levels for the interval-endpoint models; `None` means `(gamma/2, 1 - gamma/2)`.
    pub gamma_levels: Option<(f64, f64)>,
    pub pretrain_frac: f64,
    pub train_frac_of_rest: f64,
    pub step2_train_frac: f64,
    pub propensity_clip: f64,
    /// Feed the treatment indicator to the endpoint-mean models.
    pub endpoint_uses_treatment: bool,
    /// Rescale the inverse-odds weights of every moment so they sum to the
    /// target-group size before solving. `false` solves the plain EIF.
    pub balance_weights: bool,
    pub seed: u64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.025,
            gamma: 0.025,
            alpha_levels: None,
            gamma_levels: None,
            pretrain_frac: 0.20,
            train_frac_of_rest: 0.75,
            step2_train_frac: 0.50,
            propensity_clip: 0.01,
            endpoint_uses_treatment: false,
            balance_weights: true,
            seed: 0,
        }
    }
}

impl ConformalConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budgets(mut self, alpha: f64, gamma: f64) -> Self {
        self.alpha = alpha;
        self.gamma = gamma;
        self
    }

    pub fn alpha_quantile_levels(&self) -> (f64, f64) {
        self.alpha_levels
            .unwrap_or((self.alpha / 2.0, 1.0 - self.alpha / 2.0))
    }

    pub fn gamma_quantile_levels(&self) -> (f64, f64) {
        self.gamma_levels
            .unwrap_or((self.gamma / 2.0, 1.0 - self.gamma / 2.0))
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.alpha) || !open_unit(self.gamma) {
            return Err(Error::Config(format!(
                "alpha={} and gamma={} must lie in (0,1)",
                self.alpha, self.gamma
            )));
        }
        if self.alpha + self.gamma >= 1.0 {
            return Err(Error::Config("alpha + gamma must be < 1".into()));
        }
        for (name, v) in [
            ("pretrain_frac", self.pretrain_frac),
            ("train_frac_of_rest", self.train_frac_of_rest),
            ("step2_train_frac", self.step2_train_frac),
        ] {
            if !open_unit(v) {
                return Err(Error::Config(format!("{name}={v} must lie in (0,1)")));
            }
        }
        if !(self.propensity_clip > 0.0 && self.propensity_clip < 0.5) {
            return Err(Error::Config(format!(
                "propensity_clip={} must lie in (0, 0.5)",
                self.propensity_clip
            )));
        }
        for (lo, hi) in [self.alpha_quantile_levels(), self.gamma_quantile_levels()] {
            if !(open_unit(lo) && open_unit(hi) && lo < hi) {
                return Err(Error::Config(format!(
                    "quantile levels ({lo}, {hi}) must satisfy 0 < lo < hi < 1"
                )));
            }
        }
        Ok(())
    }
}

/// Disjoint row-index folds for both steps of the pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub pretrain: Vec<usize>,
    pub train1: Vec<usize>,
    pub train2: Vec<usize>,
    pub calibration: Vec<usize>,
    /// Step-2 training rows: calibration rows with R = 1.
    pub obs_train: Vec<usize>,
    /// Step-2 calibration rows: calibration rows with R = 1.
    pub obs_calibration: Vec<usize>,
}

impl SplitPlan {
    pub fn train(&self) -> Vec<usize> {
        let mut v = self.train1.clone();
        v.extend_from_slice(&self.train2);
        v
    }
}

#[inline]
fn rounded(n: usize, frac: f64) -> usize {
    (n as f64 * frac).round() as usize
}

/// Seeded shuffle, then contiguous slices.
///
/// Step 1 slices a permutation of all rows into pretraining, training
/// (halved into two subfolds) and calibration. Step 2 reshuffles the
/// calibration rows with `R = 1` and halves them.
pub fn make_splits(n_rows: usize, r_flags: &[u8], cfg: &ConformalConfig) -> Result<SplitPlan> {
    if n_rows < 8 {
        return Err(Error::InsufficientData(format!(
            "{n_rows} rows, need at least 8"
        )));
    }
    if r_flags.len() != n_rows {
        return Err(Error::Data(format!(
            "response flags have length {}, expected {n_rows}",
            r_flags.len()
        )));
    }

    let mut perm: Vec<usize> = (0..n_rows).collect();
    SplitMix64::new(derive_seed(cfg.seed, stream::SPLIT_STEP1)).shuffle(&mut perm);

    let n_pr = rounded(n_rows, cfg.pretrain_frac);
    let n_tr = rounded(n_rows - n_pr, cfg.train_frac_of_rest);
    let n_tr1 = rounded(n_tr, 0.5);
    let (pretrain, rest) = perm.split_at(n_pr);
    let (train, calibration) = rest.split_at(n_tr.min(rest.len()));
    let (train1, train2) = train.split_at(n_tr1.min(train.len()));

    for (name, fold) in [
        ("pretraining", pretrain),
        ("training 1", train1),
        ("training 2", train2),
        ("calibration", calibration),
    ] {
        if fold.is_empty() {
            return Err(Error::InsufficientData(format!("{name} fold is empty")));
        }
    }

    let mut observed: Vec<usize> = calibration
        .iter()
        .copied()
        .filter(|&i| r_flags[i] == 1)
        .collect();
    SplitMix64::new(derive_seed(cfg.seed, stream::SPLIT_STEP2)).shuffle(&mut observed);
    let n_obs_tr = rounded(observed.len(), cfg.step2_train_frac);
    let (obs_train, obs_calibration) = observed.split_at(n_obs_tr);

    Ok(SplitPlan {
        pretrain: pretrain.to_vec(),
        train1: train1.to_vec(),
        train2: train2.to_vec(),
        calibration: calibration.to_vec(),
        obs_train: obs_train.to_vec(),
        obs_calibration: obs_calibration.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_fold_sizes_at_1000() {
        let r = vec![1u8; 1000];
        let plan = make_splits(1000, &r, &ConformalConfig::default()).unwrap();
        assert_eq!(plan.pretrain.len(), 200);
        assert_eq!(plan.train1.len(), 300);
        assert_eq!(plan.train2.len(), 300);
        assert_eq!(plan.calibration.len(), 200);
        assert_eq!(plan.obs_train.len(), 100);
        assert_eq!(plan.obs_calibration.len(), 100);
    }

    #[test]
    fn same_seed_same_plan() {
        let r: Vec<u8> = (0..300).map(|i| (i % 3 != 0) as u8).collect();
        let cfg = ConformalConfig::default().with_seed(42);
        assert_eq!(
            make_splits(300, &r, &cfg).unwrap(),
            make_splits(300, &r, &cfg).unwrap()
        );
        let other = make_splits(300, &r, &cfg.clone().with_seed(43)).unwrap();
        assert_ne!(make_splits(300, &r, &cfg).unwrap(), other);
    }

    #[test]
    fn too_few_rows() {
        let err = make_splits(7, &[1; 7], &ConformalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn eight_rows_is_enough() {
        assert!(make_splits(8, &[1; 8], &ConformalConfig::default()).is_ok());
    }

    #[test]
    fn config_validation() {
        assert!(ConformalConfig::default().validate().is_ok());
        let bad = ConformalConfig::default().with_budgets(0.6, 0.5);
        assert!(bad.validate().is_err());
        let bad_clip = ConformalConfig {
            propensity_clip: 0.5,
            ..Default::default()
        };
        assert!(bad_clip.validate().is_err());
    }

    proptest! {
        #[test]
        fn step1_partitions_rows(n in 8usize..400, seed in any::<u64>(), mask in any::<u64>()) {
            let r: Vec<u8> = (0..n).map(|i| ((mask >> (i % 64)) & 1) as u8).collect();
            let cfg = ConformalConfig::default().with_seed(seed);
            let plan = make_splits(n, &r, &cfg).unwrap();

            let mut all: Vec<usize> = plan.pretrain.iter()
                .chain(&plan.train1).chain(&plan.train2).chain(&plan.calibration)
                .copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

            let mut step2: Vec<usize> = plan.obs_train.iter().chain(&plan.obs_calibration).copied().collect();
            step2.sort_unstable();
            let mut expected: Vec<usize> = plan.calibration.iter().copied().filter(|&i| r[i] == 1).collect();
            expected.sort_unstable();
            prop_assert_eq!(step2, expected);

            let within_one = |got: usize, target: f64| (got as f64 - target).abs() <= 1.0;
            prop_assert!(within_one(plan.pretrain.len(), 0.2 * n as f64));
            let rest = (n - plan.pretrain.len()) as f64;
            prop_assert!(within_one(plan.train1.len() + plan.train2.len(), 0.75 * rest));
        }
    }
}
