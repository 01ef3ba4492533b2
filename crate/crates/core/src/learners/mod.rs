//! Built-in base learners for every nuisance function.
//!
//! Three families cover all roles:
//!
//! * `Glm` - ridge-stabilized logistic regression fitted by IRLS for
//!   probabilities, ordinary least squares for means.
//! * `QuantileLinear` - linear conditional quantiles minimizing a smoothed
//!   pinball loss. For mean and probability roles it behaves as `Glm`.
//! * `RandomForest` - bagged CART trees. Probabilities average leaf label
//!   frequencies, means average leaf means, quantiles pool leaf samples.
//!
//! Each fit returns a small model struct with a `predict` method and a
//! [`FitFlags`] record of degeneracies encountered.

mod forest;
mod glm;
mod quantile;

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

pub use forest::{Forest, ForestParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Glm,
    QuantileLinear,
    RandomForest,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glm" => Ok(Self::Glm),
            "quantile_linear" | "qlinear" => Ok(Self::QuantileLinear),
            "random_forest" | "forest" | "rf" => Ok(Self::RandomForest),
            other => Err(Error::Config(format!("unknown learner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// Ridge penalty on slopes (glm).
    pub ridge: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features tried per split; `None` means `sqrt(k)/k`.
    pub feature_frac: Option<f64>,
    /// Pinball smoothing width, relative to the target's standard deviation.
    pub smoothing: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self {
            kind,
            ridge: 1e-6,
            n_trees: 200,
            max_depth: 8,
            min_leaf: 5,
            feature_frac: None,
            smoothing: 1e-4,
            max_iter: 200,
            seed: 0,
        }
    }

    pub fn glm() -> Self {
        Self::new(LearnerKind::Glm)
    }

    pub fn forest() -> Self {
        Self::new(LearnerKind::RandomForest)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0) {
            return Err(Error::Config("ridge must be >= 0".into()));
        }
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::Config(
                "forest needs n_trees, max_depth, min_leaf >= 1".into(),
            ));
        }
        if let Some(f) = self.feature_frac {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config("feature_frac must lie in (0,1]".into()));
            }
        }
        if !(self.smoothing > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(
                "smoothing must be > 0 and max_iter >= 1".into(),
            ));
        }
        Ok(())
    }

    fn forest_params(&self, k: usize) -> ForestParams {
        let frac = self
            .feature_frac
            .unwrap_or_else(|| (k as f64).sqrt() / k as f64);
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            mtry: ((frac * k as f64).round() as usize).clamp(1, k.max(1)),
            seed: self.seed,
        }
    }
}

/// Learner choice per nuisance role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerRoles {
    /// Conditional quantiles of outcomes (and endpoints, inexact baseline).
    pub quantile: LearnerSpec,
    /// Treatment and response propensities.
    pub propensity: LearnerSpec,
    /// Localized conditional CDFs `m_d`, `m_C`.
    pub cdf: LearnerSpec,
    /// Conditional means of interval endpoints.
    pub mean: LearnerSpec,
}

/// Ridge of the `glm` conditional-CDF role.
pub const CDF_RIDGE: f64 = 1.0;

impl LearnerRoles {
    /// `glm` for every role, linear quantile regression for quantiles.
    /// The conditional CDF is fitted on labels that are almost all 1, so its
    /// logistic fit carries a unit ridge against separation.
    pub fn glm() -> Self {
        Self {
            quantile: LearnerSpec::new(LearnerKind::QuantileLinear),
            propensity: LearnerSpec::glm(),
            cdf: LearnerSpec {
                ridge: CDF_RIDGE,
                ..LearnerSpec::glm()
            },
            mean: LearnerSpec::glm(),
        }
    }

    pub fn forest() -> Self {
        Self::uniform(LearnerSpec::forest())
    }

    pub fn uniform(spec: LearnerSpec) -> Self {
        Self {
            quantile: spec.clone(),
            propensity: spec.clone(),
            cdf: spec.clone(),
            mean: spec,
        }
    }

    pub fn from_kind(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::Glm | LearnerKind::QuantileLinear => Self::glm(),
            LearnerKind::RandomForest => Self::forest(),
        }
    }

    /// Same roles with every learner seed re-derived from `seed`.
    pub fn reseeded(&self, seed: u64) -> Self {
        use crate::rng::derive_seed;
        let mut out = self.clone();
        out.quantile.seed = derive_seed(seed, 11);
        out.propensity.seed = derive_seed(seed, 12);
        out.cdf.seed = derive_seed(seed, 13);
        out.mean.seed = derive_seed(seed, 14);
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.quantile.validate()?;
        self.propensity.validate()?;
        self.cdf.validate()?;
        self.mean.validate()
    }
}

/// Degeneracies met while fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// Labels were single-class; the model is a clipped constant.
    pub degenerate: bool,
    /// Design was rank deficient; ridge fallback was used.
    pub rank_deficient: bool,
    /// Iterative fit stopped at the iteration cap.
    pub not_converged: bool,
}

#[derive(Debug, Clone)]
enum ProbInner {
    Constant(f64),
    Logistic(Vec<f64>),
    Forest(Forest),
}

/// Binary-probability model with predictions clipped to `[clip, 1 - clip]`.
#[derive(Debug, Clone)]
pub struct ProbabilityModel {
    inner: ProbInner,
    clip: f64,
    pub flags: FitFlags,
}

impl ProbabilityModel {
    pub fn constant(p: f64, clip: f64) -> Self {
        Self {
            inner: ProbInner::Constant(p),
            clip,
            flags: FitFlags {
                degenerate: true,
                ..Default::default()
            },
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let p = match &self.inner {
            ProbInner::Constant(p) => *p,
            ProbInner::Logistic(beta) => {
                crate::stats::logistic(crate::linalg::linear_predict(beta, row))
            }
            ProbInner::Forest(f) => f.predict_mean(row),
        };
        p.clamp(self.clip, 1.0 - self.clip)
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }

    /// Fitted logistic coefficients, intercept first.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.inner {
            ProbInner::Logistic(b) => Some(b),
            _ => None,
        }
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }
}

#[derive(Debug, Clone)]
enum MeanInner {
    Linear(Vec<f64>),
    Forest(Forest),
}

#[derive(Debug, Clone)]
pub struct MeanModel {
    inner: MeanInner,
    pub flags: FitFlags,
}

impl MeanModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match &self.inner {
            MeanInner::Linear(beta) => crate::linalg::linear_predict(beta, row),
            MeanInner::Forest(f) => f.predict_mean(row),
        }
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

#[derive(Debug, Clone)]
enum QuantInner {
    Linear {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Forest {
        forest: Forest,
        lo_level: f64,
        hi_level: f64,
    },
}

/// Pair of conditional-quantile predictors with non-crossing repair.
#[derive(Debug, Clone)]
pub struct QuantilePairModel {
    inner: QuantInner,
    pub flags: FitFlags,
}

impl QuantilePairModel {
    /// `(q_lo(x), q_hi(x))`; crossing values are both set to their average.
    pub fn predict(&self, row: &[f64]) -> (f64, f64) {
        let (lo, hi) = match &self.inner {
            QuantInner::Linear { lo, hi } => (
                crate::linalg::linear_predict(lo, row),
                crate::linalg::linear_predict(hi, row),
            ),
            QuantInner::Forest {
                forest,
                lo_level,
                hi_level,
            } => forest.predict_quantiles(row, *lo_level, *hi_level),
        };
        if lo > hi {
            let mid = 0.5 * (lo + hi);
            (mid, mid)
        } else {
            (lo, hi)
        }
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<(f64, f64)> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

fn check_rows(features: &Matrix, n_targets: usize) -> Result<()> {
    if features.rows() != n_targets {
        return Err(Error::Data(format!(
            "{} feature rows but {} targets",
            features.rows(),
            n_targets
        )));
    }
    Ok(())
}

/// Fit `P(label = 1 | features)`.
///
/// Single-class labels give a constant model at `clip` or `1 - clip` with
/// the degeneracy flag set.
pub fn fit_propensity(
    features: &Matrix,
    labels: &[u8],
    spec: &LearnerSpec,
    clip: f64,
) -> Result<ProbabilityModel> {
    check_rows(features, labels.len())?;
    if labels.is_empty() {
        return Err(Error::Data("no rows to fit a propensity model".into()));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if ones == 0 {
        return Ok(ProbabilityModel::constant(clip, clip));
    }
    if ones == labels.len() {
        return Ok(ProbabilityModel::constant(1.0 - clip, clip));
    }
    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    match spec.kind {
        LearnerKind::Glm | LearnerKind::QuantileLinear => {
            let (beta, flags) = glm::fit_logistic(features, &targets, spec.ridge, 100)?;
            Ok(ProbabilityModel {
                inner: ProbInner::Logistic(beta),
                clip,
                flags,
            })
        }
        LearnerKind::RandomForest => Ok(ProbabilityModel {
            inner: ProbInner::Forest(Forest::fit(
                features,
                &targets,
                &spec.forest_params(features.cols()),
            )),
            clip,
            flags: FitFlags::default(),
        }),
    }
}

/// Fit the localized conditional CDF `P(score < eta0 | features)`.
pub fn fit_conditional_cdf(
    features: &Matrix,
    scores: &[f64],
    eta0: f64,
    spec: &LearnerSpec,
    clip: f64,
) -> Result<ProbabilityModel> {
    if !eta0.is_finite() {
        return Err(Error::Numerical(format!(
            "localization point must be finite, got {eta0}"
        )));
    }
    let labels: Vec<u8> = scores.iter().map(|&s| u8::from(s < eta0)).collect();
    fit_propensity(features, &labels, spec, clip)
}

/// Smallest sample a quantile pair is fitted on; designs with many
/// covariates need `k + 2` rows.
pub const QUANTILE_MIN_ROWS: usize = 10;

/// Fit a pair of conditional quantiles at `lo_level < hi_level`.
pub fn fit_quantile_pair(
    features: &Matrix,
    targets: &[f64],
    lo_level: f64,
    hi_level: f64,
    spec: &LearnerSpec,
) -> Result<QuantilePairModel> {
    check_rows(features, targets.len())?;
    if !(0.0 < lo_level && lo_level < hi_level && hi_level < 1.0) {
        return Err(Error::Config(format!(
            "quantile levels ({lo_level}, {hi_level}) must satisfy 0 < lo < hi < 1"
        )));
    }
    let min_rows = QUANTILE_MIN_ROWS.max(features.cols() + 2);
    if targets.len() < min_rows {
        return Err(Error::InsufficientData(format!(
            "quantile fit needs at least {min_rows} rows, got {}",
            targets.len()
        )));
    }
    match spec.kind {
        LearnerKind::Glm | LearnerKind::QuantileLinear => {
            let (lo, f_lo) = quantile::fit_linear_quantile(features, targets, lo_level, spec)?;
            let (hi, f_hi) = quantile::fit_linear_quantile(features, targets, hi_level, spec)?;
            Ok(QuantilePairModel {
                inner: QuantInner::Linear { lo, hi },
                flags: FitFlags {
                    degenerate: false,
                    rank_deficient: f_lo.rank_deficient || f_hi.rank_deficient,
                    not_converged: f_lo.not_converged || f_hi.not_converged,
                },
            })
        }
        LearnerKind::RandomForest => Ok(QuantilePairModel {
            inner: QuantInner::Forest {
                forest: Forest::fit(features, targets, &spec.forest_params(features.cols())),
                lo_level,
                hi_level,
            },
            flags: FitFlags::default(),
        }),
    }
}

/// Fit a conditional mean.
pub fn fit_mean(features: &Matrix, targets: &[f64], spec: &LearnerSpec) -> Result<MeanModel> {
    check_rows(features, targets.len())?;
    if targets.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "mean fit needs at least 10 rows, got {}",
            targets.len()
        )));
    }
    match spec.kind {
        LearnerKind::Glm | LearnerKind::QuantileLinear => {
            let (beta, flags) = glm::fit_least_squares(features, targets, spec.ridge)?;
            Ok(MeanModel {
                inner: MeanInner::Linear(beta),
                flags,
            })
        }
        LearnerKind::RandomForest => Ok(MeanModel {
            inner: MeanInner::Forest(Forest::fit(
                features,
                targets,
                &spec.forest_params(features.cols()),
            )),
            flags: FitFlags::default(),
        }),
    }
}
