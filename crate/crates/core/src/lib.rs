//! Conformal prediction intervals for individual treatment effects in
//! randomized experiments with attrition.
//!
//! The main entry point is [`pipeline::cise`], a two-step procedure:
//!
//! 1. Within the observed (`R = 1`) group, build counterfactual intervals
//!    with conformalized quantile regression whose thresholds solve
//!    efficient-influence-function moment conditions, then turn them into
//!    ITE intervals.
//! 2. Calibrate an expansion of those ITE intervals to the attrited
//!    (`R = 0`) group with a second moment condition that corrects for the
//!    covariate shift between the two groups.
//!
//! The crate also ships the weighted-CQR nested baseline, an IPW estimator,
//! the synthetic designs used to evaluate all of them and a Monte Carlo
//! harness (see [`sim`]).

pub mod cli;
pub mod config;
pub mod conformal;
pub mod data;
pub mod eif;
pub mod error;
pub mod io;
pub mod learners;
pub mod linalg;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod stats;

pub use config::{make_splits, ConformalConfig, SplitPlan};
pub use data::{validate_dataset, ExperimentDataset, Matrix, PredictionInterval, ValidationReport};
pub use error::{Error, Result};
pub use learners::{LearnerKind, LearnerRoles, LearnerSpec};
