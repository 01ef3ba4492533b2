//! Synthetic designs, oracle intervals and the Monte Carlo harness.

pub mod dgp;
mod mc;
mod metrics;

pub use dgp::{
    gen_dgp1, gen_dgp2, gen_dgp_appendix_e, generate, oracle_interval, oracle_length, DgpKind,
    DgpSpec, Missingness, SimulatedDraw, Truth,
};
pub use mc::{run_mc, McReport, McSettings, RepResult, Summary};
pub use metrics::{compute_metrics, IntervalMetrics};
