//! Synthetic experiments with known potential outcomes.

use serde::{Deserialize, Serialize};

use crate::data::{ExperimentDataset, Matrix, PredictionInterval};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, SplitMix64};
use crate::stats::{beta_2_4_cdf, logistic, normal_cdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    Dgp1,
    Dgp2,
    AppendixE,
}

impl DgpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DgpKind::Dgp1 => "dgp1",
            DgpKind::Dgp2 => "dgp2",
            DgpKind::AppendixE => "appendixE",
        }
    }

    pub fn covariates(&self) -> usize {
        match self {
            DgpKind::Dgp1 | DgpKind::Dgp2 => 10,
            DgpKind::AppendixE => 5,
        }
    }
}

impl std::str::FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dgp1" => Ok(DgpKind::Dgp1),
            "dgp2" => Ok(DgpKind::Dgp2),
            "appendixE" | "appendix_e" | "appendixe" => Ok(DgpKind::AppendixE),
            other => Err(Error::Config(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Missingness {
    Mar,
    /// Response with probability 0.8 regardless of covariates.
    Mcar,
}

impl std::str::FromStr for Missingness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mar" => Ok(Missingness::Mar),
            "mcar" => Ok(Missingness::Mcar),
            other => Err(Error::Config(format!("unknown missingness '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    /// Equicorrelation of the covariates; must be 0 for `AppendixE`.
    pub rho: f64,
    /// Only `AppendixE` reads this.
    pub missingness: Missingness,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(kind: DgpKind, n: usize) -> Self {
        Self {
            kind,
            n,
            rho: 0.0,
            missingness: Missingness::Mar,
            seed: 0,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_missingness(mut self, m: Missingness) -> Self {
        self.missingness = m;
        self
    }

    pub fn k(&self) -> usize {
        self.kind.covariates()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!(
                "rho {} must lie in [0, 1)",
                self.rho
            )));
        }
        if self.kind == DgpKind::AppendixE && self.rho != 0.0 {
            return Err(Error::Config(
                "appendixE has independent covariates; rho must be 0".into(),
            ));
        }
        Ok(())
    }
}

/// Quantities hidden from every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    /// `y1 - y0`.
    pub ite: Vec<f64>,
    /// `E[Y(1) - Y(0) | X]`.
    pub cate: Vec<f64>,
    pub e_d: Vec<f64>,
    /// Response probability at the realized treatment.
    pub e_r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDraw {
    pub data: ExperimentDataset,
    pub truth: Truth,
}

/// Population functions of the first design.
pub mod dgp1 {
    use super::*;

    pub fn f(x: f64) -> f64 {
        2.0 / (1.0 + (-12.0 * (x - 0.5)).exp())
    }

    pub fn mu1(x: &[f64]) -> f64 {
        f(x[0]) * f(x[1])
    }

    pub fn mu0(_x: &[f64]) -> f64 {
        0.0
    }

    pub fn e_d(x: &[f64]) -> f64 {
        0.25 * (1.0 + beta_2_4_cdf(x[0]))
    }

    pub fn e_r(x: &[f64], d: u8) -> f64 {
        logistic(-0.25 + 0.5 * f64::from(d) + 0.2 * x[0] - 0.3 * x[1])
    }
}

/// Population functions of the second design.
pub mod dgp2 {
    use super::*;

    fn softplus_inv(x: f64) -> f64 {
        1.0 / (1.0 + x.exp()).ln()
    }

    pub fn mu1(x: &[f64]) -> f64 {
        x[0] * x[0] + 0.2 * x[1] + softplus_inv(x[2]) + 0.8 * x[3].exp()
    }

    pub fn mu0(x: &[f64]) -> f64 {
        softplus_inv(x[2])
    }

    pub fn e_d(x: &[f64]) -> f64 {
        logistic(-0.5 * x[0] - 0.3 * x[1] + 0.2 * x[2])
    }

    pub fn e_r(x: &[f64], d: u8) -> f64 {
        logistic(-1.0 + 0.3 * f64::from(d) + 0.5 * x[0] - 0.4 * x[1])
    }
}

/// Population functions of the independent-covariate design.
pub mod appendix_e {
    use super::*;

    pub fn mu1(x: &[f64]) -> f64 {
        x.iter().sum()
    }

    pub fn mu0(_x: &[f64]) -> f64 {
        0.0
    }

    pub fn e_d(x: &[f64]) -> f64 {
        normal_cdf(x[0])
    }

    pub fn e_r(x: &[f64], d: u8, missingness: Missingness) -> f64 {
        match missingness {
            Missingness::Mcar => 0.8,
            Missingness::Mar => logistic(-0.2 + 0.5 * f64::from(d) + 0.2 * x[0] - 0.3 * x[1]),
        }
    }
}

/// Standard normal covariates with pairwise correlation `rho`, from a
/// shared factor: `x_j = sqrt(rho) z_0 + sqrt(1 - rho) z_j`.
fn covariates(rng: &mut SplitMix64, k: usize, rho: f64, out: &mut Vec<f64>) {
    let shared = if rho > 0.0 { rng.normal() } else { 0.0 };
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    for _ in 0..k {
        out.push(a * shared + b * rng.normal());
    }
}

/// Draw a dataset from `spec`. Each row consumes, in order: covariates,
/// two outcome noises, a treatment uniform and a response uniform.
pub fn generate(spec: &DgpSpec) -> Result<SimulatedDraw> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k());
    let mut rng = SplitMix64::new(derive_seed(spec.seed, stream::DGP));
    let mut xs = Vec::with_capacity(n * k);
    let mut t = Truth {
        y1: Vec::with_capacity(n),
        y0: Vec::with_capacity(n),
        ite: Vec::with_capacity(n),
        cate: Vec::with_capacity(n),
        e_d: Vec::with_capacity(n),
        e_r: Vec::with_capacity(n),
    };
    let (mut d, mut r, mut y) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        covariates(&mut rng, k, spec.rho, &mut xs);
        let x = &xs[i * k..(i + 1) * k];
        let (m1, m0, p) = match spec.kind {
            DgpKind::Dgp1 => (dgp1::mu1(x), dgp1::mu0(x), dgp1::e_d(x)),
            DgpKind::Dgp2 => (dgp2::mu1(x), dgp2::mu0(x), dgp2::e_d(x)),
            DgpKind::AppendixE => (appendix_e::mu1(x), appendix_e::mu0(x), appendix_e::e_d(x)),
        };
        let y1 = m1 + rng.normal();
        let y0 = m0 + rng.normal();
        let di = u8::from(rng.uniform() < p);
        let q = match spec.kind {
            DgpKind::Dgp1 => dgp1::e_r(x, di),
            DgpKind::Dgp2 => dgp2::e_r(x, di),
            DgpKind::AppendixE => appendix_e::e_r(x, di, spec.missingness),
        };
        let ri = u8::from(rng.uniform() < q);
        let obs = if di == 1 { y1 } else { y0 };
        t.y1.push(y1);
        t.y0.push(y0);
        t.ite.push(y1 - y0);
        t.cate.push(m1 - m0);
        t.e_d.push(p);
        t.e_r.push(q);
        d.push(di);
        r.push(ri);
        y.push((ri == 1).then_some(obs));
    }
    let data = ExperimentDataset::new(Matrix::new(n, k, xs)?, d, r, y)?;
    Ok(SimulatedDraw { data, truth: t })
}

pub fn gen_dgp1(spec: &DgpSpec) -> Result<SimulatedDraw> {
    check_kind(spec, DgpKind::Dgp1)?;
    generate(spec)
}

pub fn gen_dgp2(spec: &DgpSpec) -> Result<SimulatedDraw> {
    check_kind(spec, DgpKind::Dgp2)?;
    generate(spec)
}

pub fn gen_dgp_appendix_e(spec: &DgpSpec) -> Result<SimulatedDraw> {
    check_kind(spec, DgpKind::AppendixE)?;
    generate(spec)
}

fn check_kind(spec: &DgpSpec, kind: DgpKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Config(format!(
            "expected a {} spec, got {}",
            kind.as_str(),
            spec.kind.as_str()
        )));
    }
    Ok(())
}

/// Length of the oracle ITE interval under unit-variance Gaussian noise in
/// both arms: `2 z_{1 - level/2} sqrt(2)`.
pub fn oracle_length(level: f64) -> f64 {
    2.0 * normal_quantile(1.0 - level / 2.0) * std::f64::consts::SQRT_2
}

/// Per-row oracle intervals `cate +- z sqrt(2)` and their common length.
pub fn oracle_interval(draw: &SimulatedDraw, level: f64) -> (Vec<PredictionInterval>, f64) {
    let len = oracle_length(level);
    let half = len / 2.0;
    let ivs = draw
        .truth
        .cate
        .iter()
        .map(|&c| PredictionInterval::new(c - half, c + half))
        .collect();
    (ivs, len)
}
