//! Experiment data, interval type and dataset validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "matrix buffer has {} values, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Data(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            rows: rows.len(),
            cols,
        })
    }

    /// Single-column matrix.
    pub fn column(values: &[f64]) -> Self {
        Self {
            data: values.to_vec(),
            rows: values.len(),
            cols: 1,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }

    /// Copy with one extra trailing column.
    pub fn with_column(&self, extra: &[f64]) -> Self {
        assert_eq!(extra.len(), self.rows, "column length mismatch");
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for (i, v) in extra.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(*v);
        }
        Self {
            data,
            rows: self.rows,
            cols,
        }
    }

    /// Copy with a constant trailing column.
    pub fn with_constant_column(&self, value: f64) -> Self {
        self.with_column(&vec![value; self.rows])
    }
}

/// Closed interval `[lo, hi]`; either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    #[serde(with = "crate::io::json_f64")]
    pub lo: f64,
    #[serde(with = "crate::io::json_f64")]
    pub hi: f64,
}

impl PredictionInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "interval with lo > hi: [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn unbounded() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// `self ⊆ outer`.
    #[inline]
    pub fn is_subset_of(&self, outer: &PredictionInterval) -> bool {
        outer.lo <= self.lo && self.hi <= outer.hi
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Widen by `eta` on both sides around a band `[lo, hi]`.
    #[inline]
    pub fn expand(lo: f64, hi: f64, eta: f64) -> Self {
        if eta == f64::INFINITY {
            return Self::unbounded();
        }
        Self::new(lo - eta, hi + eta)
    }
}

/// A randomized experiment with attrition.
///
/// `y[i]` is `Some` exactly when `r[i] == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    pub x: Matrix,
    pub d: Vec<u8>,
    pub r: Vec<u8>,
    pub y: Vec<Option<f64>>,
}

impl ExperimentDataset {
    /// Build and validate. Structural violations are hard errors.
    pub fn new(x: Matrix, d: Vec<u8>, r: Vec<u8>, y: Vec<Option<f64>>) -> Result<Self> {
        let ds = Self { x, d, r, y };
        validate_dataset(&ds)?;
        Ok(ds)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.d.len()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.x.cols()
    }

    pub fn observed(&self, i: usize) -> bool {
        self.r[i] == 1
    }

    /// Outcome for an observed row. Panics on an attrited row.
    pub fn outcome(&self, i: usize) -> f64 {
        self.y[i].expect("outcome requested on attrited row")
    }

    pub fn attrition_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.r[i] == 0).collect()
    }

    pub fn observed_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.r[i] == 1).collect()
    }

    /// Covariates with the treatment indicator appended.
    pub fn x_with_treatment(&self) -> Matrix {
        let d: Vec<f64> = self.d.iter().map(|&v| f64::from(v)).collect();
        self.x.with_column(&d)
    }
}

/// Counts per (D, R) cell, in the order (0,0), (0,1), (1,0), (1,1).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub k: usize,
    pub cell_counts: [usize; 4],
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn count(&self, d: u8, r: u8) -> usize {
        self.cell_counts[(usize::from(d) << 1) | usize::from(r)]
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn both_arms_observed(&self) -> bool {
        self.count(0, 1) > 0 && self.count(1, 1) > 0
    }
}

pub fn validate_dataset(ds: &ExperimentDataset) -> Result<ValidationReport> {
    let n = ds.d.len();
    if n == 0 {
        return Err(Error::Data("dataset has no rows".into()));
    }
    if ds.x.cols() == 0 {
        return Err(Error::Data("dataset has no covariates".into()));
    }
    if ds.r.len() != n || ds.y.len() != n || ds.x.rows() != n {
        return Err(Error::Data(format!(
            "column lengths differ: x={} d={} r={} y={}",
            ds.x.rows(),
            n,
            ds.r.len(),
            ds.y.len()
        )));
    }
    if let Some(pos) = ds.x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite covariate at row {} column {}",
            pos / ds.x.cols(),
            pos % ds.x.cols()
        )));
    }

    let mut report = ValidationReport {
        n,
        k: ds.x.cols(),
        ..Default::default()
    };
    for i in 0..n {
        let (d, r) = (ds.d[i], ds.r[i]);
        if d > 1 {
            return Err(Error::Data(format!("row {i}: treatment {d} is not binary")));
        }
        if r > 1 {
            return Err(Error::Data(format!("row {i}: response {r} is not binary")));
        }
        match (r, ds.y[i]) {
            (0, Some(_)) => {
                return Err(Error::Data(format!(
                    "row {i}: outcome present on an attrited row"
                )))
            }
            (1, None) => {
                return Err(Error::Data(format!(
                    "row {i}: outcome missing on an observed row"
                )))
            }
            (1, Some(y)) if !y.is_finite() => {
                return Err(Error::Data(format!("row {i}: non-finite outcome")))
            }
            _ => {}
        }
        report.cell_counts[(usize::from(d) << 1) | usize::from(r)] += 1;
    }

    for (d, r) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)] {
        if report.count(d, r) == 0 {
            report.warnings.push(format!("no D={d},R={r} cell"));
        }
    }
    Ok(report)
}
