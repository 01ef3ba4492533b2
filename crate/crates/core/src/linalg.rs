//! Weighted ridge least squares on small dense designs.

/// Cholesky solve of `a x = b` for a symmetric `p x p` matrix stored
/// row-major. Returns `None` when `a` is not numerically positive definite.
pub fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= 1e-12 * a[i * p + i].abs().max(1.0) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

/// Accumulates `X'WX` and `X'Wz` for a design with a leading intercept.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    p: usize,
    xtx: Vec<f64>,
    xtz: Vec<f64>,
}

impl NormalEquations {
    /// `k` covariates plus an intercept.
    pub fn new(k: usize) -> Self {
        let p = k + 1;
        Self {
            p,
            xtx: vec![0.0; p * p],
            xtz: vec![0.0; p],
        }
    }

    #[inline]
    pub fn add(&mut self, row: &[f64], weight: f64, target: f64) {
        let p = self.p;
        let at = |j: usize| if j == 0 { 1.0 } else { row[j - 1] };
        for i in 0..p {
            let wi = weight * at(i);
            self.xtz[i] += wi * target;
            for j in 0..=i {
                self.xtx[i * p + j] += wi * at(j);
            }
        }
    }

    /// Solve with ridge `lambda` on the slopes. If the system is singular,
    /// retries with escalating ridge; the returned flag reports that.
    pub fn solve(mut self, lambda: f64) -> Option<(Vec<f64>, bool)> {
        let p = self.p;
        for i in 0..p {
            for j in 0..i {
                self.xtx[j * p + i] = self.xtx[i * p + j];
            }
        }
        let scale = (1..p)
            .map(|i| self.xtx[i * p + i])
            .fold(self.xtx[0], f64::max)
            .max(1.0);
        let mut ridge = lambda;
        for attempt in 0..8 {
            let mut a = self.xtx.clone();
            for i in 1..p {
                a[i * p + i] += ridge;
            }
            if let Some(beta) = cholesky_solve(&a, &self.xtz, p) {
                if beta.iter().all(|b| b.is_finite()) {
                    return Some((beta, attempt > 0));
                }
            }
            ridge = if ridge <= 0.0 {
                1e-8 * scale
            } else {
                ridge * 100.0
            };
        }
        None
    }
}

#[inline]
pub fn linear_predict(beta: &[f64], row: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
}
