//! Soft assignment targets over a set of centers: softmax responsibilities
//! and balanced entropic-OT (Sinkhorn) assignments.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::mat::{dot, log_sum_exp, normalize_rows, softmax_in_place, Mat};

/// Row-stochastic `n x K` matrix of soft assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMatrix(Mat);

impl TargetMatrix {
    /// Checks entries lie in `[0, 1]` and rows sum to one within `1e-9`.
    pub fn new(m: Mat) -> Result<Self> {
        for (i, row) in m.iter_rows().enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(config_err(format!("target row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(config_err(format!("target row {i} sums to {s}")));
            }
        }
        Ok(Self(m))
    }

    /// Uniform `1/K` targets.
    pub fn uniform(rows: usize, k: usize) -> Self {
        Self(Mat::from_vec(rows, k, vec![1.0 / k as f64; rows * k]))
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    /// Mean Shannon entropy of the rows (nats).
    pub fn mean_entropy(&self) -> f64 {
        if self.0.rows() == 0 {
            return 0.0;
        }
        let total: f64 = self
            .0
            .iter_rows()
            .map(|r| -r.iter().filter(|&&t| t > 0.0).map(|t| t * t.ln()).sum::<f64>())
            .sum();
        total / self.0.rows() as f64
    }
}

/// Cosine similarities between every feature and every center (both normalized here).
pub(crate) fn cosine_matrix(features: &Mat, centers: &Mat) -> Result<Mat> {
    if features.is_empty() {
        return Err(Error::EmptyFeatureSet);
    }
    if centers.is_empty() || centers.cols() != features.cols() {
        return Err(config_err("centers must be non-empty and match the feature dimension"));
    }
    let f = normalize_rows(features).unit;
    let c = normalize_rows(centers);
    if !c.degenerate.is_empty() {
        return Err(config_err("a center is the zero vector"));
    }
    let mut s = Mat::zeros(f.rows(), c.unit.rows());
    for i in 0..f.rows() {
        for k in 0..c.unit.rows() {
            s.row_mut(i)[k] = dot(f.row(i), c.unit.row(k));
        }
    }
    Ok(s)
}

/// `T[i, k] = softmax_k(<f_i, c_k> / temperature)`.
pub fn softmax_responsibilities(features: &Mat, centers: &Mat, temperature: f64) -> Result<TargetMatrix> {
    if !(temperature > 0.0) {
        return Err(config_err("temperature must be positive"));
    }
    let mut s = cosine_matrix(features, centers)?;
    for i in 0..s.rows() {
        let row = s.row_mut(i);
        row.iter_mut().for_each(|x| *x /= temperature);
        softmax_in_place(row);
    }
    Ok(TargetMatrix(s))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub iters: usize,
    /// Largest allowed deviation of a row sum from 1.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornOutcome {
    /// Plan rows rescaled to sum to one.
    pub targets: TargetMatrix,
    /// Transport plan before the row renormalization.
    pub plan: Mat,
    pub iterations: usize,
    /// Max absolute deviation of the plan's row sums from 1 (column sums are exact).
    pub residual: f64,
    pub converged: bool,
}

/// Balanced entropic transport from `n` features (mass 1 each) to `K`
/// centers (mass `n / K` each) on the cost `1 - cos`. Runs in the log
/// domain; stops once the row residual is at most `tol`. Non-convergence
/// is reported in the outcome, not as an error.
pub fn sinkhorn_targets(features: &Mat, centers: &Mat, config: &SinkhornConfig) -> Result<SinkhornOutcome> {
    if !(config.epsilon > 0.0) || config.iters == 0 {
        return Err(config_err("sinkhorn needs epsilon > 0 and iters >= 1"));
    }
    let sim = cosine_matrix(features, centers)?;
    let (n, k) = (sim.rows(), sim.cols());
    if n < k {
        return Err(config_err(format!("sinkhorn needs at least K = {k} features, got {n}")));
    }
    let mut log_kernel = sim;
    log_kernel.as_mut_slice().iter_mut().for_each(|s| *s = -(1.0 - *s) / config.epsilon);
    let log_col_mass = (n as f64 / k as f64).ln();

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; k];
    let mut buf_k = vec![0.0; k];
    let mut buf_n = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < config.iters {
        iterations += 1;
        for i in 0..n {
            let row = log_kernel.row(i);
            for j in 0..k {
                buf_k[j] = row[j] + g[j];
            }
            f[i] = -log_sum_exp(&buf_k);
        }
        for j in 0..k {
            for i in 0..n {
                buf_n[i] = log_kernel.row(i)[j] + f[i];
            }
            g[j] = log_col_mass - log_sum_exp(&buf_n);
        }
        residual = (0..n)
            .map(|i| {
                let row = log_kernel.row(i);
                let s: f64 = (0..k).map(|j| (row[j] + f[i] + g[j]).exp()).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        if residual <= config.tol {
            break;
        }
    }

    let mut plan = Mat::zeros(n, k);
    let mut targets = Mat::zeros(n, k);
    for i in 0..n {
        let row = log_kernel.row(i);
        let p = plan.row_mut(i);
        for j in 0..k {
            p[j] = (row[j] + f[i] + g[j]).exp();
        }
        let s: f64 = p.iter().sum();
        let t = targets.row_mut(i);
        for j in 0..k {
            t[j] = plan.row(i)[j] / s;
        }
    }
    Ok(SinkhornOutcome {
        targets: TargetMatrix(targets),
        plan,
        iterations,
        residual,
        converged: residual <= config.tol,
    })
}
