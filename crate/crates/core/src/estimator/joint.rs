use alloc::vec::Vec;

use super::point::cell_outcomes;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::population::OutcomeData;
use crate::stats::{mean, sample_variance};

/// Centered cell means `θ̂_[a] = Γ Ŷ_[a]` and their estimated covariance
/// `Γ diag(s²_[a](r)/n_[a]r) Γ`, one block per attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct JointReport {
    pub gamma: Matrix,
    pub yhat: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub cov: Vec<Matrix>,
}

impl JointReport {
    /// Builds the report from cell means and per-cell variances of those means
    /// (`s²/n` under complete randomization).
    pub fn from_parts(yhat: Vec<Vec<f64>>, mean_variances: &[Vec<f64>]) -> Self {
        let p = yhat.first().map_or(0, Vec::len);
        let gamma = Matrix::centering(p);
        let theta = yhat.iter().map(|y| gamma.mul_vec(y)).collect();
        let cov = mean_variances.iter().map(|v| gamma.mul(&Matrix::diag(v)).mul(&gamma)).collect();
        JointReport { gamma, yhat, theta, cov }
    }
}

/// Joint inference over all treatments under complete randomization (or
/// conditional on the observed composition). Every cell needs at least two
/// observations.
pub fn joint_inference(data: &OutcomeData) -> Result<JointReport> {
    let cells = cell_outcomes(data);
    let mut yhat = Vec::with_capacity(cells.len());
    let mut vars = Vec::with_capacity(cells.len());
    for (a, row) in cells.iter().enumerate() {
        let mut y = Vec::with_capacity(row.len());
        let mut v = Vec::with_capacity(row.len());
        for (r, c) in row.iter().enumerate() {
            let s2 = sample_variance(c).ok_or(Error::UndefinedCell { attr: a, treatment: r, reason: "fewer than two observations" })?;
            y.push(mean(c));
            v.push(s2 / c.len() as f64);
        }
        yhat.push(y);
        vars.push(v);
    }
    Ok(JointReport::from_parts(yhat, &vars))
}
