use alloc::vec::Vec;

use super::point::cell_outcomes;
use crate::error::{Error, Result};
use crate::population::OutcomeData;
use crate::stats::mean;

/// Least-squares fit of the fully interacted model
/// `Y = μ + α_[a] + β_r + λ_[a]r + ε` under sum-to-zero constraints, with
/// Huber–White standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub mu: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    fitted: Vec<Vec<f64>>,
    /// Sum of squared residuals per cell.
    rss: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
}

impl RegressionFit {
    /// Fitted cell mean `μ̂_[a]r`. The model is saturated, so this is the
    /// observed cell mean; `μ̂ + α̂_[a] + β̂_r + λ̂_[a]r` reproduces it up to rounding.
    pub fn cell_mean(&self, a: usize, r: usize) -> f64 {
        self.fitted[a][r]
    }

    /// `μ̂_[a]r − μ̂_[a]r'`
    pub fn contrast(&self, a: usize, r: usize, r2: usize) -> f64 {
        self.cell_mean(a, r) - self.cell_mean(a, r2)
    }

    /// Huber–White (HC0) variance of [`contrast`](Self::contrast): the
    /// sandwich for a saturated cell-means design is `Σ e_i² / n_[a]r²` per cell.
    pub fn robust_variance(&self, a: usize, r: usize, r2: usize) -> f64 {
        let cell = |x: usize| self.rss[a][x] / (self.counts[a][x] * self.counts[a][x]) as f64;
        cell(r) + cell(r2)
    }
}

pub fn regression_check(data: &OutcomeData) -> Result<RegressionFit> {
    let cells = cell_outcomes(data);
    let h = cells.len();
    let nr = data.space().num_treatments();
    let mut means = Vec::with_capacity(h);
    for (a, row) in cells.iter().enumerate() {
        if let Some(r) = row.iter().position(Vec::is_empty) {
            return Err(Error::UndefinedCell { attr: a, treatment: r, reason: "empty cell" });
        }
        means.push(row.iter().map(|c| mean(c)).collect::<Vec<f64>>());
    }
    let mu = means.iter().flatten().sum::<f64>() / (h * nr) as f64;
    let alpha: Vec<f64> = means.iter().map(|row| row.iter().sum::<f64>() / nr as f64 - mu).collect();
    let beta: Vec<f64> = (0..nr).map(|r| means.iter().map(|row| row[r]).sum::<f64>() / h as f64 - mu).collect();
    let lambda = (0..h).map(|a| (0..nr).map(|r| means[a][r] - (mu + alpha[a] + beta[r])).collect()).collect();
    let mut fit = RegressionFit { mu, alpha, beta, lambda, fitted: means, rss: Vec::new(), counts: Vec::new() };
    for (a, row) in cells.iter().enumerate() {
        let mut rss = Vec::with_capacity(nr);
        for (r, c) in row.iter().enumerate() {
            let fitted = fit.cell_mean(a, r);
            rss.push(c.iter().map(|y| (y - fitted) * (y - fitted)).sum());
        }
        fit.rss.push(rss);
        fit.counts.push(row.iter().map(Vec::len).collect());
    }
    Ok(fit)
}
