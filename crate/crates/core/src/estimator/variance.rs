use alloc::vec::Vec;

use num_traits::{One, Zero};

use super::point::{cell_outcomes, yhat};
use crate::design::Design;
use crate::kernel::ProbabilityKernel;
use crate::population::OutcomeData;
use crate::stats::sample_variance;

/// The finite-population quantities that enter the sampling variance of
/// `τ̂_[a]` and `τ̂`. Implemented by the unbiased estimators in [`Components`]
/// and by the true values of a full potential-outcome table.
pub trait VarianceInputs {
    /// `S²_[a](r)`
    fn s2(&self, a: usize, r: usize) -> Option<f64>;
    /// `S²_[a](r-r')`; estimators return zero (the term is dropped).
    fn s2_diff(&self, a: usize, r: usize, r2: usize) -> Option<f64>;
    /// `Ȳ²_[a](r)`
    fn mean_sq(&self, a: usize, r: usize) -> Option<f64>;
    /// Average of `Y_i(r) Y_j(r')` over ordered pairs `i ≠ j` with attribute `a`.
    fn pair_product(&self, a: usize, r: usize, r2: usize) -> Option<f64>;
    /// `Ȳ_[a](r) Ȳ_[a'](r')` for `a ≠ a'`.
    fn cross_product(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<f64>;
}

/// `coef · value`, skipping `value` when the coefficient is exactly zero.
fn term(kernel_zero: Option<bool>, coef: Option<f64>, value: impl FnOnce() -> Option<f64>) -> Option<f64> {
    if kernel_zero? {
        return Some(0.0);
    }
    Some(coef? * value()?)
}

/// The braced sum `b S²(r) + b S²(r') − S²(r−r') + c Ȳ²(r) + c Ȳ²(r') − 2c avgprod`,
/// i.e. `n_[a] Var(τ̂_[a])`.
fn bracket(k: &ProbabilityKernel, v: &impl VarianceInputs, a: usize, r: usize, r2: usize) -> Option<f64> {
    let first = k.b(a, r)? * v.s2(a, r)? + k.b(a, r2)? * v.s2(a, r2)? - v.s2_diff(a, r, r2)?;
    let rr = term(k.c_is_zero(a, a, r, r), k.c(a, a, r, r), || v.mean_sq(a, r))?;
    let rr2 = term(k.c_is_zero(a, a, r2, r2), k.c(a, a, r2, r2), || v.mean_sq(a, r2))?;
    let cross = term(k.c_is_zero(a, a, r, r2), k.c(a, a, r, r2), || v.pair_product(a, r, r2))?;
    Some(first + rr + rr2 - 2.0 * cross)
}

/// Sampling variance of `τ̂_[a](r, r')` evaluated at `v`.
pub fn subgroup_variance(k: &ProbabilityKernel, v: &impl VarianceInputs, a: usize, r: usize, r2: usize) -> Option<f64> {
    Some(bracket(k, v, a, r, r2)? / k.attr_counts()[a] as f64)
}

/// Sampling variance of `τ̂(r, r')` evaluated at `v`, including the
/// cross-attribute covariance terms.
pub fn overall_variance(k: &ProbabilityKernel, v: &impl VarianceInputs, r: usize, r2: usize) -> Option<f64> {
    let n = k.n() as f64;
    let w: Vec<f64> = k.attr_counts().iter().map(|&c| c as f64 / n).collect();
    let mut total = 0.0;
    for a in 0..w.len() {
        total += w[a] * bracket(k, v, a, r, r2)?;
        for a2 in 0..w.len() {
            if a2 == a {
                continue;
            }
            let mut cross = 0.0;
            for (x, y, sign) in [(r, r, 1.0), (r2, r2, 1.0), (r, r2, -1.0), (r2, r, -1.0)] {
                cross += sign * term(k.c_is_zero(a, a2, x, y), k.c(a, a2, x, y), || v.cross_product(a, a2, x, y))?;
            }
            total += libm::sqrt(w[a] * w[a2]) * cross;
        }
    }
    Some(total / n)
}

/// Unbiased estimators of the variance components from observed data.
///
/// A component is available when every probability it divides by is
/// positive and, for within-attribute pairs, `n_[a] ≥ 2`.
#[derive(Debug, Clone)]
pub struct Components<'k> {
    kernel: &'k ProbabilityKernel,
    yhat: Vec<Vec<Option<f64>>>,
    sum_sq: Vec<Vec<f64>>,
    /// Within-cell sample variances, used directly under complete randomization.
    cell_var: Option<Vec<Vec<Option<f64>>>>,
}

impl<'k> Components<'k> {
    pub fn new(data: &OutcomeData, kernel: &'k ProbabilityKernel) -> Self {
        let cells = cell_outcomes(data);
        let sum_sq = cells.iter().map(|row| row.iter().map(|c| c.iter().map(|y| y * y).sum()).collect()).collect();
        let cell_var = matches!(kernel.design(), Design::CompleteRandomization { .. })
            .then(|| cells.iter().map(|row| row.iter().map(|c| sample_variance(c)).collect()).collect());
        Components { kernel, yhat: yhat(data, kernel), sum_sq, cell_var }
    }

    pub fn kernel(&self) -> &ProbabilityKernel {
        self.kernel
    }

    pub fn yhat(&self) -> &[Vec<Option<f64>>] {
        &self.yhat
    }

    fn na(&self, a: usize) -> f64 {
        self.kernel.attr_counts()[a] as f64
    }
}

impl VarianceInputs for Components<'_> {
    /// Weighted second-moment estimator; under complete randomization this is
    /// the within-cell sample variance.
    fn s2(&self, a: usize, r: usize) -> Option<f64> {
        let k = self.kernel;
        let na = self.na(a);
        let (p, p2) = (k.pi(a, r), k.pi2(a, a, r, r));
        if na < 2.0 || p <= 0.0 || p2 <= 0.0 {
            return None;
        }
        if let Some(v) = &self.cell_var {
            return v[a][r];
        }
        let y = self.yhat[a][r]?;
        let c = k.c(a, a, r, r)?;
        let inner = (na + c) / (na * na * p) * self.sum_sq[a][r] - y * y;
        Some(na * p * p / ((na - 1.0) * p2) * inner)
    }

    fn s2_diff(&self, _a: usize, _r: usize, _r2: usize) -> Option<f64> {
        Some(0.0)
    }

    /// `[n Ŷ² − (b − 1) s²] / (n + c(r,r))`; may be negative in small samples.
    fn mean_sq(&self, a: usize, r: usize) -> Option<f64> {
        let k = self.kernel;
        let na = self.na(a);
        let y = self.yhat[a][r]?;
        let den = na + k.c(a, a, r, r)?;
        if den == 0.0 {
            return None;
        }
        let bm1 = k.b_exact(a, r)? - num_rational::BigRational::one();
        let correction = if bm1.is_zero() { 0.0 } else { crate::exact::to_f64(&bm1) * self.s2(a, r)? };
        Some((na * y * y - correction) / den)
    }

    fn pair_product(&self, a: usize, r: usize, r2: usize) -> Option<f64> {
        let k = self.kernel;
        let na = self.na(a);
        let p2 = k.pi2(a, a, r, r2);
        if na < 2.0 || p2 <= 0.0 {
            return None;
        }
        let (y, y2) = (self.yhat[a][r]?, self.yhat[a][r2]?);
        Some(na / (na - 1.0) * k.pi(a, r) * k.pi(a, r2) / p2 * y * y2)
    }

    fn cross_product(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<f64> {
        let k = self.kernel;
        let p2 = k.pi2(a, a2, r, r2);
        if p2 <= 0.0 {
            return None;
        }
        let (y, y2) = (self.yhat[a][r]?, self.yhat[a2][r2]?);
        Some(k.pi(a, r) * k.pi(a2, r2) / p2 * y * y2)
    }
}
