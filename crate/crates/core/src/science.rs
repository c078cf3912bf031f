//! Full potential-outcome tables and the estimands and sampling variances
//! they imply. These need every unit's outcome under every treatment, so they
//! are for simulation and verification, not for analysing observed data.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimator::{overall_variance, subgroup_variance, VarianceInputs};
use crate::kernel::ProbabilityKernel;
use crate::linalg::Matrix;
use crate::population::{Assignment, Population};

/// `Y_i(r)` for every unit `i` and treatment `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    pop: Population,
    y: Vec<Vec<f64>>,
}

impl PotentialTable {
    /// `y[i][r]` in canonical treatment order.
    pub fn new(pop: Population, y: Vec<Vec<f64>>) -> Result<Self> {
        let nr = pop.space().num_treatments();
        if y.len() != pop.n() || y.iter().any(|row| row.len() != nr) {
            return Err(Error::Invalid(format!("potential table must be {} x {}", pop.n(), nr)));
        }
        Ok(PotentialTable { pop, y })
    }

    pub fn from_fn(pop: Population, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let nr = pop.space().num_treatments();
        let y = (0..pop.n()).map(|i| (0..nr).map(|r| f(i, r)).collect()).collect();
        PotentialTable { pop, y }
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn outcome(&self, unit: usize, r: usize) -> f64 {
        self.y[unit][r]
    }

    /// Observed outcomes under `assignment`.
    pub fn observe(&self, assignment: &Assignment) -> Vec<f64> {
        let t = assignment.treatments(&self.pop, &self.pop.space());
        t.iter().enumerate().map(|(i, &r)| self.y[i][r]).collect()
    }

    fn units(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.pop.n()).filter(move |&i| self.pop.attr(i) == a)
    }

    fn na(&self, a: usize) -> f64 {
        self.pop.attr_counts()[a] as f64
    }

    /// `Ȳ_[a](r)`
    pub fn mean(&self, a: usize, r: usize) -> f64 {
        self.units(a).map(|i| self.y[i][r]).sum::<f64>() / self.na(a)
    }

    /// `Ȳ(r)`
    pub fn overall_mean(&self, r: usize) -> f64 {
        self.y.iter().map(|row| row[r]).sum::<f64>() / self.pop.n() as f64
    }

    /// `τ_[a](r, r')`
    pub fn tau_sub(&self, a: usize, r: usize, r2: usize) -> f64 {
        self.mean(a, r) - self.mean(a, r2)
    }

    /// `τ(r, r')`
    pub fn tau(&self, r: usize, r2: usize) -> f64 {
        self.overall_mean(r) - self.overall_mean(r2)
    }

    fn var_of(&self, a: usize, f: impl Fn(usize) -> f64) -> Option<f64> {
        let na = self.na(a);
        if na < 2.0 {
            return None;
        }
        let m = self.units(a).map(&f).sum::<f64>() / na;
        Some(self.units(a).map(|i| (f(i) - m) * (f(i) - m)).sum::<f64>() / (na - 1.0))
    }

    /// `θ_[a](𝓡)`: subgroup means centered across treatments.
    pub fn theta(&self, a: usize) -> Vec<f64> {
        let nr = self.pop.space().num_treatments();
        Matrix::centering(nr).mul_vec(&(0..nr).map(|r| self.mean(a, r)).collect::<Vec<_>>())
    }

    /// Covariance of `θ̂_[a](𝓡)` under complete randomization with cell sizes `n_[a]r`:
    /// `Γ diag(S²/n_[a]r) Γ − Σ_i (θ_i − θ_[a])(θ_i − θ_[a])ᵀ / (n_[a](n_[a]−1))`.
    pub fn joint_covariance(&self, a: usize, cell_counts: &[u64]) -> Option<Matrix> {
        let nr = self.pop.space().num_treatments();
        let gamma = Matrix::centering(nr);
        let mut d = Vec::with_capacity(nr);
        for (r, &n) in cell_counts.iter().enumerate() {
            if n == 0 {
                return None;
            }
            d.push(self.s2(a, r)? / n as f64);
        }
        let mut cov = gamma.mul(&Matrix::diag(&d)).mul(&gamma);
        let center = self.theta(a);
        let na = self.na(a);
        for i in self.units(a) {
            let ti = gamma.mul_vec(&self.y[i]);
            for p in 0..nr {
                for q in 0..nr {
                    cov[(p, q)] -= (ti[p] - center[p]) * (ti[q] - center[q]) / (na * (na - 1.0));
                }
            }
        }
        Some(cov)
    }
}

impl VarianceInputs for PotentialTable {
    fn s2(&self, a: usize, r: usize) -> Option<f64> {
        self.var_of(a, |i| self.y[i][r])
    }

    fn s2_diff(&self, a: usize, r: usize, r2: usize) -> Option<f64> {
        self.var_of(a, |i| self.y[i][r] - self.y[i][r2])
    }

    fn mean_sq(&self, a: usize, r: usize) -> Option<f64> {
        let m = self.mean(a, r);
        Some(m * m)
    }

    fn pair_product(&self, a: usize, r: usize, r2: usize) -> Option<f64> {
        let na = self.na(a);
        if na < 2.0 {
            return None;
        }
        // Σ_{i≠j} x_i y_j = (Σ x)(Σ y) − Σ x_i y_i
        let sx: f64 = self.units(a).map(|i| self.y[i][r]).sum();
        let sy: f64 = self.units(a).map(|i| self.y[i][r2]).sum();
        let sxy: f64 = self.units(a).map(|i| self.y[i][r] * self.y[i][r2]).sum();
        Some((sx * sy - sxy) / (na * (na - 1.0)))
    }

    fn cross_product(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<f64> {
        Some(self.mean(a, r) * self.mean(a2, r2))
    }
}

/// True sampling variances of `τ̂_[a](r, r')` (one per attribute) and of `τ̂(r, r')`.
pub fn true_variance(table: &PotentialTable, kernel: &ProbabilityKernel, r: usize, r2: usize) -> (Vec<Option<f64>>, Option<f64>) {
    let h = table.pop.num_attrs();
    let sub = (0..h).map(|a| subgroup_variance(kernel, table, a, r, r2)).collect();
    (sub, overall_variance(kernel, table, r, r2))
}
