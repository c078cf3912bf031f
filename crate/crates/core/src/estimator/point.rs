use alloc::vec;
use alloc::vec::Vec;

use crate::design::Design;
use crate::kernel::ProbabilityKernel;
use crate::population::OutcomeData;
use crate::stats::mean;

/// Observed outcomes grouped by cell: `cells[a][r]`.
pub fn cell_outcomes(data: &OutcomeData) -> Vec<Vec<Vec<f64>>> {
    let nr = data.space().num_treatments();
    let mut cells = vec![vec![Vec::new(); nr]; data.population().num_attrs()];
    for (u, (&r, &y)) in data.treatments().iter().zip(data.outcomes()).enumerate() {
        cells[data.population().attr(u)][r].push(y);
    }
    cells
}

/// Horvitz–Thompson estimates `Ŷ_[a](r) = Σ I(A_i=a, R_i=r) Y_i / (n_[a] π_[a](r))`.
///
/// Cells with zero assignment probability are `None`. Under complete
/// randomization this is the cell sample mean, computed as such.
pub fn yhat(data: &OutcomeData, kernel: &ProbabilityKernel) -> Vec<Vec<Option<f64>>> {
    let pop = data.population();
    let nr = data.space().num_treatments();
    let cells = cell_outcomes(data);
    if matches!(kernel.design(), Design::CompleteRandomization { .. }) {
        return cells.iter().map(|row| row.iter().map(|c| (!c.is_empty()).then(|| mean(c))).collect()).collect();
    }
    (0..pop.num_attrs())
        .map(|a| {
            let na = pop.attr_counts()[a] as f64;
            (0..nr)
                .map(|r| {
                    let p = kernel.pi(a, r);
                    (p > 0.0).then(|| cells[a][r].iter().sum::<f64>() / (na * p))
                })
                .collect()
        })
        .collect()
}

/// `τ̂_[a](r, r')`
pub fn tau_sub(yhat: &[Vec<Option<f64>>], a: usize, r: usize, r2: usize) -> Option<f64> {
    Some(yhat[a][r]? - yhat[a][r2]?)
}

/// `τ̂(r, r') = Σ_a w_[a] τ̂_[a](r, r')`
pub fn tau_all(yhat: &[Vec<Option<f64>>], weights: &[f64], r: usize, r2: usize) -> Option<f64> {
    let mut total = 0.0;
    for (a, w) in weights.iter().enumerate() {
        total += w * tau_sub(yhat, a, r, r2)?;
    }
    Some(total)
}
