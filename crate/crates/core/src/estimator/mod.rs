//! Point estimates, variance estimates and intervals for peer effects.

mod joint;
mod point;
mod regression;
mod target;
mod variance;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use joint::{joint_inference, JointReport};
pub use point::{cell_outcomes, tau_all, tau_sub, yhat};
pub use regression::{regression_check, RegressionFit};
pub use target::{target_from_selection, target_subpop_estimate, TargetEstimate};
pub use variance::{overall_variance, subgroup_variance, Components, VarianceInputs};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::kernel::ProbabilityKernel;
use crate::population::OutcomeData;
use crate::stats::two_sided_z;

/// `estimate ± z_{1−α/2} √variance`.
pub fn wald_interval(estimate: f64, variance: f64, alpha: f64) -> Result<(f64, f64)> {
    if variance < 0.0 || variance.is_nan() {
        return Err(Error::NegativeVariance(variance));
    }
    let half = two_sided_z(alpha)? * libm::sqrt(variance);
    Ok((estimate - half, estimate + half))
}

/// Every unordered pair `r < r'` of treatment indices.
pub fn all_contrasts(num_treatments: usize) -> Vec<(usize, usize)> {
    (0..num_treatments).flat_map(|r| (r + 1..num_treatments).map(move |r2| (r, r2))).collect()
}

/// One estimated contrast, for a single attribute or pooled over attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastEstimate {
    /// `None` for the pooled contrast `τ(r, r')`.
    pub attr: Option<usize>,
    pub r: usize,
    pub r2: usize,
    pub estimate: Option<f64>,
    pub variance: Option<f64>,
    pub interval: Option<(f64, f64)>,
    /// Why a field is missing, if one is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub alpha: f64,
    pub design: Design,
    /// `Ŷ_[a](r)`, `None` where the cell has zero probability.
    pub yhat: Vec<Vec<Option<f64>>>,
    /// Observed `n_[a]r`.
    pub counts: Vec<Vec<u64>>,
    pub subgroup: Vec<ContrastEstimate>,
    pub overall: Vec<ContrastEstimate>,
    pub warnings: Vec<String>,
}

/// Estimates every requested contrast `(r, r')` for each attribute and pooled.
///
/// Variances are the conservative plug-in estimators: the unidentifiable
/// `S²(r−r')` terms are dropped and every other component is replaced by its
/// unbiased estimate. A negative plug-in variance is reported with a warning
/// and no interval.
pub fn estimate(data: &OutcomeData, kernel: &ProbabilityKernel, contrasts: &[(usize, usize)], alpha: f64) -> Result<EstimateReport> {
    two_sided_z(alpha)?;
    let nr = data.space().num_treatments();
    for &(r, r2) in contrasts {
        if r == r2 {
            return Err(Error::DegenerateContrast(r));
        }
        if r.max(r2) >= nr {
            return Err(Error::Invalid(format!("treatment index {} out of range", r.max(r2))));
        }
    }
    if let Design::CompleteRandomization { l } = kernel.design() {
        if data.composition() != *l {
            return Err(Error::Infeasible("observed composition differs from the design's composition vector".into()));
        }
    }
    let comp = Components::new(data, kernel);
    let pop = data.population();
    let weights: Vec<f64> = (0..pop.num_attrs()).map(|a| pop.weight(a)).collect();
    let mut warnings = Vec::new();
    let mut finish = |attr: Option<usize>, r: usize, r2: usize, estimate: Option<f64>, variance: Option<f64>| {
        let label = match attr {
            Some(a) => format!("attribute {} contrast ({}, {})", a + 1, r, r2),
            None => format!("pooled contrast ({}, {})", r, r2),
        };
        let (interval, note) = match (estimate, variance) {
            (None, _) => (None, Some(String::from("a cell in this contrast has zero assignment probability"))),
            (Some(_), None) => (None, Some(String::from("a variance component is not estimable from this design"))),
            (Some(_), Some(v)) if v < 0.0 => {
                warnings.push(format!("{label}: plug-in variance estimate {v} is negative; interval suppressed"));
                (None, Some(String::from("negative variance estimate")))
            }
            (Some(e), Some(v)) => (Some(wald_interval(e, v, alpha).expect("checked above")), None),
        };
        ContrastEstimate { attr, r, r2, estimate, variance, interval, note }
    };
    let mut subgroup = Vec::new();
    for a in 0..pop.num_attrs() {
        for &(r, r2) in contrasts {
            let e = tau_sub(comp.yhat(), a, r, r2);
            let v = e.and(subgroup_variance(kernel, &comp, a, r, r2));
            subgroup.push(finish(Some(a), r, r2, e, v));
        }
    }
    let mut overall = Vec::new();
    for &(r, r2) in contrasts {
        let e = tau_all(comp.yhat(), &weights, r, r2);
        let v = e.and(overall_variance(kernel, &comp, r, r2));
        overall.push(finish(None, r, r2, e, v));
    }
    Ok(EstimateReport {
        alpha,
        design: kernel.design().clone(),
        yhat: comp.yhat().to_vec(),
        counts: data.cell_counts(),
        subgroup,
        overall,
        warnings,
    })
}
