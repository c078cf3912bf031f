use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;

use super::{wald_interval, ContrastEstimate};
use crate::error::{Error, Result};
use crate::population::OutcomeData;
use crate::stats::{mean, sample_variance};

/// Difference-in-means inference for a target subpopulation made of one
/// attribute-`a` unit from each group that contains attribute `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub attr: usize,
    /// Selected unit per eligible group, in group order.
    pub selected: Vec<usize>,
    /// Number of selected units receiving each treatment.
    pub counts: Vec<u64>,
    pub means: Vec<Option<f64>>,
    pub contrasts: Vec<ContrastEstimate>,
}

/// Draws the subpopulation at random and estimates each contrast.
pub fn target_subpop_estimate<R: RngCore + ?Sized>(
    data: &OutcomeData,
    a: usize,
    contrasts: &[(usize, usize)],
    alpha: f64,
    rng: &mut R,
) -> Result<TargetEstimate> {
    let pop = data.population();
    let mut selected = Vec::new();
    for group in data.assignment().groups() {
        let members: Vec<usize> = group.iter().copied().filter(|&u| pop.attr(u) == a).collect();
        if let Some(&u) = members.choose(rng) {
            selected.push(u);
        }
    }
    target_from_selection(data, a, &selected, contrasts, alpha)
}

/// Estimates each contrast for a given selection (one attribute-`a` unit per
/// group containing `a`).
pub fn target_from_selection(
    data: &OutcomeData,
    a: usize,
    selected: &[usize],
    contrasts: &[(usize, usize)],
    alpha: f64,
) -> Result<TargetEstimate> {
    let pop = data.population();
    if a >= pop.num_attrs() {
        return Err(Error::Invalid(format!("attribute {} does not exist", a + 1)));
    }
    let asg = data.assignment();
    let eligible = asg.groups().iter().filter(|g| g.iter().any(|&u| pop.attr(u) == a)).count();
    let mut seen = vec![false; asg.groups().len()];
    for &u in selected {
        let g = asg.group_index(u);
        if pop.attr(u) != a || core::mem::replace(&mut seen[g], true) {
            return Err(Error::Invalid(String::from("selection must hold one attribute-a unit per group")));
        }
    }
    if selected.len() != eligible {
        return Err(Error::Invalid(String::from("selection must cover every group containing attribute a")));
    }
    let nr = data.space().num_treatments();
    let mut cells = vec![Vec::new(); nr];
    for &u in selected {
        cells[data.treatments()[u]].push(data.outcomes()[u]);
    }
    let means: Vec<Option<f64>> = cells.iter().map(|c| (!c.is_empty()).then(|| mean(c))).collect();
    let mut out = Vec::with_capacity(contrasts.len());
    for &(r, r2) in contrasts {
        if r == r2 {
            return Err(Error::DegenerateContrast(r));
        }
        let estimate = means[r].zip(means[r2]).map(|(x, y)| x - y);
        let variance = match (sample_variance(&cells[r]), sample_variance(&cells[r2])) {
            (Some(s), Some(s2)) => Some(s / cells[r].len() as f64 + s2 / cells[r2].len() as f64),
            _ => None,
        };
        let interval = match (estimate, variance) {
            (Some(e), Some(v)) => Some(wald_interval(e, v, alpha)?),
            _ => None,
        };
        let note = if estimate.is_none() {
            Some(String::from("no selected unit received one of the treatments"))
        } else if variance.is_none() {
            Some(String::from("fewer than two selected units in a cell"))
        } else {
            None
        };
        out.push(ContrastEstimate { attr: Some(a), r, r2, estimate, variance, interval, note });
    }
    Ok(TargetEstimate { attr: a, selected: selected.to_vec(), counts: cells.iter().map(|c| c.len() as u64).collect(), means, contrasts: out })
}
