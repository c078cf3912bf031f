//! Exhaustive enumeration of assignment distributions on small populations,
//! with exact rational moments of any functional of the assignment.

pub mod suite;

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::design::{assignment_probability, count_assignments, Design};
use crate::error::{Error, Result};
use crate::exact::{from_f64, to_f64};
use crate::multiset::TreatmentSpace;
use crate::population::{Assignment, Population};

/// Default cap on the number of enumerated assignments.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Every assignment in the support of a design with its exact probability.
#[derive(Debug, Clone)]
pub struct AssignmentEnsemble {
    pub design: Design,
    pub assignments: Vec<Assignment>,
    pub probs: Vec<BigRational>,
}

impl AssignmentEnsemble {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn total_probability(&self) -> BigRational {
        self.probs.iter().sum()
    }
}

/// Enumerates the support of `design`. Partitions are generated canonically
/// (each new group starts at the smallest unassigned unit), so every
/// partition appears exactly once. Under complete randomization groups whose
/// composition would exceed `l` are pruned as they are formed.
pub fn enumerate_ensemble(design: &Design, pop: &Population, cap: u64) -> Result<AssignmentEnsemble> {
    design.validate(pop)?;
    let count = count_assignments(design, pop)?;
    if count.to_u64().is_none_or(|c| c > cap) {
        return Err(Error::CapExceeded { count: count.to_string(), cap });
    }
    let space = pop.space();
    let mut assignments = Vec::with_capacity(count.to_usize().unwrap_or(0));
    let mut state = Dfs {
        pop,
        space: &space,
        budget: design.composition().map(|l| l.to_vec()),
        taken: vec![false; pop.n()],
        groups: Vec::with_capacity(pop.m()),
    };
    state.run(&mut |groups| assignments.push(Assignment::from_canonical(groups.to_vec(), pop.n())));
    let probs = assignments.iter().map(|z| assignment_probability(design, pop, z)).collect::<Result<Vec<_>>>()?;
    Ok(AssignmentEnsemble { design: design.clone(), assignments, probs })
}

struct Dfs<'a> {
    pop: &'a Population,
    space: &'a TreatmentSpace,
    budget: Option<Vec<u64>>,
    taken: Vec<bool>,
    groups: Vec<Vec<usize>>,
}

impl Dfs<'_> {
    fn run(&mut self, emit: &mut impl FnMut(&[Vec<usize>])) {
        let Some(first) = self.taken.iter().position(|&t| !t) else {
            emit(&self.groups);
            return;
        };
        self.taken[first] = true;
        let mut group = vec![first];
        self.fill(first + 1, &mut group, emit);
        self.taken[first] = false;
    }

    fn fill(&mut self, from: usize, group: &mut Vec<usize>, emit: &mut impl FnMut(&[Vec<usize>])) {
        if group.len() == self.pop.k() + 1 {
            let t = if let Some(budget) = self.budget.as_mut() {
                let labels: Vec<usize> = group.iter().map(|&u| self.pop.attr(u)).collect();
                let g = crate::multiset::AttrMultiset::from_labels(self.pop.num_attrs(), &labels);
                let t = self.space.composition_index(&g).expect("group composition in space");
                if budget[t] == 0 {
                    return;
                }
                budget[t] -= 1;
                Some(t)
            } else {
                None
            };
            self.groups.push(group.clone());
            self.run(emit);
            self.groups.pop();
            if let (Some(t), Some(budget)) = (t, self.budget.as_mut()) {
                budget[t] += 1;
            }
            return;
        }
        for u in from..self.pop.n() {
            if self.taken[u] {
                continue;
            }
            self.taken[u] = true;
            group.push(u);
            self.fill(u + 1, group, emit);
            group.pop();
            self.taken[u] = false;
        }
    }
}

/// Exact first and second moments of a scalar functional.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: BigRational,
    pub second: BigRational,
}

impl Moments {
    pub fn variance(&self) -> BigRational {
        &self.second - &self.mean * &self.mean
    }

    pub fn mean_f64(&self) -> f64 {
        to_f64(&self.mean)
    }

    pub fn variance_f64(&self) -> f64 {
        to_f64(&self.variance())
    }
}

fn undefined(z: &Assignment, e: Error) -> Error {
    Error::Invalid(format!("functional undefined at assignment {:?}: {e}", z.groups()))
}

/// Exact moments of each coordinate of a vector-valued functional.
///
/// Values are converted to rationals exactly, so the only rounding is in the
/// functional itself and in the final conversion back to `f64`.
pub fn exact_moments<F>(ensemble: &AssignmentEnsemble, mut f: F) -> Result<Vec<Moments>>
where
    F: FnMut(&Assignment) -> Result<Vec<f64>>,
{
    let mut out: Option<Vec<Moments>> = None;
    for (z, p) in ensemble.assignments.iter().zip(&ensemble.probs) {
        let values = f(z).map_err(|e| undefined(z, e))?;
        let acc = out.get_or_insert_with(|| vec![Moments { mean: BigRational::zero(), second: BigRational::zero() }; values.len()]);
        if acc.len() != values.len() {
            return Err(Error::Invalid("functional changed dimension between assignments".into()));
        }
        for (m, &v) in acc.iter_mut().zip(&values) {
            if !v.is_finite() {
                return Err(undefined(z, Error::Invalid(format!("non-finite value {v}"))));
            }
            let x = from_f64(v);
            m.second += p * &x * &x;
            m.mean += p * x;
        }
    }
    Ok(out.unwrap_or_default())
}

/// Exact mean vector and covariance matrix of a vector-valued functional.
pub fn exact_covariance<F>(ensemble: &AssignmentEnsemble, mut f: F) -> Result<(Vec<BigRational>, Vec<Vec<BigRational>>)>
where
    F: FnMut(&Assignment) -> Result<Vec<f64>>,
{
    let mut mean: Vec<BigRational> = Vec::new();
    let mut cross: Vec<Vec<BigRational>> = Vec::new();
    for (z, p) in ensemble.assignments.iter().zip(&ensemble.probs) {
        let values: Vec<BigRational> = f(z).map_err(|e| undefined(z, e))?.into_iter().map(from_f64).collect();
        if mean.is_empty() {
            mean = vec![BigRational::zero(); values.len()];
            cross = vec![vec![BigRational::zero(); values.len()]; values.len()];
        }
        for i in 0..values.len() {
            mean[i] += p * &values[i];
            for j in 0..values.len() {
                cross[i][j] += p * &values[i] * &values[j];
            }
        }
    }
    let cov = (0..mean.len()).map(|i| (0..mean.len()).map(|j| &cross[i][j] - &mean[i] * &mean[j]).collect()).collect();
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn rp_counts() {
        let pop = Population::from_counts(&[2, 2], 1).unwrap();
        let e = enumerate_ensemble(&Design::RandomPartition, &pop, DEFAULT_CAP).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.total_probability().is_one());
        let pop = Population::from_counts(&[5, 3], 3).unwrap();
        let e = enumerate_ensemble(&Design::RandomPartition, &pop, DEFAULT_CAP).unwrap();
        assert_eq!(e.len(), 35);
        let mut sorted = e.assignments.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 35);
    }

    #[test]
    fn cr_support_matches_composition() {
        let pop = Population::from_counts(&[5, 3], 3).unwrap();
        let l = vec![0, 1, 1, 0, 0];
        let cr = enumerate_ensemble(&Design::complete(l.clone()), &pop, DEFAULT_CAP).unwrap();
        let rp = enumerate_ensemble(&Design::RandomPartition, &pop, DEFAULT_CAP).unwrap();
        let filtered: Vec<_> = rp.assignments.into_iter().filter(|z| crate::composition_vector(z, &pop) == l).collect();
        assert_eq!(cr.assignments, filtered);
        assert!(cr.total_probability().is_one());
    }

    #[test]
    fn cap_is_enforced() {
        let pop = Population::from_counts(&[6, 6], 1).unwrap();
        assert!(matches!(enumerate_ensemble(&Design::RandomPartition, &pop, 100), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn constant_functional_has_zero_variance() {
        let pop = Population::from_counts(&[3, 3], 1).unwrap();
        let e = enumerate_ensemble(&Design::RandomPartition, &pop, DEFAULT_CAP).unwrap();
        let m = exact_moments(&e, |_| Ok(vec![2.5])).unwrap();
        assert!(m[0].variance().is_zero());
        assert_eq!(m[0].mean_f64(), 2.5);
    }
}
