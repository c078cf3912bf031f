//! Choosing the composition vector `l` that maximizes the expected total
//! outcome of a new population, and the fiducial distribution of that choice.
//!
//! The objective is linear in `l`: a group with composition `g_t` contributes
//! `Σ_a g_t(a) Ŷ_[a](g_t \ {a})`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::design::{count_feasible, feasible_compositions, for_each_feasible};
use crate::error::{Error, Result};
use crate::estimator::JointReport;
use crate::linalg::Matrix;
use crate::multiset::TreatmentSpace;

/// Problems with at most this many feasible vectors are solved by enumeration.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// Objectives within this relative distance are treated as tied.
const TIE_TOL: f64 = 1e-12;

fn tied(x: f64, y: f64) -> bool {
    (x - y).abs() <= TIE_TOL * (1.0 + x.abs().max(y.abs()))
}

/// Objective coefficient of every composition `g_t`.
pub fn objective_coefficients(yhat: &[Vec<Option<f64>>], space: &TreatmentSpace) -> Result<Vec<f64>> {
    let mut coef = Vec::with_capacity(space.num_compositions());
    for t in 0..space.num_compositions() {
        let g = space.composition(t);
        let mut total = 0.0;
        for a in (0..space.num_attrs()).filter(|&a| g.contains(a)) {
            let r = space.treatment_in(t, a).expect("a is in g");
            let y = yhat[a][r].ok_or(Error::UndefinedCell { attr: a, treatment: r, reason: "no estimate for this cell" })?;
            total += f64::from(g.count(a)) * y;
        }
        coef.push(total);
    }
    Ok(coef)
}

pub fn objective(coef: &[f64], l: &[u64]) -> f64 {
    coef.iter().zip(l).map(|(c, &x)| c * x as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Enumeration up to [`ENUMERATION_LIMIT`] feasible vectors, branch and bound beyond.
    Auto,
    Enumerate,
    BranchAndBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalComposition {
    pub l: Vec<u64>,
    pub objective: f64,
    /// Whether the enumeration solver was used.
    pub enumerated: bool,
}

fn check_counts(counts: &[usize], space: &TreatmentSpace) -> Result<()> {
    if counts.len() != space.num_attrs() {
        return Err(Error::Invalid(format!("{} attribute counts for {} attributes", counts.len(), space.num_attrs())));
    }
    let n: usize = counts.iter().sum();
    if n == 0 || !n.is_multiple_of(space.group_size()) {
        return Err(Error::Indivisible { n, group_size: space.group_size() });
    }
    Ok(())
}

/// Maximizes the objective over feasible `l` for a population with
/// `counts[a]` units per attribute. Ties go to the lexicographically smallest `l`.
pub fn optimal_composition(yhat: &[Vec<Option<f64>>], counts: &[usize], space: &TreatmentSpace, solver: Solver) -> Result<OptimalComposition> {
    check_counts(counts, space)?;
    let coef = objective_coefficients(yhat, space)?;
    let enumerate = match solver {
        Solver::Enumerate => true,
        Solver::BranchAndBound => false,
        Solver::Auto => count_feasible(counts, space, ENUMERATION_LIMIT).is_some(),
    };
    let best = if enumerate { solve_enumerate(&coef, counts, space) } else { solve_branch_and_bound(&coef, yhat, counts, space) };
    let (l, objective) = best.ok_or_else(|| Error::Infeasible(String::from("no composition vector fits these counts")))?;
    Ok(OptimalComposition { l, objective, enumerated: enumerate })
}

fn solve_enumerate(coef: &[f64], counts: &[usize], space: &TreatmentSpace) -> Option<(Vec<u64>, f64)> {
    let mut best: Option<(Vec<u64>, f64)> = None;
    // vectors arrive in increasing lexicographic order, so keep the first of any tie
    for_each_feasible(counts, space, |l| {
        let v = objective(coef, l);
        if best.as_ref().is_none_or(|(_, b)| v > *b && !tied(v, *b)) {
            best = Some((l.to_vec(), v));
        }
        true
    });
    best
}

/// Every feasible `l` whose objective ties the maximum.
pub fn argmax_set(coef: &[f64], counts: &[usize], space: &TreatmentSpace) -> Vec<Vec<u64>> {
    let all = feasible_compositions(counts, space);
    let values: Vec<f64> = all.iter().map(|l| objective(coef, l)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    all.into_iter().zip(values).filter(|(_, v)| tied(*v, max)).map(|(l, _)| l).collect()
}

struct Bnb<'a> {
    coef: &'a [f64],
    space: &'a TreatmentSpace,
    /// best[t][a]: largest per-unit value attribute `a` can earn in compositions `t..`.
    unit_bound: Vec<Vec<f64>>,
    rem: Vec<u64>,
    l: Vec<u64>,
    best: Option<(Vec<u64>, f64)>,
}

impl Bnb<'_> {
    fn bound(&self, t: usize) -> Option<f64> {
        let mut total = 0.0;
        for (a, &r) in self.rem.iter().enumerate() {
            if r > 0 {
                let u = self.unit_bound[t][a];
                if u == f64::NEG_INFINITY {
                    return None;
                }
                total += r as f64 * u;
            }
        }
        Some(total)
    }

    fn search(&mut self, t: usize, value: f64) {
        if t == self.l.len() {
            if self.rem.iter().all(|&r| r == 0) {
                let better = match &self.best {
                    None => true,
                    Some((bl, bv)) => (value > *bv && !tied(value, *bv)) || (tied(value, *bv) && self.l < *bl),
                };
                if better {
                    self.best = Some((self.l.clone(), value));
                }
            }
            return;
        }
        let Some(bound) = self.bound(t) else { return };
        if let Some((_, bv)) = &self.best {
            if value + bound < *bv && !tied(value + bound, *bv) {
                return;
            }
        }
        let g = self.space.composition(t);
        let h = self.rem.len();
        let max = (0..h).filter(|&a| g.count(a) > 0).map(|a| self.rem[a] / u64::from(g.count(a))).min().unwrap_or(0);
        for x in (0..=max).rev() {
            for a in 0..h {
                self.rem[a] -= x * u64::from(g.count(a));
            }
            self.l[t] = x;
            self.search(t + 1, value + x as f64 * self.coef[t]);
            for a in 0..h {
                self.rem[a] += x * u64::from(g.count(a));
            }
        }
        self.l[t] = 0;
    }
}

/// Depth-first branch and bound. The bound gives every unplaced unit the best
/// per-unit value its attribute can still earn in the remaining compositions.
fn solve_branch_and_bound(coef: &[f64], yhat: &[Vec<Option<f64>>], counts: &[usize], space: &TreatmentSpace) -> Option<(Vec<u64>, f64)> {
    let (t_len, h) = (space.num_compositions(), space.num_attrs());
    let mut unit_bound = vec![vec![f64::NEG_INFINITY; h]; t_len + 1];
    for t in (0..t_len).rev() {
        for a in 0..h {
            let here = space.treatment_in(t, a).and_then(|r| yhat[a][r]).unwrap_or(f64::NEG_INFINITY);
            unit_bound[t][a] = unit_bound[t + 1][a].max(here);
        }
    }
    let mut bnb = Bnb { coef, space, unit_bound, rem: counts.iter().map(|&c| c as u64).collect(), l: vec![0; t_len], best: None };
    bnb.search(0, 0.0);
    bnb.best.map(|(l, _)| {
        let v = objective(coef, &l);
        (l, v)
    })
}

/// One row of the fiducial table.
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialRow {
    pub l: Vec<u64>,
    pub probability: f64,
    /// Estimated total outcome of `l` under the point estimates.
    pub outcome: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiducialResult {
    /// Sorted by probability, then by `l`.
    pub rows: Vec<FiducialRow>,
    pub draws: u64,
    pub seed: u64,
}

/// Fiducial distribution of the optimal composition, evaluated sequentially.
pub fn fiducial_distribution(joint: &JointReport, counts: &[usize], space: &TreatmentSpace, draws: u64, seed: u64) -> Result<FiducialResult> {
    fiducial_distribution_with(joint, counts, space, draws, seed, |n, eval| (0..n).map(eval).collect())
}

/// As [`fiducial_distribution`], with the per-draw work handed to `run`.
///
/// Each draw samples `θ̃_[a] ~ N(θ̂_[a], Ĉov_[a])` independently across
/// attributes and finds the maximizing `l` with `θ̃` in place of `Ŷ`. Ties
/// within a draw are broken uniformly at random.
pub fn fiducial_distribution_with<F>(joint: &JointReport, counts: &[usize], space: &TreatmentSpace, draws: u64, seed: u64, run: F) -> Result<FiducialResult>
where
    F: FnOnce(u64, &(dyn Fn(u64) -> usize + Sync)) -> Vec<usize>,
{
    if draws < 1 {
        return Err(Error::Invalid(String::from("at least one draw is required")));
    }
    check_counts(counts, space)?;
    let h = space.num_attrs();
    let nr = space.num_treatments();
    if joint.theta.len() != h || joint.cov.len() != h || joint.theta.iter().any(|t| t.len() != nr) {
        return Err(Error::Invalid(String::from("joint report does not match the treatment space")));
    }
    let factors = joint.cov.iter().map(|c| c.psd_factor(1e-8)).collect::<Result<Vec<Matrix>>>()?;
    if count_feasible(counts, space, ENUMERATION_LIMIT).is_none() {
        return Err(Error::Invalid(format!("more than {ENUMERATION_LIMIT} feasible composition vectors")));
    }
    let feasible = feasible_compositions(counts, space);
    if feasible.is_empty() {
        return Err(Error::Infeasible(String::from("no composition vector fits these counts")));
    }
    let point: Vec<Vec<Option<f64>>> = joint.yhat.iter().map(|row| row.iter().map(|&y| Some(y)).collect()).collect();
    let point_coef = objective_coefficients(&point, space)?;

    let eval = |i: u64| -> usize {
        let mut rng = crate::draw_rng(seed, i);
        let theta: Vec<Vec<Option<f64>>> = (0..h)
            .map(|a| {
                let z: Vec<f64> = (0..nr).map(|_| rng.sample(StandardNormal)).collect();
                let shift = factors[a].mul_vec(&z);
                joint.theta[a].iter().zip(shift).map(|(t, s)| Some(t + s)).collect()
            })
            .collect();
        let coef = objective_coefficients(&theta, space).expect("all cells present");
        let values: Vec<f64> = feasible.iter().map(|l| objective(&coef, l)).collect();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..values.len()).filter(|&j| tied(values[j], max)).collect();
        if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.gen_range(0..ties.len())]
        }
    };
    let picks = run(draws, &eval);
    let mut tally: BTreeMap<usize, u64> = BTreeMap::new();
    for p in picks {
        *tally.entry(p).or_default() += 1;
    }
    let mut rows: Vec<FiducialRow> = tally
        .into_iter()
        .map(|(j, count)| FiducialRow {
            l: feasible[j].clone(),
            probability: count as f64 / draws as f64,
            outcome: objective(&point_coef, &feasible[j]),
            count,
        })
        .collect();
    rows.sort_by(|x, y| y.count.cmp(&x.count).then_with(|| x.l.cmp(&y.l)));
    Ok(FiducialResult { rows, draws, seed })
}
