//! The two assignment mechanisms: random partitioning and complete
//! randomization with a fixed composition vector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::exact::{factorial, ratio};
use crate::multiset::TreatmentSpace;
use crate::population::{composition_vector, Assignment, Population};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Design {
    /// Uniform over all partitions into `m` unordered groups of `K + 1`.
    RandomPartition,
    /// Uniform over partitions whose composition vector equals `l`.
    CompleteRandomization { l: Vec<u64> },
}

impl Design {
    pub fn complete(l: Vec<u64>) -> Self {
        Design::CompleteRandomization { l }
    }

    /// Checks that the design can be run on `pop`.
    pub fn validate(&self, pop: &Population) -> Result<()> {
        match self {
            Design::RandomPartition => Ok(()),
            Design::CompleteRandomization { l } => check_feasible(l, pop.attr_counts(), &pop.space()),
        }
    }

    pub fn composition(&self) -> Option<&[u64]> {
        match self {
            Design::RandomPartition => None,
            Design::CompleteRandomization { l } => Some(l),
        }
    }
}

/// Verifies `Σ_t g_t(a) l_t = n_[a]` for every attribute.
pub fn check_feasible(l: &[u64], counts: &[usize], space: &TreatmentSpace) -> Result<()> {
    if l.len() != space.num_compositions() {
        return Err(Error::LengthMismatch { expected: space.num_compositions(), got: l.len() });
    }
    if counts.len() != space.num_attrs() {
        return Err(Error::Infeasible(format!("{} attribute counts for {} attributes", counts.len(), space.num_attrs())));
    }
    for (a, &na) in counts.iter().enumerate() {
        let implied: u64 = l.iter().zip(space.group_sets()).map(|(&lt, g)| lt * u64::from(g.count(a))).sum();
        if implied != na as u64 {
            return Err(Error::Infeasible(format!("l places {implied} units of attribute {} but there are {na}", a + 1)));
        }
    }
    Ok(())
}

/// Draws one assignment from `design`.
///
/// Complete randomization shuffles each attribute stratum, fills group slots
/// in canonical composition order, and then forgets the group order.
pub fn sample<R: RngCore + ?Sized>(design: &Design, pop: &Population, rng: &mut R) -> Result<Assignment> {
    let size = pop.k() + 1;
    let n = pop.n();
    let groups: Vec<Vec<usize>> = match design {
        Design::RandomPartition => {
            let mut units: Vec<usize> = (0..n).collect();
            units.shuffle(rng);
            units.chunks(size).map(|c| c.to_vec()).collect()
        }
        Design::CompleteRandomization { l } => {
            let space = pop.space();
            check_feasible(l, pop.attr_counts(), &space)?;
            let mut strata: Vec<Vec<usize>> = vec![Vec::new(); pop.num_attrs()];
            for u in 0..n {
                strata[pop.attr(u)].push(u);
            }
            for s in &mut strata {
                s.shuffle(rng);
            }
            let mut cursor = vec![0usize; pop.num_attrs()];
            let mut groups = Vec::with_capacity(pop.m());
            for (t, &lt) in l.iter().enumerate() {
                let g = space.composition(t);
                for _ in 0..lt {
                    let mut members = Vec::with_capacity(size);
                    for (a, s) in strata.iter().enumerate() {
                        let take = g.count(a) as usize;
                        members.extend_from_slice(&s[cursor[a]..cursor[a] + take]);
                        cursor[a] += take;
                    }
                    groups.push(members);
                }
            }
            groups.shuffle(rng);
            groups
        }
    };
    Assignment::new(groups, pop)
}

/// Number of partitions into `m` unordered groups of `K + 1`:
/// `n! / (m! ((K+1)!)^m)`.
pub fn count_partitions(n: usize, k: usize) -> BigUint {
    let m = n / (k + 1);
    let mut den = factorial(m as u64);
    let gf = factorial(k as u64 + 1);
    for _ in 0..m {
        den *= &gf;
    }
    factorial(n as u64) / den
}

/// Number of assignments in the support of `design`.
pub fn count_assignments(design: &Design, pop: &Population) -> Result<BigUint> {
    match design {
        Design::RandomPartition => Ok(count_partitions(pop.n(), pop.k())),
        Design::CompleteRandomization { l } => {
            let p = cr_probability(l, pop)?;
            Ok(p.denom().magnitude() / p.numer().magnitude())
        }
    }
}

fn cr_probability(l: &[u64], pop: &Population) -> Result<BigRational> {
    let space = pop.space();
    check_feasible(l, pop.attr_counts(), &space)?;
    let mut num = BigUint::one();
    for (&lt, g) in l.iter().zip(space.group_sets()) {
        num *= factorial(lt);
        for &c in g.counts() {
            let f = factorial(u64::from(c));
            for _ in 0..lt {
                num *= &f;
            }
        }
    }
    let den = pop.attr_counts().iter().fold(BigUint::one(), |acc, &na| acc * factorial(na as u64));
    Ok(ratio(num, den))
}

/// Exact probability of drawing `assignment` under `design`.
pub fn assignment_probability(design: &Design, pop: &Population, assignment: &Assignment) -> Result<BigRational> {
    if assignment.groups().len() != pop.m() || assignment.groups().iter().any(|g| g.len() != pop.k() + 1) {
        return Err(Error::Assignment("assignment does not match the population".into()));
    }
    match design {
        Design::RandomPartition => {
            let count = count_partitions(pop.n(), pop.k());
            Ok(ratio(BigUint::one(), count))
        }
        Design::CompleteRandomization { l } => {
            let p = cr_probability(l, pop)?;
            if composition_vector(assignment, pop) == *l {
                Ok(p)
            } else {
                Ok(BigRational::zero())
            }
        }
    }
}

/// Calls `visit` on every nonnegative integer `l` with `Σ_t g_t(a) l_t = counts[a]`.
/// Vectors are visited in increasing lexicographic order. Stops early when
/// `visit` returns `false`.
pub fn for_each_feasible(counts: &[usize], space: &TreatmentSpace, mut visit: impl FnMut(&[u64]) -> bool) {
    let t_len = space.num_compositions();
    let h = space.num_attrs();
    if counts.len() != h {
        return;
    }
    // later[t][a]: some composition with index >= t contains attribute a
    let mut later = vec![vec![false; h]; t_len + 1];
    for t in (0..t_len).rev() {
        for a in 0..h {
            later[t][a] = later[t + 1][a] || space.composition(t).contains(a);
        }
    }
    let mut rem: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
    let mut l = vec![0u64; t_len];
    feasible_dfs(0, space, &later, &mut rem, &mut l, &mut visit);
}

fn feasible_dfs(
    t: usize,
    space: &TreatmentSpace,
    later: &[Vec<bool>],
    rem: &mut [u64],
    l: &mut [u64],
    visit: &mut impl FnMut(&[u64]) -> bool,
) -> bool {
    if t == l.len() {
        return if rem.iter().all(|&r| r == 0) { visit(l) } else { true };
    }
    let g = space.composition(t);
    let max = (0..rem.len())
        .filter(|&a| g.count(a) > 0)
        .map(|a| rem[a] / u64::from(g.count(a)))
        .min()
        .unwrap_or(0);
    for x in 0..=max {
        for (a, r) in rem.iter_mut().enumerate() {
            *r -= x * u64::from(g.count(a));
        }
        let coverable = rem.iter().enumerate().all(|(a, &r)| r == 0 || later[t + 1][a]);
        let keep_going = if coverable {
            l[t] = x;
            feasible_dfs(t + 1, space, later, rem, l, visit)
        } else {
            true
        };
        for (a, r) in rem.iter_mut().enumerate() {
            *r += x * u64::from(g.count(a));
        }
        if !keep_going {
            l[t] = 0;
            return false;
        }
    }
    l[t] = 0;
    true
}

/// All feasible composition vectors for a population with `counts[a]` units of
/// each attribute, in increasing lexicographic order. Empty when none exist.
pub fn feasible_compositions(counts: &[usize], space: &TreatmentSpace) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for_each_feasible(counts, space, |l| {
        out.push(l.to_vec());
        true
    });
    out
}

/// Number of feasible composition vectors, or `None` once it exceeds `cap`.
pub fn count_feasible(counts: &[usize], space: &TreatmentSpace, cap: u64) -> Option<u64> {
    let mut n = 0u64;
    for_each_feasible(counts, space, |_| {
        n += 1;
        n <= cap
    });
    (n <= cap).then_some(n)
}
