//! Marginal and pairwise treatment probabilities and the constants `d`, `c`,
//! `b` that enter the variance formulas.
//!
//! All probabilities are computed as exact rationals from binomial counts and
//! only converted to `f64` at the end.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::design::{check_feasible, Design};
use crate::error::Result;
use crate::exact::{binom, int, ratio, to_f64};
use crate::multiset::TreatmentSpace;
use crate::population::{cell_counts_from_l, Population};

/// Treatment-probability kernel of a design on a population.
///
/// Indexing convention: `a`, `a2` are 0-based attributes, `r`, `r2` are
/// treatment indices in the canonical [`TreatmentSpace`] order.
#[derive(Debug, Clone)]
pub struct ProbabilityKernel {
    design: Design,
    space: TreatmentSpace,
    n: usize,
    attr_counts: Vec<usize>,
    pi1: Vec<BigRational>,
    pi2: Vec<BigRational>,
    pi1_f: Vec<f64>,
    pi2_f: Vec<f64>,
    /// `π_[a][a'](r,r') / (π_[a](r) π_[a'](r')) - 1`, undefined when a marginal is 0.
    dep: Vec<Option<BigRational>>,
}

impl ProbabilityKernel {
    pub fn new(design: &Design, pop: &Population) -> Result<Self> {
        let space = pop.space();
        let h = space.num_attrs();
        let nr = space.num_treatments();
        let counts = pop.attr_counts().to_vec();
        let (pi1, pi2) = match design {
            Design::RandomPartition => rp_probabilities(&space, &counts, pop.n()),
            Design::CompleteRandomization { l } => {
                check_feasible(l, &counts, &space)?;
                cr_probabilities(&space, &counts, l)?
            }
        };
        let mut dep = Vec::with_capacity(pi2.len());
        for a in 0..h {
            for a2 in 0..h {
                for r in 0..nr {
                    for r2 in 0..nr {
                        let p = &pi1[a * nr + r];
                        let q = &pi1[a2 * nr + r2];
                        let joint = &pi2[((a * h + a2) * nr + r) * nr + r2];
                        dep.push(if p.is_zero() || q.is_zero() { None } else { Some(joint / (p * q) - BigRational::one()) });
                    }
                }
            }
        }
        Ok(ProbabilityKernel {
            design: design.clone(),
            n: pop.n(),
            pi1_f: pi1.iter().map(to_f64).collect(),
            pi2_f: pi2.iter().map(to_f64).collect(),
            pi1,
            pi2,
            dep,
            space,
            attr_counts: counts,
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn space(&self) -> &TreatmentSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn attr_counts(&self) -> &[usize] {
        &self.attr_counts
    }

    fn idx1(&self, a: usize, r: usize) -> usize {
        a * self.space.num_treatments() + r
    }

    fn idx2(&self, a: usize, a2: usize, r: usize, r2: usize) -> usize {
        let (h, nr) = (self.space.num_attrs(), self.space.num_treatments());
        ((a * h + a2) * nr + r) * nr + r2
    }

    /// `π_[a](r)`
    pub fn pi(&self, a: usize, r: usize) -> f64 {
        self.pi1_f[self.idx1(a, r)]
    }

    pub fn pi_exact(&self, a: usize, r: usize) -> &BigRational {
        &self.pi1[self.idx1(a, r)]
    }

    /// `π_[a][a'](r, r')` for two distinct units with attributes `a`, `a2`.
    pub fn pi2(&self, a: usize, a2: usize, r: usize, r2: usize) -> f64 {
        self.pi2_f[self.idx2(a, a2, r, r2)]
    }

    pub fn pi2_exact(&self, a: usize, a2: usize, r: usize, r2: usize) -> &BigRational {
        &self.pi2[self.idx2(a, a2, r, r2)]
    }

    /// `π_[a][a'](r,r') / (π_[a](r) π_[a'](r')) - 1`, exact.
    pub fn dependence(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<&BigRational> {
        self.dep[self.idx2(a, a2, r, r2)].as_ref()
    }

    /// `d_[a][a'](r, r')`; `None` when either marginal probability is zero.
    pub fn d(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<f64> {
        let dep = self.dependence(a, a2, r, r2)?;
        let scale = libm::sqrt(self.attr_counts[a] as f64 * self.attr_counts[a2] as f64);
        Some(if a == a2 { to_f64(&(dep * int(self.attr_counts[a] as i64))) } else { scale * to_f64(dep) })
    }

    /// Exact `c_[a][a](r, r')` for a same-attribute pair.
    pub fn c_same_exact(&self, a: usize, r: usize, r2: usize) -> Option<BigRational> {
        let na = int(self.attr_counts[a] as i64);
        let d = self.dependence(a, a, r, r2)? * &na;
        let shrink = BigRational::one() - na.recip();
        let mut c = shrink * d - BigRational::one();
        if r == r2 {
            c += self.pi_exact(a, r).recip();
        }
        Some(c)
    }

    /// `c_[a][a'](r, r')`.
    pub fn c(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<f64> {
        if a == a2 {
            self.c_same_exact(a, r, r2).map(|c| to_f64(&c))
        } else {
            self.d(a, a2, r, r2)
        }
    }

    /// Whether `c_[a][a'](r, r')` is exactly zero. `None` when undefined.
    pub fn c_is_zero(&self, a: usize, a2: usize, r: usize, r2: usize) -> Option<bool> {
        if a == a2 {
            self.c_same_exact(a, r, r2).map(|c| c.is_zero())
        } else {
            self.dependence(a, a2, r, r2).map(|d| d.is_zero())
        }
    }

    pub fn b_exact(&self, a: usize, r: usize) -> Option<BigRational> {
        let na = int(self.attr_counts[a] as i64);
        let d = self.dependence(a, a, r, r)? * &na;
        let c = self.c_same_exact(a, r, r)?;
        Some((BigRational::one() - na.recip()) * (c - d) + BigRational::one())
    }

    /// `b_[a](r)`.
    pub fn b(&self, a: usize, r: usize) -> Option<f64> {
        self.b_exact(a, r).map(|b| to_f64(&b))
    }
}

fn rp_probabilities(space: &TreatmentSpace, counts: &[usize], n: usize) -> (Vec<BigRational>, Vec<BigRational>) {
    let h = space.num_attrs();
    let nr = space.num_treatments();
    let k = space.k() as i64;
    let n = n as i64;
    let nq = |q: usize| counts[q] as i64;
    let mut pi1 = Vec::with_capacity(h * nr);
    let den1 = binom(n - 1, k);
    for a in 0..h {
        for r in space.peer_sets() {
            let mut num = BigUint::one();
            for q in 0..h {
                let avail = if q == a { nq(q) - 1 } else { nq(q) };
                num *= binom(avail, i64::from(r.count(q)));
            }
            pi1.push(ratio(num, den1.clone()));
        }
    }
    let same_group = ratio(BigUint::from(k as u64), BigUint::from((n - 1) as u64));
    let apart = BigRational::one() - &same_group;
    let psi_den = binom(n - 2, k - 1);
    let phi_den = binom(n - 2, k) * binom(n - 2 - k, k);
    let mut pi2 = Vec::with_capacity(h * h * nr * nr);
    for a in 0..h {
        for a2 in 0..h {
            for r in space.peer_sets() {
                for r2 in space.peer_sets() {
                    // psi: i and j are peers; the K-1 shared peers are r \ {a'} = r' \ {a}
                    let shared = match (r.without(a2), r2.without(a)) {
                        (Some(x), Some(y)) if x == y => Some(x),
                        _ => None,
                    };
                    let psi = match shared {
                        Some(common) if !psi_den.is_zero() => {
                            let mut num = BigUint::one();
                            for q in 0..h {
                                let mut avail = nq(q);
                                if q == a {
                                    avail -= 1;
                                }
                                if q == a2 {
                                    avail -= 1;
                                }
                                num *= binom(avail, i64::from(common.count(q)));
                            }
                            ratio(num, psi_den.clone())
                        }
                        _ => BigRational::zero(),
                    };
                    // phi: disjoint peer sets drawn from the other n - 2 units
                    let phi = if phi_den.is_zero() {
                        BigRational::zero()
                    } else {
                        let mut num = BigUint::one();
                        for q in 0..h {
                            let mut avail = nq(q);
                            if q == a {
                                avail -= 1;
                            }
                            if q == a2 {
                                avail -= 1;
                            }
                            let (x, y) = (i64::from(r.count(q)), i64::from(r2.count(q)));
                            num *= binom(avail, x) * binom(avail - x, y);
                        }
                        ratio(num, phi_den.clone())
                    };
                    pi2.push(&same_group * psi + &apart * phi);
                }
            }
        }
    }
    (pi1, pi2)
}

fn cr_probabilities(space: &TreatmentSpace, counts: &[usize], l: &[u64]) -> Result<(Vec<BigRational>, Vec<BigRational>)> {
    let h = space.num_attrs();
    let nr = space.num_treatments();
    let cells = cell_counts_from_l(l, space)?;
    let frac = |num: u64, den: u64| {
        if den == 0 {
            BigRational::zero()
        } else {
            ratio(BigUint::from(num), BigUint::from(den))
        }
    };
    let mut pi1 = Vec::with_capacity(h * nr);
    for a in 0..h {
        for r in 0..nr {
            pi1.push(frac(cells[a][r], counts[a] as u64));
        }
    }
    let mut pi2 = vec![BigRational::zero(); h * h * nr * nr];
    let mut i = 0;
    for a in 0..h {
        for a2 in 0..h {
            let (na, na2) = (counts[a] as u64, counts[a2] as u64);
            for r in 0..nr {
                for r2 in 0..nr {
                    pi2[i] = if a != a2 {
                        frac(cells[a][r] * cells[a2][r2], na * na2)
                    } else if r != r2 {
                        frac(cells[a][r] * cells[a][r2], na * na.saturating_sub(1))
                    } else {
                        frac(cells[a][r] * cells[a][r].saturating_sub(1), na * na.saturating_sub(1))
                    };
                    i += 1;
                }
            }
        }
    }
    Ok((pi1, pi2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(x: f64, y: f64) -> bool {
        (x - y).abs() < 1e-14
    }

    #[test]
    fn rp_pairs() {
        let pop = Population::from_attrs(alloc::vec![0, 0, 1, 1], 1).unwrap();
        let k = ProbabilityKernel::new(&Design::RandomPartition, &pop).unwrap();
        assert!(close(k.pi(0, 0), 1.0 / 3.0));
        assert!(close(k.pi(0, 1), 2.0 / 3.0));
        // both type-1 units get treatment {1} only when paired together
        assert!(close(k.pi2(0, 0, 0, 0), 1.0 / 3.0));
        assert!(close(k.pi2(0, 0, 0, 1), 0.0));
    }

    #[test]
    fn cr_students() {
        let pop = Population::from_attrs(alloc::vec![0, 0, 0, 0, 0, 1, 1, 1], 3).unwrap();
        let k = ProbabilityKernel::new(&Design::complete(alloc::vec![0, 1, 1, 0, 0]), &pop).unwrap();
        assert!(close(k.pi(0, 1), 0.6));
        assert!(close(k.pi(0, 2), 0.4));
        assert_eq!(k.pi(0, 0), 0.0);
        assert_eq!(k.d(0, 0, 0, 1), None);
        for a in 0..2 {
            for a2 in 0..2 {
                for r in 0..4 {
                    for r2 in 0..4 {
                        if let Some(c) = k.c(a, a2, r, r2) {
                            assert_eq!(c, 0.0);
                        }
                    }
                }
            }
            for r in 0..4 {
                if k.pi(a, r) > 0.0 {
                    let na = pop.attr_counts()[a] as f64;
                    assert!(close(k.b(a, r).unwrap(), 1.0 / k.pi(a, r)));
                    assert!(close(k.b(a, r).unwrap(), na / (na * k.pi(a, r))));
                }
            }
        }
        // d for a = a', r != r' is n/(n-1)
        assert!(close(k.d(0, 0, 1, 2).unwrap(), 5.0 / 4.0));
    }

    #[test]
    fn marginal_and_pair_sums() {
        for (attrs, k, design) in [
            (alloc::vec![0, 0, 0, 1, 1, 1], 1usize, Design::RandomPartition),
            (alloc::vec![0, 0, 0, 0, 1, 1], 2, Design::RandomPartition),
            (alloc::vec![0, 0, 1, 1, 2, 2], 1, Design::RandomPartition),
            (alloc::vec![0, 0, 0, 0, 0, 1, 1, 1], 3, Design::complete(alloc::vec![0, 1, 1, 0, 0])),
        ] {
            let pop = Population::from_attrs(attrs, k).unwrap();
            let kern = ProbabilityKernel::new(&design, &pop).unwrap();
            let s = pop.space();
            let (h, nr) = (s.num_attrs(), s.num_treatments());
            for a in 0..h {
                let total: BigRational = (0..nr).map(|r| kern.pi_exact(a, r).clone()).sum();
                assert!(total.is_one());
                for a2 in 0..h {
                    for r in 0..nr {
                        let row: BigRational = (0..nr).map(|r2| kern.pi2_exact(a, a2, r, r2).clone()).sum();
                        assert_eq!(&row, kern.pi_exact(a, r));
                        for r2 in 0..nr {
                            assert_eq!(kern.pi2_exact(a, a2, r, r2), kern.pi2_exact(a2, a, r2, r));
                        }
                    }
                }
            }
        }
    }
}
