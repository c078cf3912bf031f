//! Enumeration checks of the closed-form kernels, estimators and variance
//! formulas on a fixed set of small populations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng as _;

use super::{enumerate_ensemble, exact_covariance, exact_moments, AssignmentEnsemble, DEFAULT_CAP};
use crate::design::{feasible_compositions, Design};
use crate::error::{Error, Result};
use crate::estimator::{joint_inference, overall_variance, subgroup_variance, tau_all, tau_sub, Components, VarianceInputs};
use crate::exact::{factorial, ratio, to_f64};
use crate::kernel::ProbabilityKernel;
use crate::linalg::Matrix;
use crate::population::{Assignment, OutcomeData, Population};
use crate::science::{true_variance, PotentialTable};

pub const KERNEL_TOL: f64 = 1e-12;
pub const MOMENT_TOL: f64 = 1e-10;

/// A small population given by its attribute counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub counts: Vec<usize>,
    pub k: usize,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn population(&self) -> Population {
        Population::from_counts(&self.counts, self.k).expect("suite instances are valid")
    }

    pub fn label(&self) -> String {
        format!("n={} K={} H={}", self.n(), self.k, self.counts.len())
    }
}

/// `(n, K, H)` = (4,1,2), (6,1,2), (6,2,2), (8,3,2), (6,1,3).
pub fn standard_instances() -> Vec<Instance> {
    [(vec![2, 2], 1), (vec![3, 3], 1), (vec![4, 2], 2), (vec![5, 3], 3), (vec![2, 2, 2], 1)]
        .into_iter()
        .map(|(counts, k)| Instance { counts, k })
        .collect()
}

/// Random partitioning plus complete randomization at every feasible `l`.
pub fn designs_for(pop: &Population) -> Vec<Design> {
    let mut out = vec![Design::RandomPartition];
    out.extend(feasible_compositions(pop.attr_counts(), &pop.space()).into_iter().map(Design::complete));
    out
}

pub fn design_label(design: &Design) -> String {
    match design {
        Design::RandomPartition => String::from("rp"),
        Design::CompleteRandomization { l } => format!("cr l={l:?}"),
    }
}

/// Outcome of one comparison between a closed form and enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub instance: String,
    /// Largest absolute discrepancy; infinite when definedness disagrees.
    pub max_error: f64,
    pub tolerance: f64,
    /// Number of quantities compared.
    pub compared: usize,
    pub passed: bool,
}

#[derive(Default)]
struct Acc {
    max: f64,
    count: usize,
}

impl Acc {
    fn cmp(&mut self, got: f64, want: f64) {
        let e = (got - want).abs();
        self.max = if e.is_nan() { f64::INFINITY } else { self.max.max(e) };
        self.count += 1;
    }

    fn cmp_opt(&mut self, got: Option<f64>, want: Option<f64>) {
        match (got, want) {
            (Some(g), Some(w)) => self.cmp(g, w),
            (None, None) => {}
            _ => {
                self.max = f64::INFINITY;
                self.count += 1;
            }
        }
    }

    fn finish(self, name: &'static str, instance: String, tolerance: f64) -> Check {
        Check { name, instance, max_error: self.max, tolerance, compared: self.count, passed: self.max <= tolerance }
    }
}

/// A design on a population with its enumerated support and kernel.
pub struct Context {
    pub pop: Population,
    pub design: Design,
    pub ensemble: AssignmentEnsemble,
    pub kernel: ProbabilityKernel,
    label: String,
}

impl Context {
    pub fn new(pop: Population, design: Design, instance: &str) -> Result<Self> {
        let ensemble = enumerate_ensemble(&design, &pop, DEFAULT_CAP)?;
        let kernel = ProbabilityKernel::new(&design, &pop)?;
        let label = format!("{instance} {}", design_label(&design));
        Ok(Context { pop, design, ensemble, kernel, label })
    }

    fn data(&self, table: &PotentialTable, z: &Assignment) -> Result<OutcomeData> {
        OutcomeData::new(self.pop.clone(), z.clone(), table.observe(z))
    }
}

/// Integer potential outcomes drawn uniformly from `0..=9`.
pub fn random_table(pop: &Population, seed: u64) -> PotentialTable {
    let mut rng = crate::draw_rng(seed, 0);
    PotentialTable::from_fn(pop.clone(), |_, _| f64::from(rng.gen_range(0..=9u8)))
}

/// `Y_i(r) = base_i + effect_[A_i](r)`: constant individual effects within each attribute.
pub fn additive_table(pop: &Population, seed: u64) -> PotentialTable {
    let mut rng = crate::draw_rng(seed, 1);
    let nr = pop.space().num_treatments();
    let effects: Vec<Vec<f64>> = (0..pop.num_attrs()).map(|_| (0..nr).map(|_| f64::from(rng.gen_range(0..=5u8))).collect()).collect();
    let base: Vec<f64> = (0..pop.n()).map(|_| f64::from(rng.gen_range(0..=9u8))).collect();
    let attrs = pop.attrs().to_vec();
    PotentialTable::from_fn(pop.clone(), |i, r| base[i] + effects[attrs[i]][r])
}

/// Kernel probabilities and `d`, `c`, `b` against enumerated joint
/// treatment frequencies of every unit and every ordered pair of units.
pub fn check_kernel(ctx: &Context) -> Check {
    let pop = &ctx.pop;
    let space = pop.space();
    let (n, nr) = (pop.n(), space.num_treatments());
    let mut single = vec![vec![BigRational::zero(); nr]; n];
    let mut pair = vec![vec![vec![BigRational::zero(); nr * nr]; n]; n];
    for (z, p) in ctx.ensemble.assignments.iter().zip(&ctx.ensemble.probs) {
        let t = z.treatments(pop, &space);
        for i in 0..n {
            single[i][t[i]] += p;
            for j in 0..n {
                if i != j {
                    pair[i][j][t[i] * nr + t[j]] += p;
                }
            }
        }
    }
    let k = &ctx.kernel;
    let mut acc = Acc::default();
    let exact_gap = |a: &BigRational, b: &BigRational| to_f64(&(a - b).abs());
    for i in 0..n {
        let a = pop.attr(i);
        for r in 0..nr {
            acc.cmp(exact_gap(&single[i][r], k.pi_exact(a, r)), 0.0);
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            let a2 = pop.attr(j);
            let (na, na2) = (pop.attr_counts()[a] as f64, pop.attr_counts()[a2] as f64);
            for r in 0..nr {
                for r2 in 0..nr {
                    let p2 = &pair[i][j][r * nr + r2];
                    acc.cmp(exact_gap(p2, k.pi2_exact(a, a2, r, r2)), 0.0);
                    // d, c, b rebuilt from the enumerated frequencies
                    let (p, q) = (to_f64(&single[i][r]), to_f64(&single[j][r2]));
                    let d = (p > 0.0 && q > 0.0).then(|| libm::sqrt(na * na2) * (to_f64(p2) / (p * q) - 1.0));
                    let c = d.map(|d| match (a == a2, r == r2) {
                        (false, _) => d,
                        (true, false) => (1.0 - 1.0 / na) * d - 1.0,
                        (true, true) => (1.0 - 1.0 / na) * d + 1.0 / p - 1.0,
                    });
                    acc.cmp_opt(k.d(a, a2, r, r2), d);
                    acc.cmp_opt(k.c(a, a2, r, r2), c);
                    if a == a2 && r == r2 {
                        let b = c.zip(d).map(|(c, d)| (1.0 - 1.0 / na) * (c - d) + 1.0);
                        acc.cmp_opt(k.b(a, r), b);
                    }
                }
            }
        }
    }
    acc.finish("kernel", ctx.label.clone(), KERNEL_TOL)
}

/// Contrasts `(r, r')` with `r < r'`.
fn contrasts(nr: usize) -> Vec<(usize, usize)> {
    crate::estimator::all_contrasts(nr)
}

/// Enumeration means of `Ŷ_[a](r)`, `τ̂_[a]` and `τ̂` against the table's estimands.
pub fn check_unbiased(ctx: &Context, table: &PotentialTable) -> Result<Check> {
    let k = &ctx.kernel;
    let (h, nr) = (ctx.pop.num_attrs(), ctx.pop.space().num_treatments());
    let weights: Vec<f64> = (0..h).map(|a| ctx.pop.weight(a)).collect();
    let cells: Vec<(usize, usize)> = (0..h).flat_map(|a| (0..nr).map(move |r| (a, r))).filter(|&(a, r)| k.pi(a, r) > 0.0).collect();
    let sub: Vec<(usize, usize, usize)> = (0..h)
        .flat_map(|a| contrasts(nr).into_iter().map(move |(r, r2)| (a, r, r2)))
        .filter(|&(a, r, r2)| k.pi(a, r) > 0.0 && k.pi(a, r2) > 0.0)
        .collect();
    let all: Vec<(usize, usize)> = contrasts(nr).into_iter().filter(|&(r, r2)| (0..h).all(|a| k.pi(a, r) > 0.0 && k.pi(a, r2) > 0.0)).collect();
    let moments = exact_moments(&ctx.ensemble, |z| {
        let data = ctx.data(table, z)?;
        let y = crate::estimator::yhat(&data, k);
        let mut v: Vec<f64> = cells.iter().map(|&(a, r)| y[a][r].expect("positive probability")).collect();
        v.extend(sub.iter().map(|&(a, r, r2)| tau_sub(&y, a, r, r2).expect("defined")));
        v.extend(all.iter().map(|&(r, r2)| tau_all(&y, &weights, r, r2).expect("defined")));
        Ok(v)
    })?;
    let mut targets: Vec<f64> = cells.iter().map(|&(a, r)| table.mean(a, r)).collect();
    targets.extend(sub.iter().map(|&(a, r, r2)| table.tau_sub(a, r, r2)));
    targets.extend(all.iter().map(|&(r, r2)| table.tau(r, r2)));
    let mut acc = Acc::default();
    for (m, t) in moments.iter().zip(&targets) {
        acc.cmp(m.mean_f64(), *t);
    }
    Ok(acc.finish("unbiasedness", ctx.label.clone(), MOMENT_TOL))
}

/// Closed-form variances of `τ̂_[a]` and `τ̂` against enumeration variances.
pub fn check_variance(ctx: &Context, table: &PotentialTable) -> Result<Check> {
    let k = &ctx.kernel;
    let (h, nr) = (ctx.pop.num_attrs(), ctx.pop.space().num_treatments());
    let weights: Vec<f64> = (0..h).map(|a| ctx.pop.weight(a)).collect();
    let pairs = contrasts(nr);
    let mut acc = Acc::default();
    for &(r, r2) in &pairs {
        let (sub_true, all_true) = true_variance(table, k, r, r2);
        let defined_all = all_true.is_some();
        let defined: Vec<usize> = (0..h).filter(|&a| sub_true[a].is_some()).collect();
        let moments = exact_moments(&ctx.ensemble, |z| {
            let data = ctx.data(table, z)?;
            let y = crate::estimator::yhat(&data, k);
            let mut v: Vec<f64> = defined.iter().map(|&a| tau_sub(&y, a, r, r2).expect("defined")).collect();
            if defined_all {
                v.push(tau_all(&y, &weights, r, r2).expect("defined"));
            }
            Ok(v)
        })?;
        for (idx, &a) in defined.iter().enumerate() {
            acc.cmp(moments[idx].variance_f64(), sub_true[a].expect("defined"));
        }
        if let Some(v) = all_true {
            acc.cmp(moments[defined.len()].variance_f64(), v);
        }
        // a contrast estimator exists iff its closed-form variance does
        for a in 0..h {
            let estimable = k.pi(a, r) > 0.0 && k.pi(a, r2) > 0.0 && ctx.pop.attr_counts()[a] >= 2;
            if estimable != sub_true[a].is_some() {
                acc.cmp_opt(Some(0.0), None);
            }
        }
    }
    Ok(acc.finish("variance identity", ctx.label.clone(), MOMENT_TOL))
}

/// Enumeration means of every available variance component against its
/// target, and the conservativeness gap `E V̂ − Var` against the dropped
/// `S²(r−r')` terms.
pub fn check_components(ctx: &Context, table: &PotentialTable) -> Result<Check> {
    #[derive(Clone, Copy)]
    enum Key {
        S2(usize, usize),
        MeanSq(usize, usize),
        Pair(usize, usize, usize),
        Cross(usize, usize, usize, usize),
        VSub(usize, usize, usize),
        VAll(usize, usize),
    }
    let k = &ctx.kernel;
    let (h, nr) = (ctx.pop.num_attrs(), ctx.pop.space().num_treatments());
    let first = ctx.data(table, &ctx.ensemble.assignments[0])?;
    let probe = Components::new(&first, k);
    let mut keys = Vec::new();
    for a in 0..h {
        for r in 0..nr {
            if probe.s2(a, r).is_some() {
                keys.push(Key::S2(a, r));
            }
            if probe.mean_sq(a, r).is_some() {
                keys.push(Key::MeanSq(a, r));
            }
            for r2 in 0..nr {
                if r2 != r && probe.pair_product(a, r, r2).is_some() {
                    keys.push(Key::Pair(a, r, r2));
                }
                for a2 in 0..h {
                    if a2 != a && probe.cross_product(a, a2, r, r2).is_some() {
                        keys.push(Key::Cross(a, a2, r, r2));
                    }
                }
            }
        }
    }
    for (r, r2) in contrasts(nr) {
        for a in 0..h {
            if subgroup_variance(k, &probe, a, r, r2).is_some() {
                keys.push(Key::VSub(a, r, r2));
            }
        }
        if overall_variance(k, &probe, r, r2).is_some() {
            keys.push(Key::VAll(r, r2));
        }
    }
    let eval = |c: &Components, key: Key| -> Option<f64> {
        match key {
            Key::S2(a, r) => c.s2(a, r),
            Key::MeanSq(a, r) => c.mean_sq(a, r),
            Key::Pair(a, r, r2) => c.pair_product(a, r, r2),
            Key::Cross(a, a2, r, r2) => c.cross_product(a, a2, r, r2),
            Key::VSub(a, r, r2) => subgroup_variance(k, c, a, r, r2),
            Key::VAll(r, r2) => overall_variance(k, c, r, r2),
        }
    };
    let moments = exact_moments(&ctx.ensemble, |z| {
        let data = ctx.data(table, z)?;
        let c = Components::new(&data, k);
        keys.iter()
            .map(|&key| eval(&c, key).ok_or(Error::Invalid(String::from("component unavailable at this assignment"))))
            .collect()
    })?;
    let n = ctx.pop.n() as f64;
    let mut acc = Acc::default();
    for (m, &key) in moments.iter().zip(&keys) {
        let got = m.mean_f64();
        let want = match key {
            Key::S2(a, r) => table.s2(a, r),
            Key::MeanSq(a, r) => table.mean_sq(a, r),
            Key::Pair(a, r, r2) => table.pair_product(a, r, r2),
            Key::Cross(a, a2, r, r2) => table.cross_product(a, a2, r, r2),
            Key::VSub(a, r, r2) => {
                // E V̂_[a] − Var = S²_[a](r−r') / n_[a]
                let gap = table.s2_diff(a, r, r2).map(|s| s / ctx.pop.attr_counts()[a] as f64);
                acc.cmp_opt(Some(got), subgroup_variance(k, table, a, r, r2).zip(gap).map(|(v, g)| v + g));
                continue;
            }
            Key::VAll(r, r2) => {
                let gap: Option<f64> =
                    (0..h).map(|a| table.s2_diff(a, r, r2).map(|s| ctx.pop.weight(a) * s / n)).sum();
                acc.cmp_opt(Some(got), overall_variance(k, table, r, r2).zip(gap).map(|(v, g)| v + g));
                continue;
            }
        };
        acc.cmp_opt(Some(got), want);
    }
    Ok(acc.finish("variance components", ctx.label.clone(), MOMENT_TOL))
}

/// Under complete randomization the exact law of `(R_1, …, R_n)` from
/// enumeration equals the law of independent within-attribute permutations of
/// `n_[a]r` copies of each treatment. Compared in exact arithmetic.
pub fn check_stratified(ctx: &Context) -> Result<Check> {
    let Design::CompleteRandomization { l } = &ctx.design else {
        return Err(Error::Invalid(String::from("stratified check needs complete randomization")));
    };
    let pop = &ctx.pop;
    let space = pop.space();
    let mut enumerated: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
    for (z, p) in ctx.ensemble.assignments.iter().zip(&ctx.ensemble.probs) {
        *enumerated.entry(z.treatments(pop, &space)).or_insert_with(BigRational::zero) += p;
    }
    let cells = crate::population::cell_counts_from_l(l, &space)?;
    let mut stratified: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
    stratified.insert(vec![usize::MAX; pop.n()], BigRational::from_integer(1.into()));
    for a in 0..pop.num_attrs() {
        let units: Vec<usize> = (0..pop.n()).filter(|&i| pop.attr(i) == a).collect();
        let mut arrangements = Vec::new();
        multiset_permutations(&mut cells[a].clone(), units.len(), &mut Vec::new(), &mut arrangements);
        let denom = cells[a].iter().fold(factorial(units.len() as u64), |acc, &c| acc / factorial(c));
        let each = ratio(1u32.into(), denom);
        let mut next = BTreeMap::new();
        for (partial, p) in &stratified {
            for arr in &arrangements {
                let mut t = partial.clone();
                for (&u, &r) in units.iter().zip(arr) {
                    t[u] = r;
                }
                next.insert(t, p * &each);
            }
        }
        stratified = next;
    }
    let mut tv = BigRational::zero();
    for key in enumerated.keys().chain(stratified.keys()) {
        let zero = BigRational::zero();
        let p = enumerated.get(key).unwrap_or(&zero);
        let q = stratified.get(key).unwrap_or(&zero);
        tv += (p - q).abs();
    }
    // each key may be visited twice; the distance is zero either way iff the laws agree
    let compared = enumerated.len().max(stratified.len());
    Ok(Check {
        name: "stratified equivalence",
        instance: ctx.label.clone(),
        max_error: to_f64(&tv),
        tolerance: 0.0,
        compared,
        passed: tv.is_zero(),
    })
}

fn multiset_permutations(remaining: &mut [u64], len: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() == len {
        out.push(prefix.clone());
        return;
    }
    for r in 0..remaining.len() {
        if remaining[r] == 0 {
            continue;
        }
        remaining[r] -= 1;
        prefix.push(r);
        multiset_permutations(remaining, len, prefix, out);
        prefix.pop();
        remaining[r] += 1;
    }
}

/// Joint inference under complete randomization: `θ̂_[a]` is unbiased, its
/// enumeration covariance matches the closed form, blocks for different
/// attributes are uncorrelated, and `E Ĉov − Cov` is positive semidefinite.
pub fn check_joint(ctx: &Context, table: &PotentialTable) -> Result<Check> {
    let Design::CompleteRandomization { l } = &ctx.design else {
        return Err(Error::Invalid(String::from("joint check needs complete randomization")));
    };
    let (h, nr) = (ctx.pop.num_attrs(), ctx.pop.space().num_treatments());
    let cells = crate::population::cell_counts_from_l(l, &ctx.pop.space())?;
    let len = h * nr;
    let (mean, cov) = exact_covariance(&ctx.ensemble, |z| {
        let report = joint_inference(&ctx.data(table, z)?)?;
        let mut v: Vec<f64> = report.theta.concat();
        for c in &report.cov {
            v.extend(c.rows().concat());
        }
        Ok(v)
    })?;
    let mut acc = Acc::default();
    for a in 0..h {
        let theta = table.theta(a);
        let truth = table.joint_covariance(a, &cells[a]).ok_or(Error::Invalid(String::from("cell too small")))?;
        let mut expected_est = Matrix::zeros(nr);
        for p in 0..nr {
            acc.cmp(to_f64(&mean[a * nr + p]), theta[p]);
            for q in 0..nr {
                acc.cmp(to_f64(&cov[a * nr + p][a * nr + q]), truth[(p, q)]);
                expected_est[(p, q)] = to_f64(&mean[len + a * nr * nr + p * nr + q]);
            }
            for a2 in (0..h).filter(|&a2| a2 != a) {
                for q in 0..nr {
                    acc.cmp(to_f64(&cov[a * nr + p][a2 * nr + q]), 0.0);
                }
            }
        }
        let (vals, _) = expected_est.sub(&truth).symmetric_eigen();
        acc.cmp(vals[0].min(0.0), 0.0);
    }
    Ok(acc.finish("joint inference", ctx.label.clone(), MOMENT_TOL))
}

/// Populations where every cell can hold two units, for the joint checks.
pub fn joint_instances() -> Vec<(Instance, Vec<u64>)> {
    vec![(Instance { counts: vec![4, 4], k: 1 }, vec![1, 2, 1])]
}

/// Runs a named suite: `kernel` (kernel checks only) or `standard` (everything).
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    let full = match name {
        "kernel" => false,
        "standard" => true,
        other => return Err(Error::Invalid(format!("unknown suite `{other}` (expected `kernel` or `standard`)"))),
    };
    let mut out = Vec::new();
    let mut table_seed = seed;
    for inst in standard_instances() {
        let pop = inst.population();
        for design in designs_for(&pop) {
            let ctx = Context::new(pop.clone(), design, &inst.label())?;
            out.push(check_kernel(&ctx));
            if !full {
                continue;
            }
            if matches!(ctx.design, Design::CompleteRandomization { .. }) {
                out.push(check_stratified(&ctx)?);
            }
            let mut tables: Vec<PotentialTable> = (0..3)
                .map(|_| {
                    table_seed = table_seed.wrapping_add(1);
                    random_table(&pop, table_seed)
                })
                .collect();
            tables.push(additive_table(&pop, table_seed));
            for table in &tables {
                out.push(check_unbiased(&ctx, table)?);
                out.push(check_variance(&ctx, table)?);
                out.push(check_components(&ctx, table)?);
            }
        }
    }
    if full {
        for (inst, l) in joint_instances() {
            let pop = inst.population();
            let ctx = Context::new(pop.clone(), Design::complete(l), &inst.label())?;
            for i in 0..3 {
                out.push(check_joint(&ctx, &random_table(&pop, seed.wrapping_add(1000 + i)))?);
            }
        }
    }
    Ok(out)
}
