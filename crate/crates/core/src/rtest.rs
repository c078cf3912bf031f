//! Randomization tests of the sharp null (no peer effects for anyone) and of
//! subgroup nulls (no peer effects for units with attribute `a`).
//!
//! Statistics are computed from observed cell means over nonempty cells only,
//! so a redrawn assignment that empties a cell still yields a value. An
//! empty or single-cell comparison has statistic 0.

use alloc::format;
use alloc::vec::Vec;

use num_traits::ToPrimitive;

use crate::design::{count_assignments, sample, Design};
use crate::error::{Error, Result};
use crate::estimator::cell_outcomes;
use crate::oracle::enumerate_ensemble;
use crate::population::OutcomeData;
use crate::stats::mean;

/// Reference distributions are enumerated exactly up to this many assignments.
pub const EXHAUSTIVE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Null {
    /// `Y_i(r)` does not depend on `r` for any unit.
    Sharp,
    /// `Y_i(r)` does not depend on `r` for units with attribute `a`.
    Subgroup(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    MaxContrast,
    Anova,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `T_[a] = max_r Ŷ_[a](r) − min_r Ŷ_[a](r)`
    MaxContrast(usize),
    /// One-way ANOVA F of `Y` on `R` among attribute-`a` units.
    Anova(usize),
    /// Largest pooled contrast `max_{r,r'} τ̂(r, r')`.
    MaxContrastAll,
    /// F for the treatment terms of the fully interacted model.
    AnovaAll,
    /// `max_a T_[a]` or `max_a F_[a]`.
    MaxOverSubgroups(Family),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExhaustiveMode {
    /// Enumerate when the support has at most [`EXHAUSTIVE_LIMIT`] assignments.
    Auto,
    Never,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestSpec {
    pub null: Null,
    pub statistic: Statistic,
    pub draws: u64,
    pub seed: u64,
    pub exhaustive: ExhaustiveMode,
}

impl TestSpec {
    pub fn new(null: Null, statistic: Statistic, draws: u64, seed: u64) -> Self {
        TestSpec { null, statistic, draws, seed, exhaustive: ExhaustiveMode::Auto }
    }

    fn validate(&self, h: usize) -> Result<()> {
        let attr_ok = |a: usize| {
            if a < h {
                Ok(())
            } else {
                Err(Error::Invalid(format!("attribute {} does not exist", a + 1)))
            }
        };
        match self.statistic {
            Statistic::MaxContrast(a) | Statistic::Anova(a) => attr_ok(a)?,
            _ => {}
        }
        if let Null::Subgroup(a) = self.null {
            attr_ok(a)?;
            match self.statistic {
                Statistic::MaxContrast(b) | Statistic::Anova(b) if a == b => {}
                _ => {
                    return Err(Error::Invalid(format!(
                        "the null for attribute {} needs a statistic using only attribute-{} outcomes",
                        a + 1,
                        a + 1
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub p_value: f64,
    pub observed: f64,
    /// Reference draws (or enumerated assignments) evaluated.
    pub draws: u64,
    /// Reference statistics at least as large as the observed one.
    pub exceed: u64,
    pub exhaustive: bool,
    pub reference_mean: f64,
    pub reference_max: f64,
}

/// Value of `stat` on the observed data.
pub fn statistic_value(data: &OutcomeData, stat: Statistic) -> f64 {
    from_cells(data, &cell_outcomes(data), stat)
}

fn from_cells(data: &OutcomeData, cells: &[Vec<Vec<f64>>], stat: Statistic) -> f64 {
    match stat {
        Statistic::MaxContrast(a) => range(cells[a].iter().filter(|c| !c.is_empty()).map(|c| mean(c))),
        Statistic::Anova(a) => one_way_f(&cells[a]),
        Statistic::MaxContrastAll => {
            let pop = data.population();
            let nr = data.space().num_treatments();
            let pooled = (0..nr).filter(|&r| cells.iter().all(|row| !row[r].is_empty())).map(|r| {
                (0..pop.num_attrs()).map(|a| pop.weight(a) * mean(&cells[a][r])).sum::<f64>()
            });
            range(pooled)
        }
        Statistic::AnovaAll => nested_f(cells),
        Statistic::MaxOverSubgroups(family) => (0..cells.len())
            .map(|a| match family {
                Family::MaxContrast => from_cells(data, cells, Statistic::MaxContrast(a)),
                Family::Anova => from_cells(data, cells, Statistic::Anova(a)),
            })
            .fold(0.0, f64::max),
    }
}

fn range(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

fn f_ratio(between: f64, df1: usize, within: f64, df2: usize) -> f64 {
    if df1 == 0 || between <= 0.0 {
        return 0.0;
    }
    if df2 == 0 || within <= 0.0 {
        return f64::INFINITY;
    }
    (between / df1 as f64) / (within / df2 as f64)
}

/// One-way ANOVA F over the nonempty groups.
fn one_way_f(groups: &[Vec<f64>]) -> f64 {
    let nonempty: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    let n: usize = nonempty.iter().map(|g| g.len()).sum();
    if n == 0 {
        return 0.0;
    }
    let grand = nonempty.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in &nonempty {
        let m = mean(g);
        between += g.len() as f64 * (m - grand) * (m - grand);
        within += g.iter().map(|y| (y - m) * (y - m)).sum::<f64>();
    }
    f_ratio(between, nonempty.len().saturating_sub(1), within, n - nonempty.len())
}

/// F comparing the full attribute-by-treatment cell model with the
/// attribute-only model.
fn nested_f(cells: &[Vec<Vec<f64>>]) -> f64 {
    let mut between = 0.0;
    let mut within = 0.0;
    let mut n = 0;
    let mut full_cells = 0;
    let mut attrs = 0;
    for row in cells {
        let ys: Vec<f64> = row.iter().flatten().copied().collect();
        if ys.is_empty() {
            continue;
        }
        attrs += 1;
        n += ys.len();
        let ma = mean(&ys);
        for c in row.iter().filter(|c| !c.is_empty()) {
            full_cells += 1;
            let m = mean(c);
            between += c.len() as f64 * (m - ma) * (m - ma);
            within += c.iter().map(|y| (y - m) * (y - m)).sum::<f64>();
        }
    }
    f_ratio(between, full_cells - attrs, within, n - full_cells)
}

/// `t ≥ observed`, with a relative tolerance so that ties survive rounding.
fn at_least(t: f64, observed: f64) -> bool {
    if observed.is_infinite() {
        return t >= observed;
    }
    t >= observed - 1e-12 * observed.abs().max(1.0)
}

/// Statistic on the reference draw `index`, holding observed outcomes fixed.
pub fn reference_draw(data: &OutcomeData, design: &Design, stat: Statistic, seed: u64, index: u64) -> Result<f64> {
    let mut rng = crate::draw_rng(seed, index);
    let z = sample(design, data.population(), &mut rng)?;
    Ok(statistic_value(&data.with_assignment(z), stat))
}

/// Runs the test sequentially. See [`randomization_test_with`].
pub fn randomization_test(data: &OutcomeData, design: &Design, spec: &TestSpec) -> Result<TestResult> {
    randomization_test_with(data, design, spec, |count, eval| (0..count).map(eval).collect())
}

/// Runs the test, handing the evaluation of the `count` reference statistics
/// to `run` (which may evaluate `eval(0..count)` in any order or in parallel).
///
/// Monte Carlo p-values are `(1 + #{T* ≥ T}) / (1 + draws)`. When the
/// reference distribution is enumerated the p-value is the exact
/// `#{T* ≥ T} / N` over all `N` assignments.
pub fn randomization_test_with<F>(data: &OutcomeData, design: &Design, spec: &TestSpec, run: F) -> Result<TestResult>
where
    F: FnOnce(u64, &(dyn Fn(u64) -> Result<f64> + Sync)) -> Vec<Result<f64>>,
{
    spec.validate(data.population().num_attrs())?;
    design.validate(data.population())?;
    let observed = statistic_value(data, spec.statistic);
    let support = count_assignments(design, data.population())?;
    let exhaustive = match spec.exhaustive {
        ExhaustiveMode::Always => true,
        ExhaustiveMode::Never => false,
        ExhaustiveMode::Auto => support.to_u64().is_some_and(|s| s <= EXHAUSTIVE_LIMIT),
    };
    if !exhaustive && spec.draws < 1 {
        return Err(Error::Invalid("at least one draw is required".into()));
    }
    let stats: Vec<f64> = if exhaustive {
        let cap = support.to_u64().unwrap_or(u64::MAX);
        let ensemble = enumerate_ensemble(design, data.population(), cap)?;
        let eval = |i: u64| Ok(statistic_value(&data.with_assignment(ensemble.assignments[i as usize].clone()), spec.statistic));
        run(ensemble.assignments.len() as u64, &eval).into_iter().collect::<Result<_>>()?
    } else {
        let eval = |i: u64| reference_draw(data, design, spec.statistic, spec.seed, i);
        run(spec.draws, &eval).into_iter().collect::<Result<_>>()?
    };
    let exceed = stats.iter().filter(|&&t| at_least(t, observed)).count() as u64;
    let count = stats.len() as u64;
    let p_value = if exhaustive { exceed as f64 / count as f64 } else { (1 + exceed) as f64 / (1 + count) as f64 };
    let finite: Vec<f64> = stats.iter().copied().filter(|t| t.is_finite()).collect();
    Ok(TestResult {
        p_value,
        observed,
        draws: count,
        exceed,
        exhaustive,
        reference_mean: if finite.is_empty() { 0.0 } else { mean(&finite) },
        reference_max: stats.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{Assignment, Population};
    use alloc::vec;

    fn toy(outcomes: Vec<f64>) -> OutcomeData {
        let pop = Population::from_attrs(vec![0, 0, 1, 1], 1).unwrap();
        let z = Assignment::new(vec![vec![0, 2], vec![1, 3]], &pop).unwrap();
        OutcomeData::new(pop, z, outcomes).unwrap()
    }

    #[test]
    fn constant_outcomes_give_zero_and_p_one() {
        let d = toy(vec![2.0; 4]);
        for stat in [
            Statistic::MaxContrast(0),
            Statistic::Anova(1),
            Statistic::MaxContrastAll,
            Statistic::AnovaAll,
            Statistic::MaxOverSubgroups(Family::Anova),
        ] {
            assert_eq!(statistic_value(&d, stat), 0.0);
            let res = randomization_test(&d, &Design::RandomPartition, &TestSpec::new(Null::Sharp, stat, 10, 1)).unwrap();
            assert_eq!(res.p_value, 1.0);
            assert!(res.exhaustive);
            assert_eq!(res.draws, 3);
        }
    }

    #[test]
    fn range_of_two_cells() {
        let pop = Population::from_attrs(vec![0, 0, 0, 0, 1, 1], 1).unwrap();
        // units 0,1 paired with each other ({1}); units 2,3 with attribute 2 ({2})
        let z = Assignment::new(vec![vec![0, 1], vec![2, 4], vec![3, 5]], &pop).unwrap();
        let d = OutcomeData::new(pop, z, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0]).unwrap();
        assert_eq!(statistic_value(&d, Statistic::MaxContrast(0)), 2.0);
    }

    #[test]
    fn anova_matches_textbook() {
        // groups {1, 2} and {4, 7}: grand mean 3.5, SSB = 2(1.5-3.5)^2 + 2(5.5-3.5)^2 = 16,
        // SSW = 0.5 + 4.5 = 5, F = (16/1)/(5/2) = 6.4
        let f = one_way_f(&[vec![1.0, 2.0], vec![4.0, 7.0], vec![]]);
        assert!((f - 6.4).abs() < 1e-12);
        assert_eq!(one_way_f(&[vec![1.0], vec![2.0]]), f64::INFINITY);
        assert_eq!(one_way_f(&[vec![1.0, 2.0]]), 0.0);
    }

    #[test]
    fn exhaustive_p_values_on_pairs() {
        let d = toy(vec![1.0, 5.0, 2.0, 9.0]);
        let res = randomization_test(&d, &Design::RandomPartition, &TestSpec::new(Null::Sharp, Statistic::AnovaAll, 10, 0)).unwrap();
        assert!([1.0 / 3.0, 2.0 / 3.0, 1.0].iter().any(|p| (p - res.p_value).abs() < 1e-15));
    }

    #[test]
    fn subgroup_null_needs_matching_statistic() {
        let d = toy(vec![1.0, 5.0, 2.0, 9.0]);
        let bad = TestSpec::new(Null::Subgroup(0), Statistic::AnovaAll, 10, 0);
        assert!(randomization_test(&d, &Design::RandomPartition, &bad).is_err());
        let good = TestSpec::new(Null::Subgroup(0), Statistic::Anova(0), 10, 0);
        assert!(randomization_test(&d, &Design::RandomPartition, &good).is_ok());
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let pop = Population::from_attrs((0..24).map(|i| i % 2).collect(), 2).unwrap();
        let mut rng = crate::draw_rng(5, 0);
        let z = sample(&Design::RandomPartition, &pop, &mut rng).unwrap();
        let d = OutcomeData::new(pop, z, (0..24).map(|i| (i * 7 % 5) as f64).collect()).unwrap();
        let spec = TestSpec::new(Null::Sharp, Statistic::MaxOverSubgroups(Family::Anova), 200, 9);
        let a = randomization_test(&d, &Design::RandomPartition, &spec).unwrap();
        let b = randomization_test(&d, &Design::RandomPartition, &spec).unwrap();
        assert!(!a.exhaustive);
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }
}
