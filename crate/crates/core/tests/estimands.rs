use num_rational::BigRational;
use num_traits::Zero;
use peerfx_core::estimator::{all_contrasts, estimate, target_from_selection, yhat};
use peerfx_core::exact::{from_f64, to_f64};
use peerfx_core::oracle::{enumerate_ensemble, exact_moments, DEFAULT_CAP};
use peerfx_core::{sample, Assignment, Design, OutcomeData, Population, ProbabilityKernel};
use rand::{Rng, SeedableRng};

/// Outcomes that depend on who the peers are, not only on their attributes.
fn identity_outcome(weights: &[Vec<i32>], z: &Assignment, i: usize) -> f64 {
    weights[i][i] as f64 + z.peers(i).map(|j| weights[i][j] as f64).sum::<f64>()
}

#[test]
fn estimator_targets_design_dependent_means() {
    for (counts, k) in [(vec![3, 3], 1), (vec![4, 2], 2), (vec![2, 2, 2], 1)] {
        let pop = Population::from_counts(&counts, k).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let weights: Vec<Vec<i32>> = (0..pop.n()).map(|_| (0..pop.n()).map(|_| rng.gen_range(-4..=9)).collect()).collect();
        let l = peerfx_core::composition_vector(&sample(&Design::RandomPartition, &pop, &mut rng).unwrap(), &pop);
        for design in [Design::RandomPartition, Design::complete(l)] {
            let ensemble = enumerate_ensemble(&design, &pop, DEFAULT_CAP).unwrap();
            let kernel = ProbabilityKernel::new(&design, &pop).unwrap();
            let space = pop.space();
            let (h, nr) = (pop.num_attrs(), space.num_treatments());

            // E{Y_i | R_i = r} averaged over attribute-a units, computed directly
            let mut num = vec![vec![BigRational::zero(); nr]; pop.n()];
            let mut den = vec![vec![BigRational::zero(); nr]; pop.n()];
            for (z, p) in ensemble.assignments.iter().zip(&ensemble.probs) {
                let t = z.treatments(&pop, &space);
                for i in 0..pop.n() {
                    num[i][t[i]] += p * from_f64(identity_outcome(&weights, z, i));
                    den[i][t[i]] += p;
                }
            }
            let moments = exact_moments(&ensemble, |z| {
                let y = (0..pop.n()).map(|i| identity_outcome(&weights, z, i)).collect();
                let data = OutcomeData::new(pop.clone(), z.clone(), y)?;
                Ok(yhat(&data, &kernel).into_iter().flatten().map(|v| v.unwrap_or(0.0)).collect())
            })
            .unwrap();
            for a in 0..h {
                for r in 0..nr {
                    if kernel.pi(a, r) == 0.0 {
                        continue;
                    }
                    let units: Vec<usize> = (0..pop.n()).filter(|&i| pop.attr(i) == a).collect();
                    let target: BigRational = units.iter().map(|&i| &num[i][r] / &den[i][r]).sum::<BigRational>() / BigRational::from_integer(units.len().into());
                    let got = moments[a * nr + r].mean_f64();
                    assert!((got - to_f64(&target)).abs() <= 1e-10, "{design:?} a={a} r={r}: {got} vs {}", to_f64(&target));
                }
            }
        }
    }
}

fn selections(groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    groups.iter().fold(vec![Vec::new()], |acc, g| {
        acc.iter().flat_map(|prefix| g.iter().map(move |&u| [prefix.clone(), vec![u]].concat())).collect()
    })
}

#[test]
fn target_estimates_average_to_subgroup_estimates() {
    // three groups of four: {1111}, {1112}, {1122} by composition, so attribute 1
    // has several candidates in every group
    let pop = Population::from_counts(&[9, 3], 3).unwrap();
    let space = pop.space();
    let l: Vec<u64> = space.group_sets().iter().map(|g| u64::from(g.count(1) <= 2 && g.count(0) >= 2)).collect();
    let design = Design::complete(l);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let z = sample(&design, &pop, &mut rng).unwrap();
    let y: Vec<f64> = (0..pop.n()).map(|_| rng.gen_range(0..20) as f64 / 4.0).collect();
    let data = OutcomeData::new(pop.clone(), z, y).unwrap();
    let kernel = ProbabilityKernel::new(&design, &pop).unwrap();
    let nr = space.num_treatments();
    let contrasts: Vec<(usize, usize)> =
        all_contrasts(nr).into_iter().filter(|&(r, r2)| data.cell_counts()[0][r] > 0 && data.cell_counts()[0][r2] > 0).collect();
    assert!(!contrasts.is_empty());
    let report = estimate(&data, &kernel, &contrasts, 0.05).unwrap();

    let candidates: Vec<Vec<usize>> = data.assignment().groups().iter().map(|g| g.iter().copied().filter(|&u| pop.attr(u) == 0).collect()).collect();
    let all = selections(&candidates);
    assert_eq!(all.len(), candidates.iter().map(Vec::len).product::<usize>());
    let mut sums = vec![0.0; contrasts.len()];
    for sel in &all {
        let t = target_from_selection(&data, 0, sel, &contrasts, 0.05).unwrap();
        for (s, c) in sums.iter_mut().zip(&t.contrasts) {
            *s += c.estimate.unwrap();
        }
    }
    for (j, s) in sums.iter().enumerate() {
        let avg = s / all.len() as f64;
        let direct = report.subgroup[j].estimate.unwrap();
        assert!((avg - direct).abs() <= 1e-10, "contrast {:?}: {avg} vs {direct}", contrasts[j]);
    }
}

#[test]
fn target_selection_is_forced_with_one_unit_per_group() {
    let pop = Population::from_counts(&[3, 3], 1).unwrap();
    let design = Design::complete(vec![0, 3, 0]);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let z = sample(&design, &pop, &mut rng).unwrap();
    let data = OutcomeData::new(pop.clone(), z, vec![1.0, 4.0, 2.0, 8.0, 5.0, 7.0]).unwrap();
    let t = peerfx_core::estimator::target_subpop_estimate(&data, 0, &[], 0.05, &mut rng).unwrap();
    assert_eq!(t.selected.len(), 3);
    assert_eq!(t.counts, vec![0, 3]);
    assert_eq!(t.means[1], Some(7.0 / 3.0));
}
