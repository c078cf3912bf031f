use peerfx_core::design::{count_feasible, for_each_feasible};
use peerfx_core::estimator::{estimate, joint_inference, all_contrasts};
use peerfx_core::exact::binom;
use peerfx_core::optimize::{argmax_set, objective, objective_coefficients, optimal_composition, Solver};
use peerfx_core::{
    composition_vector, enumerate_group_sets, enumerate_peer_sets, feasible_compositions, n_ar_from_l, sample, units_treatment, Design, OutcomeData,
    Population, ProbabilityKernel, TreatmentSpace,
};
use proptest::prelude::*;
use rand::SeedableRng;

fn population_strategy() -> impl Strategy<Value = Population> {
    (1usize..=3, 1usize..=3, 1usize..=4, any::<u64>()).prop_map(|(h, k, m, seed)| {
        let n = m * (k + 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut attrs: Vec<usize> = (0..n).map(|i| if i < h { i } else { rand::Rng::gen_range(&mut rng, 0..h) }).collect();
        if n < h {
            attrs = (0..n).collect();
        }
        rand::seq::SliceRandom::shuffle(attrs.as_mut_slice(), &mut rng);
        Population::from_attrs(attrs, k).unwrap()
    })
}

proptest! {
    #[test]
    fn space_sizes_match_binomials(h in 1usize..=4, k in 1usize..=5) {
        let peers = enumerate_peer_sets(h, k);
        let groups = enumerate_group_sets(h, k);
        prop_assert_eq!(peers.len().to_string(), binom((k + h - 1) as i64, (h - 1) as i64).to_string());
        prop_assert_eq!(groups.len().to_string(), binom((h + k) as i64, (h - 1) as i64).to_string());
        let mut dedup = peers.clone();
        dedup.dedup();
        prop_assert_eq!(dedup.len(), peers.len());
        prop_assert!(peers.iter().all(|r| r.size() == k));
        prop_assert!(groups.iter().all(|g| g.size() == k + 1));
    }

    #[test]
    fn sampled_assignments_are_consistent(pop in population_strategy(), seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = sample(&Design::RandomPartition, &pop, &mut rng).unwrap();
        let space = pop.space();
        let l = composition_vector(&z, &pop);
        prop_assert_eq!(l.iter().sum::<u64>() as usize, pop.m());
        for (i, id) in pop.ids().iter().enumerate() {
            let r = units_treatment(&z, &pop, id).unwrap();
            prop_assert_eq!(r.size(), pop.k());
            prop_assert_eq!(r.with(pop.attr(i)), z.group_set(z.group_index(i), &pop));
        }
        let cr = Design::complete(l.clone());
        let z2 = sample(&cr, &pop, &mut rng).unwrap();
        prop_assert_eq!(composition_vector(&z2, &pop), l.clone());
        let t = z2.treatments(&pop, &space);
        for a in 0..pop.num_attrs() {
            let mut total = 0;
            for r in 0..space.num_treatments() {
                let direct = (0..pop.n()).filter(|&i| pop.attr(i) == a && t[i] == r).count() as u64;
                prop_assert_eq!(n_ar_from_l(&l, a, r, &space).unwrap(), direct);
                total += direct;
            }
            prop_assert_eq!(total as usize, pop.attr_counts()[a]);
        }
    }

    #[test]
    fn kernel_margins(pop in population_strategy(), seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let l = composition_vector(&sample(&Design::RandomPartition, &pop, &mut rng).unwrap(), &pop);
        let space = pop.space();
        let nr = space.num_treatments();
        for design in [Design::RandomPartition, Design::complete(l)] {
            let k = ProbabilityKernel::new(&design, &pop).unwrap();
            for a in 0..pop.num_attrs() {
                let total: f64 = (0..nr).map(|r| k.pi(a, r)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for a2 in 0..pop.num_attrs() {
                    if a == a2 && pop.attr_counts()[a] < 2 {
                        continue;
                    }
                    for r in 0..nr {
                        let row: f64 = (0..nr).map(|r2| k.pi2(a, a2, r, r2)).sum();
                        prop_assert!((row - k.pi(a, r)).abs() < 1e-12);
                        for r2 in 0..nr {
                            prop_assert_eq!(k.pi2(a, a2, r, r2), k.pi2(a2, a, r2, r));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pooled_estimate_is_weighted_subgroup_estimate(pop in population_strategy(), seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = sample(&Design::RandomPartition, &pop, &mut rng).unwrap();
        let y: Vec<f64> = (0..pop.n()).map(|i| (i * 7 % 11) as f64 - 3.0).collect();
        let data = OutcomeData::new(pop.clone(), z, y).unwrap();
        let kernel = ProbabilityKernel::new(&Design::complete(data.composition()), &pop).unwrap();
        let nr = data.space().num_treatments();
        let report = estimate(&data, &kernel, &all_contrasts(nr), 0.05).unwrap();
        for (j, pooled) in report.overall.iter().enumerate() {
            let parts: Vec<Option<f64>> = (0..pop.num_attrs()).map(|a| report.subgroup[a * report.overall.len() + j].estimate).collect();
            if let Some(e) = pooled.estimate {
                let sum: f64 = parts.iter().enumerate().map(|(a, x)| pop.weight(a) * x.unwrap()).sum();
                prop_assert!((e - sum).abs() <= 1e-12 * (1.0 + sum.abs()));
            }
            if let (Some(e), Some(v), Some((lo, hi))) = (pooled.estimate, pooled.variance, pooled.interval) {
                let half = 1.959963984540054 * v.sqrt();
                prop_assert!((hi - e - half).abs() <= 1e-9 * (1.0 + half));
                prop_assert!((e - lo - half).abs() <= 1e-9 * (1.0 + half));
            }
        }
    }

    #[test]
    fn joint_covariance_rows_sum_to_zero(seed: u64, cells in 2usize..=4) {
        let pop = Population::from_counts(&[2 * cells, 2 * cells], 1).unwrap();
        let same = cells as u64 / 2;
        let l = vec![same, 2 * cells as u64 - 2 * same, same];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let z = sample(&Design::complete(l), &pop, &mut rng).unwrap();
        let y: Vec<f64> = (0..pop.n()).map(|i| ((seed >> (i % 60)) & 7) as f64 + i as f64 * 0.5).collect();
        let data = OutcomeData::new(pop, z, y).unwrap();
        if data.cell_counts().iter().flatten().any(|&c| c < 2) {
            return Ok(());
        }
        let joint = joint_inference(&data).unwrap();
        for (theta, cov) in joint.theta.iter().zip(&joint.cov) {
            prop_assert!(theta.iter().sum::<f64>().abs() < 1e-9);
            for row in cov.rows() {
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-9);
            }
            let (eig, _) = cov.symmetric_eigen();
            prop_assert!(eig.iter().all(|&e| e > -1e-9));
        }
    }

    #[test]
    fn solvers_agree(h in 1usize..=3, k in 1usize..=3, m in 1usize..=6, seed: u64) {
        let space = TreatmentSpace::new(h, k);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = m * (k + 1);
        let mut counts = vec![0usize; h];
        for _ in 0..n {
            counts[rand::Rng::gen_range(&mut rng, 0..h)] += 1;
        }
        let yhat: Vec<Vec<Option<f64>>> = (0..h)
            .map(|_| (0..space.num_treatments()).map(|_| Some(rand::Rng::gen_range(&mut rng, -5i32..=5) as f64)).collect())
            .collect();
        let e = optimal_composition(&yhat, &counts, &space, Solver::Enumerate).unwrap();
        let b = optimal_composition(&yhat, &counts, &space, Solver::BranchAndBound).unwrap();
        prop_assert_eq!(&e.l, &b.l);
        prop_assert_eq!(e.objective, b.objective);
        let coef = objective_coefficients(&yhat, &space).unwrap();
        prop_assert!(feasible_compositions(&counts, &space).contains(&e.l));
        let mut ok = true;
        for_each_feasible(&counts, &space, |l| {
            ok &= objective(&coef, l) <= e.objective + 1e-9;
            true
        });
        prop_assert!(ok);
        prop_assert!(count_feasible(&counts, &space, u64::MAX).unwrap() >= 1);
    }

    #[test]
    fn argmax_invariant_to_affine_maps(seed: u64, c in 0.1f64..10.0, shifts in proptest::collection::vec(-10.0f64..10.0, 2)) {
        let space = TreatmentSpace::new(2, 2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let yhat: Vec<Vec<Option<f64>>> = (0..2)
            .map(|_| (0..space.num_treatments()).map(|_| Some(rand::Rng::gen_range(&mut rng, 0i32..4) as f64)).collect())
            .collect();
        let moved: Vec<Vec<Option<f64>>> = yhat.iter().enumerate().map(|(a, row)| row.iter().map(|y| y.map(|v| c * v + shifts[a])).collect()).collect();
        let counts = [5, 4];
        let before = argmax_set(&objective_coefficients(&yhat, &space).unwrap(), &counts, &space);
        let after = argmax_set(&objective_coefficients(&moved, &space).unwrap(), &counts, &space);
        prop_assert_eq!(before, after);
    }
}
