//! One function per subcommand. Each returns the JSON document (or text) to
//! print and the exit code.

use peerfx_core::estimator::{estimate, joint_inference, target_subpop_estimate, ContrastEstimate, EstimateReport};
use peerfx_core::optimize::{fiducial_distribution_with, objective_coefficients, optimal_composition, Solver};
use peerfx_core::oracle::suite::run_suite;
use peerfx_core::rtest::{randomization_test_with, ExhaustiveMode, Family, Null, Statistic, TestSpec};
use peerfx_core::stats::{sample_variance, two_sided_z};
use peerfx_core::{composition_vector, sample, Design, OutcomeData, Population, ProbabilityKernel, TreatmentSpace};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{
    parse_counts, parse_list, AssignArgs, EstimateArgs, Exhaustive, FiducialArgs, Format, OptimizeArgs, ProbsArgs, RunConfig, SolverKind, TestArgs,
};
use crate::dataset::Dataset;
use crate::error::CliError;
use crate::output::{self, envelope, labels, matrix, multiset, num, nums, opt_num};

/// What a command prints and the code it exits with.
pub struct Output {
    pub stdout: String,
    pub code: i32,
}

impl Output {
    fn json(doc: &Value) -> Self {
        Output { stdout: output::render(doc), code: 0 }
    }
}

fn numbered(n: usize) -> Vec<String> {
    (1..=n).map(|a| a.to_string()).collect()
}

pub fn enumerate(h: usize, k: usize) -> Result<Output, CliError> {
    if h == 0 || k == 0 {
        return Err(CliError::Validation("--h and --k must be at least 1".into()));
    }
    let space = TreatmentSpace::new(h, k);
    let result = json!({
        "peer_sets": space.peer_sets().iter().enumerate().map(|(i, r)| json!({ "index": i + 1, "labels": multiset(r), "counts": r.counts() })).collect::<Vec<_>>(),
        "group_sets": space.group_sets().iter().enumerate().map(|(i, g)| json!({ "index": i + 1, "labels": multiset(g), "counts": g.counts() })).collect::<Vec<_>>(),
    });
    let doc = envelope("enumerate", json!({ "H": h, "K": k }), labels(&numbered(h)), output::space(&space), result);
    Ok(Output::json(&doc))
}

pub fn assign(args: &AssignArgs) -> Result<Output, CliError> {
    let cfg = &args.config;
    cfg.validate()?;
    let ds = Dataset::from_path(&args.data)?;
    let pop = ds.population(args.k)?;
    let observed = match &ds.groups {
        Some(_) => Some(composition_vector(&ds.assignment(&pop)?, &pop)),
        None => None,
    };
    let design = cfg.design(&pop, observed)?;
    let mut rng = peerfx_core::draw_rng(cfg.seed, 0);
    let z = sample(&design, &pop, &mut rng)?;
    let group_ids: Vec<String> = (0..pop.n()).map(|u| format!("g{}", z.group_index(u) + 1)).collect();
    if args.format == Format::Csv {
        let mut out = String::from("unit_id,group_id\n");
        for (id, g) in pop.ids().iter().zip(&group_ids) {
            out.push_str(&csv_field(id));
            out.push(',');
            out.push_str(g);
            out.push('\n');
        }
        return Ok(Output { stdout: out, code: 0 });
    }
    let result = json!({
        "design": design_json(&design),
        "composition": composition_vector(&z, &pop),
        "assignment": pop.ids().iter().zip(&group_ids).map(|(id, g)| json!({ "unit_id": id, "group_id": g })).collect::<Vec<_>>(),
    });
    let mut config = cfg.echo();
    config["data"] = json!(args.data.display().to_string());
    config["k"] = json!(pop.k());
    let doc = envelope("assign", config, labels(&ds.labels), output::space(&pop.space()), result);
    Ok(Output::json(&doc))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn design_json(design: &Design) -> Value {
    match design {
        Design::RandomPartition => json!({ "kind": "rp" }),
        Design::CompleteRandomization { l } => json!({ "kind": "cr", "l": l }),
    }
}

pub fn probs(args: &ProbsArgs) -> Result<Output, CliError> {
    let cfg = &args.config;
    cfg.validate()?;
    let (pop, label_names, observed) = match (&args.data, &args.counts) {
        (Some(path), _) => {
            let ds = Dataset::from_path(path)?;
            let pop = ds.population(args.k)?;
            let observed = match &ds.groups {
                Some(_) => Some(composition_vector(&ds.assignment(&pop)?, &pop)),
                None => None,
            };
            (pop, ds.labels.clone(), observed)
        }
        (None, Some(raw)) => {
            let counts = parse_list::<usize>(raw, "--counts")?;
            let k = args.k.ok_or_else(|| CliError::Validation("--counts needs --k".into()))?;
            let pop = Population::from_counts(&counts, k)?;
            let h = pop.num_attrs();
            (pop, numbered(h), None)
        }
        (None, None) => return Err(CliError::Validation("give --data or --counts".into())),
    };
    let design = cfg.design(&pop, observed)?;
    let kernel = ProbabilityKernel::new(&design, &pop)?;
    let (h, nr) = (pop.num_attrs(), pop.space().num_treatments());
    let mut pairs = Vec::new();
    for a in 0..h {
        for a2 in 0..h {
            if a == a2 && pop.attr_counts()[a] < 2 {
                continue;
            }
            for r in 0..nr {
                for r2 in 0..nr {
                    pairs.push(json!({
                        "attribute": a + 1,
                        "attribute_prime": a2 + 1,
                        "r": r + 1,
                        "r_prime": r2 + 1,
                        "pi2": num(kernel.pi2(a, a2, r, r2)),
                        "pi2_exact": kernel.pi2_exact(a, a2, r, r2).to_string(),
                        "d": opt_num(kernel.d(a, a2, r, r2)),
                        "c": opt_num(kernel.c(a, a2, r, r2)),
                    }));
                }
            }
        }
    }
    let result = json!({
        "design": design_json(&design),
        "counts": pop.attr_counts(),
        "pi": (0..h).map(|a| nums(&(0..nr).map(|r| kernel.pi(a, r)).collect::<Vec<_>>())).collect::<Vec<_>>(),
        "pi_exact": (0..h).map(|a| (0..nr).map(|r| kernel.pi_exact(a, r).to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "b": (0..h).map(|a| (0..nr).map(|r| opt_num(kernel.b(a, r))).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "pairs": pairs,
    });
    let mut config = cfg.echo();
    config["data"] = json!(args.data.as_ref().map(|p| p.display().to_string()));
    config["counts"] = json!(args.counts);
    config["k"] = json!(pop.k());
    let doc = envelope("probs", config, labels(&label_names), output::space(&pop.space()), result);
    Ok(Output::json(&doc))
}

/// Kernel used for estimation. Under random partitioning the default is to
/// condition on the observed composition and use the complete-randomization
/// kernel; `unconditional` keeps the random-partitioning kernel.
fn estimation_kernel(cfg: &RunConfig, data: &OutcomeData, unconditional: bool) -> Result<(ProbabilityKernel, Value), CliError> {
    let pop = data.population();
    let observed = data.composition();
    let (design, mode) = match (cfg.design, unconditional) {
        (crate::config::DesignKind::Rp, false) => (Design::complete(observed), "complete randomization conditional on the observed composition"),
        (crate::config::DesignKind::Rp, true) => (Design::RandomPartition, "random partitioning (unconditional)"),
        (crate::config::DesignKind::Cr, false) => {
            let design = cfg.design(pop, Some(observed.clone()))?;
            if design.composition() != Some(observed.as_slice()) {
                return Err(CliError::Validation(format!("--l does not match the observed composition {observed:?}")));
            }
            (design, "complete randomization")
        }
        (crate::config::DesignKind::Cr, true) => return Err(CliError::Validation("--unconditional applies only to --design rp".into())),
    };
    let kernel = ProbabilityKernel::new(&design, pop)?;
    let info = json!({
        "mode": mode,
        "kernel": design_json(&design),
        "conditional_on_observed_composition": cfg.design == crate::config::DesignKind::Rp && !unconditional,
    });
    Ok((kernel, info))
}

fn contrast_json(c: &ContrastEstimate, space: &TreatmentSpace) -> Value {
    let mut v = json!({});
    if let Some(a) = c.attr {
        v["attribute"] = json!(a + 1);
    }
    v["r"] = json!(c.r + 1);
    v["r_prime"] = json!(c.r2 + 1);
    v["peer_set"] = json!(multiset(space.treatment(c.r)));
    v["peer_set_prime"] = json!(multiset(space.treatment(c.r2)));
    v["estimate"] = opt_num(c.estimate);
    v["variance"] = opt_num(c.variance);
    v["std_error"] = opt_num(c.variance.filter(|&x| x >= 0.0).map(f64::sqrt));
    v["ci_lower"] = opt_num(c.interval.map(|i| i.0));
    v["ci_upper"] = opt_num(c.interval.map(|i| i.1));
    v["note"] = json!(c.note);
    v
}

fn plot_data(data: &OutcomeData, report: &EstimateReport, label_names: &[String]) -> Result<Value, CliError> {
    let z = two_sided_z(report.alpha)?;
    let cells = peerfx_core::estimator::cell_outcomes(data);
    let space = data.space();
    let mut rows = Vec::new();
    for (a, row) in cells.iter().enumerate() {
        for (r, ys) in row.iter().enumerate() {
            if ys.is_empty() {
                continue;
            }
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            let half = sample_variance(ys).map(|s2| z * (s2 / ys.len() as f64).sqrt());
            rows.push(json!({
                "attribute": a + 1,
                "label": label_names[a],
                "r": r + 1,
                "peer_set": multiset(space.treatment(r)),
                "n": ys.len(),
                "mean": num(m),
                "ci_lower": opt_num(half.map(|h| m - h)),
                "ci_upper": opt_num(half.map(|h| m + h)),
            }));
        }
    }
    Ok(Value::Array(rows))
}

pub fn estimate_cmd(args: &EstimateArgs) -> Result<Output, CliError> {
    let cfg = &args.config;
    cfg.validate()?;
    let ds = Dataset::from_path(&args.data)?;
    let data = ds.outcome_data(None)?;
    let pop = data.population();
    let space = data.space().clone();
    let (kernel, inference) = estimation_kernel(cfg, &data, args.unconditional)?;
    let contrasts = cfg.contrast_pairs(space.num_treatments())?;
    let report = estimate(&data, &kernel, &contrasts, cfg.alpha)?;

    let mut cells = Vec::new();
    for a in 0..pop.num_attrs() {
        for r in 0..space.num_treatments() {
            cells.push(json!({
                "attribute": a + 1,
                "r": r + 1,
                "peer_set": multiset(space.treatment(r)),
                "n": report.counts[a][r],
                "yhat": opt_num(report.yhat[a][r]),
            }));
        }
    }
    let joint = if matches!(kernel.design(), Design::CompleteRandomization { .. }) {
        match joint_inference(&data) {
            Ok(j) => json!({
                "gamma": matrix(&j.gamma.rows()),
                "blocks": j.theta.iter().zip(&j.cov).enumerate().map(|(a, (t, c))| json!({ "attribute": a + 1, "theta": nums(t), "cov": matrix(&c.rows()) })).collect::<Vec<_>>(),
            }),
            Err(e) => json!({ "unavailable": e.to_string() }),
        }
    } else {
        json!({ "unavailable": "joint inference uses the complete-randomization kernel" })
    };
    let mut result = json!({
        "inference": inference,
        "weights": nums(&(0..pop.num_attrs()).map(|a| pop.weight(a)).collect::<Vec<_>>()),
        "cells": cells,
        "subgroup_contrasts": report.subgroup.iter().map(|c| contrast_json(c, &space)).collect::<Vec<_>>(),
        "overall_contrasts": report.overall.iter().map(|c| contrast_json(c, &space)).collect::<Vec<_>>(),
        "joint": joint,
        "warnings": report.warnings,
    });
    if let Some(t) = args.target_attr {
        if t == 0 || t > pop.num_attrs() {
            return Err(CliError::Validation(format!("--target-attr must lie in 1..={}", pop.num_attrs())));
        }
        let mut rng = peerfx_core::draw_rng(cfg.seed, 0);
        let est = target_subpop_estimate(&data, t - 1, &contrasts, cfg.alpha, &mut rng)?;
        result["target"] = json!({
            "attribute": t,
            "selected": est.selected.iter().map(|&u| pop.ids()[u].clone()).collect::<Vec<_>>(),
            "counts": est.counts,
            "means": est.means.iter().map(|&m| opt_num(m)).collect::<Vec<_>>(),
            "contrasts": est.contrasts.iter().map(|c| contrast_json(c, &space)).collect::<Vec<_>>(),
        });
    }
    if args.emit_plot_data {
        result["plot_data"] = plot_data(&data, &report, &ds.labels)?;
    }
    let mut config = cfg.echo();
    config["data"] = json!(args.data.display().to_string());
    config["unconditional"] = json!(args.unconditional);
    config["emit_plot_data"] = json!(args.emit_plot_data);
    config["target_attr"] = json!(args.target_attr);
    let doc = envelope("estimate", config, labels(&ds.labels), output::space(&space), result);
    Ok(Output::json(&doc))
}

fn statistic_name(stat: Statistic) -> String {
    match stat {
        Statistic::MaxContrast(a) => format!("T_[{}]", a + 1),
        Statistic::Anova(a) => format!("F_[{}]", a + 1),
        Statistic::MaxContrastAll => "T".into(),
        Statistic::AnovaAll => "F".into(),
        Statistic::MaxOverSubgroups(Family::MaxContrast) => "max_a T_[a]".into(),
        Statistic::MaxOverSubgroups(Family::Anova) => "max_a F_[a]".into(),
    }
}

pub fn test_cmd(args: &TestArgs) -> Result<Output, CliError> {
    let cfg = &args.config;
    cfg.validate()?;
    let ds = Dataset::from_path(&args.data)?;
    let data = ds.outcome_data(None)?;
    let pop = data.population();
    let h = pop.num_attrs();
    let design = cfg.design(pop, Some(data.composition()))?;
    let null = if args.null.trim() == "sharp" {
        Null::Sharp
    } else {
        match args.null.trim().parse::<usize>() {
            Ok(a) if (1..=h).contains(&a) => Null::Subgroup(a - 1),
            _ => return Err(CliError::Validation(format!("--null must be `sharp` or an attribute in 1..={h}"))),
        }
    };
    let stats: Vec<Statistic> = match null {
        Null::Subgroup(a) => vec![Statistic::MaxContrast(a), Statistic::Anova(a)],
        Null::Sharp => (0..h)
            .flat_map(|a| [Statistic::MaxContrast(a), Statistic::Anova(a)])
            .chain([
                Statistic::MaxContrastAll,
                Statistic::AnovaAll,
                Statistic::MaxOverSubgroups(Family::MaxContrast),
                Statistic::MaxOverSubgroups(Family::Anova),
            ])
            .collect(),
    };
    let mut rows = Vec::new();
    for stat in stats {
        let mut spec = TestSpec::new(null, stat, cfg.draws, cfg.seed);
        spec.exhaustive = match args.exhaustive {
            Exhaustive::Auto => ExhaustiveMode::Auto,
            Exhaustive::Never => ExhaustiveMode::Never,
            Exhaustive::Always => ExhaustiveMode::Always,
        };
        let res = randomization_test_with(&data, &design, &spec, |count: u64, eval: &(dyn Fn(u64) -> peerfx_core::Result<f64> + Sync)| {
            (0..count).into_par_iter().map(eval).collect()
        })?;
        rows.push(json!({
            "statistic": statistic_name(stat),
            "observed": num(res.observed),
            "p_value": num(res.p_value),
            "draws": res.draws,
            "exceed": res.exceed,
            "exhaustive": res.exhaustive,
            "reference_mean": num(res.reference_mean),
            "reference_max": num(res.reference_max),
        }));
    }
    let result = json!({
        "null": match null { Null::Sharp => json!("sharp"), Null::Subgroup(a) => json!({ "attribute": a + 1 }) },
        "reference_design": design_json(&design),
        "tests": rows,
    });
    let mut config = cfg.echo();
    config["data"] = json!(args.data.display().to_string());
    config["null"] = json!(args.null);
    config["exhaustive"] = json!(format!("{:?}", args.exhaustive).to_lowercase());
    let doc = envelope("test", config, labels(&ds.labels), output::space(data.space()), result);
    Ok(Output::json(&doc))
}

fn check_new_counts(counts: &[usize], space: &TreatmentSpace) -> Result<(), CliError> {
    let n: usize = counts.iter().sum();
    if n == 0 || !n.is_multiple_of(space.group_size()) {
        return Err(CliError::Validation(format!("new population of {n} units does not split into groups of {}", space.group_size())));
    }
    Ok(())
}

fn composition_json(l: &[u64], space: &TreatmentSpace) -> Value {
    Value::Array(
        l.iter()
            .enumerate()
            .filter(|(_, &x)| x > 0)
            .map(|(t, &x)| json!({ "group_set": multiset(space.composition(t)), "count": x }))
            .collect(),
    )
}

pub fn optimize_cmd(args: &OptimizeArgs) -> Result<Output, CliError> {
    let cfg = &args.config;
    cfg.validate()?;
    let ds = Dataset::from_path(&args.data)?;
    let data = ds.outcome_data(None)?;
    let space = data.space().clone();
    let counts = parse_counts(&args.new_counts, &ds.labels)?;
    check_new_counts(&counts, &space)?;
    let (kernel, inference) = estimation_kernel(cfg, &data, args.unconditional)?;
    let yhat = peerfx_core::estimator::yhat(&data, &kernel);
    let solver = match args.solver {
        SolverKind::Auto => Solver::Auto,
        SolverKind::Enumerate => Solver::Enumerate,
        SolverKind::BranchAndBound => Solver::BranchAndBound,
    };
    let best = optimal_composition(&yhat, &counts, &space, solver)?;
    let coef = objective_coefficients(&yhat, &space)?;
    let result = json!({
        "inference": inference,
        "new_counts": counts,
        "coefficients": nums(&coef),
        "l": best.l,
        "groups": composition_json(&best.l, &space),
        "objective": num(best.objective),
        "solver": if best.enumerated { "enumeration" } else { "branch-and-bound" },
    });
    let mut config = cfg.echo();
    config["data"] = json!(args.data.display().to_string());
    config["new_counts"] = json!(args.new_counts);
    config["unconditional"] = json!(args.unconditional);
    config["solver"] = json!(format!("{:?}", args.solver).to_lowercase());
    let doc = envelope("optimize", config, labels(&ds.labels), output::space(&space), result);
    Ok(Output::json(&doc))
}

pub fn fiducial_cmd(args: &FiducialArgs) -> Result<Output, CliError> {
    let cfg = &args.config;
    cfg.validate()?;
    if cfg.draws < 1 {
        return Err(CliError::Validation("--draws must be at least 1".into()));
    }
    let ds = Dataset::from_path(&args.data)?;
    let data = ds.outcome_data(None)?;
    let space = data.space().clone();
    let counts = parse_counts(&args.new_counts, &ds.labels)?;
    check_new_counts(&counts, &space)?;
    // joint inference always conditions on the observed composition
    let (_, inference) = estimation_kernel(cfg, &data, false)?;
    let joint = joint_inference(&data)?;
    let res = fiducial_distribution_with(&joint, &counts, &space, cfg.draws, cfg.seed, |count: u64, eval: &(dyn Fn(u64) -> usize + Sync)| {
        (0..count).into_par_iter().map(eval).collect()
    })?;
    let rows: Vec<Value> = res
        .rows
        .iter()
        .map(|row| {
            json!({
                "probability": num(row.probability),
                "outcome": num(row.outcome),
                "count": row.count,
                "l": row.l,
                "groups": composition_json(&row.l, &space),
            })
        })
        .collect();
    let result = json!({
        "inference": inference,
        "new_counts": counts,
        "draws": res.draws,
        "seed": res.seed,
        "rows": rows,
    });
    let mut config = cfg.echo();
    config["data"] = json!(args.data.display().to_string());
    config["new_counts"] = json!(args.new_counts);
    let doc = envelope("fiducial", config, labels(&ds.labels), output::space(&space), result);
    Ok(Output::json(&doc))
}

pub fn oracle_check(suite: &str, seed: u64) -> Result<Output, CliError> {
    let checks = run_suite(suite, seed)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let result = json!({
        "suite": suite,
        "passed": failed == 0,
        "checks_run": checks.len(),
        "failures": failed,
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "instance": c.instance,
            "compared": c.compared,
            "max_error": num(c.max_error),
            "tolerance": num(c.tolerance),
            "passed": c.passed,
        })).collect::<Vec<_>>(),
    });
    let doc = envelope("oracle-check", json!({ "suite": suite, "seed": seed }), Value::Null, Value::Null, result);
    let mut out = Output::json(&doc);
    if failed > 0 {
        out.code = CliError::Oracle(String::new()).exit_code();
    }
    Ok(out)
}

