//! Command-line arguments and the shared run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use peerfx_core::estimator::all_contrasts;
use peerfx_core::{Design, Population};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Parser)]
#[command(name = "peerfx", version, about = "Randomization-based inference for peer effects in randomly formed groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List peer sets and group sets in canonical order
    Enumerate {
        /// Number of attributes
        #[arg(long)]
        h: usize,
        /// Peers per unit
        #[arg(long)]
        k: usize,
    },
    /// Draw a group assignment for a dataset
    Assign(AssignArgs),
    /// Dump the assignment probability kernel
    Probs(ProbsArgs),
    /// Point estimates, variance estimates and intervals
    Estimate(EstimateArgs),
    /// Randomization tests of the sharp or subgroup null
    Test(TestArgs),
    /// Composition vector maximizing the estimated total outcome
    Optimize(OptimizeArgs),
    /// Fiducial distribution of the optimal composition vector
    Fiducial(FiducialArgs),
    /// Compare closed forms with exhaustive enumeration on small populations
    OracleCheck {
        /// `standard` (every check) or `kernel` (probability kernels only)
        #[arg(long, default_value = "standard")]
        suite: String,
        /// Seed for the random science tables
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignKind {
    /// Random partitioning
    Rp,
    /// Complete randomization with a fixed composition vector
    Cr,
}

/// Options shared by the analysis commands.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[arg(long, value_enum, default_value = "rp")]
    pub design: DesignKind,
    /// Composition vector over the canonical group-set order, comma separated
    #[arg(long)]
    pub l: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub draws: u64,
    /// `all`, or pairs of 1-based peer-set positions such as `1-4,2-3`
    #[arg(long, default_value = "all")]
    pub contrasts: String,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Peers per unit (taken from the group column when present)
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub config: RunConfig,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ProbsArgs {
    /// Dataset; alternatively give `--counts`
    #[arg(long, conflicts_with = "counts")]
    pub data: Option<PathBuf>,
    /// Units per attribute, comma separated
    #[arg(long)]
    pub counts: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: RunConfig,
    /// Use the random-partitioning kernel instead of conditioning on the observed composition
    #[arg(long)]
    pub unconditional: bool,
    /// Add per-cell means with interval endpoints for bar charts
    #[arg(long)]
    pub emit_plot_data: bool,
    /// Also estimate effects for a target subpopulation of this attribute (1-based)
    #[arg(long)]
    pub target_attr: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Exhaustive {
    Auto,
    Never,
    Always,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: RunConfig,
    /// `sharp`, or a 1-based attribute for that subgroup's null
    #[arg(long, default_value = "sharp")]
    pub null: String,
    /// Enumerate the reference distribution exactly
    #[arg(long, value_enum, default_value = "auto")]
    pub exhaustive: Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Auto,
    Enumerate,
    BranchAndBound,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: RunConfig,
    /// Units per attribute in the new population: `5,3` in attribute order or `math=5,cs=3`
    #[arg(long)]
    pub new_counts: String,
    #[arg(long)]
    pub unconditional: bool,
    #[arg(long, value_enum, default_value = "auto")]
    pub solver: SolverKind,
}

#[derive(Debug, Args)]
pub struct FiducialArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub config: RunConfig,
    #[arg(long)]
    pub new_counts: String,
}

impl RunConfig {
    pub fn echo(&self) -> Value {
        json!({
            "design": match self.design { DesignKind::Rp => "rp", DesignKind::Cr => "cr" },
            "l": self.l,
            "alpha": num(self.alpha),
            "seed": self.seed,
            "draws": self.draws,
            "contrasts": self.contrasts,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Validation(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.design == DesignKind::Rp && self.l.is_some() {
            return Err(CliError::Validation("--l applies only to --design cr".into()));
        }
        Ok(())
    }

    /// The parsed `--l`, if given.
    pub fn composition(&self, pop: &Population) -> Result<Option<Vec<u64>>, CliError> {
        let Some(raw) = &self.l else { return Ok(None) };
        let l = parse_list::<u64>(raw, "--l")?;
        let t = pop.space().num_compositions();
        if l.len() != t {
            return Err(CliError::Validation(format!("--l has {} entries but there are {t} group sets", l.len())));
        }
        Ok(Some(l))
    }

    /// The design as configured. Complete randomization takes `l` from `--l`,
    /// falling back to the observed composition.
    pub fn design(&self, pop: &Population, observed: Option<Vec<u64>>) -> Result<Design, CliError> {
        match self.design {
            DesignKind::Rp => Ok(Design::RandomPartition),
            DesignKind::Cr => {
                let l = match (self.composition(pop)?, observed) {
                    (Some(l), _) | (None, Some(l)) => l,
                    (None, None) => return Err(CliError::Validation("--design cr needs --l or an observed group column".into())),
                };
                let design = Design::complete(l);
                design.validate(pop)?;
                Ok(design)
            }
        }
    }

    /// Contrasts as 0-based treatment index pairs.
    pub fn contrast_pairs(&self, num_treatments: usize) -> Result<Vec<(usize, usize)>, CliError> {
        if self.contrasts.trim() == "all" {
            return Ok(all_contrasts(num_treatments));
        }
        let mut out = Vec::new();
        for part in self.contrasts.split(',').map(str::trim) {
            let (a, b) = part.split_once('-').ok_or_else(|| CliError::Validation(format!("contrast `{part}` is not of the form i-j")))?;
            let parse = |s: &str| -> Result<usize, CliError> {
                match s.trim().parse::<usize>() {
                    Ok(i) if (1..=num_treatments).contains(&i) => Ok(i - 1),
                    _ => Err(CliError::Validation(format!("`{s}` is not a peer-set position in 1..={num_treatments}"))),
                }
            };
            out.push((parse(a)?, parse(b)?));
        }
        Ok(out)
    }
}

pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| CliError::Validation(format!("{what}: `{}` is not a valid entry", s.trim()))))
        .collect()
}

/// Per-attribute counts from `5,3` (attribute order) or `label=count` pairs.
pub fn parse_counts(raw: &str, labels: &[String]) -> Result<Vec<usize>, CliError> {
    if !raw.contains('=') {
        let counts = parse_list::<usize>(raw, "--new-counts")?;
        if counts.len() != labels.len() {
            return Err(CliError::Validation(format!("--new-counts has {} entries for {} attributes", counts.len(), labels.len())));
        }
        return Ok(counts);
    }
    let mut counts = vec![None; labels.len()];
    for part in raw.split(',') {
        let (label, count) = part.split_once('=').ok_or_else(|| CliError::Validation(format!("`{part}` is not label=count")))?;
        let a = labels
            .iter()
            .position(|l| l == label.trim())
            .ok_or_else(|| CliError::Validation(format!("unknown attribute label `{}`", label.trim())))?;
        let c = count.trim().parse::<usize>().map_err(|_| CliError::Validation(format!("`{}` is not a count", count.trim())))?;
        if counts[a].replace(c).is_some() {
            return Err(CliError::Validation(format!("attribute `{}` given twice", label.trim())));
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(a, c)| c.ok_or_else(|| CliError::Validation(format!("no count for attribute `{}`", labels[a]))))
        .collect()
}
