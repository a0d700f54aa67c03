//! Monte Carlo phase experiments and threshold tables.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{derive_seed, CoeffLaw, InstanceSpec, ProblemInstance};
use crate::solver::{solve, SolverConfig, Termination};
use crate::theory::{oversampling_factor, threshold, Analysis, Variant};
use crate::tree::build_complete_tree;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Solver choice for an experiment. `alpha: None` means the optimal ITP
/// stepsize at each grid point's `k / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Algorithm {
    Itp { alpha: Option<f64> },
    Nitp { c: f64, kappa: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Itp { .. } => "itp",
            Algorithm::Nitp { .. } => "nitp",
        }
    }

    pub fn config(&self, k: usize, n: usize, order: usize) -> Result<SolverConfig> {
        Ok(match *self {
            Algorithm::Itp { alpha: Some(alpha) } => SolverConfig::itp(k, alpha),
            Algorithm::Itp { alpha: None } => SolverConfig::itp_optimal(k, n, order)?,
            Algorithm::Nitp { c, kappa } => SolverConfig::nitp(k, c, kappa),
        })
    }

    fn describe(&self) -> String {
        match self {
            Algorithm::Itp { alpha: Some(a) } => format!("itp alpha={a}"),
            Algorithm::Itp { alpha: None } => "itp alpha=optimal".into(),
            Algorithm::Nitp { c, kappa } => format!("nitp c={c} kappa={kappa}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub order: usize,
    pub n: usize,
    pub rho_grid: Vec<f64>,
    pub trials: usize,
    pub sigma: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Relative error at or below which a trial counts as exact recovery.
    pub success_tol: f64,
    /// Overrides the default tree size.
    pub n_signal: Option<usize>,
    pub law: CoeffLaw,
    pub max_iters: usize,
}

impl ExperimentSpec {
    pub fn new(order: usize, n: usize, rho_grid: Vec<f64>, algorithm: Algorithm) -> Self {
        Self {
            order,
            n,
            rho_grid,
            trials: 100,
            sigma: 0.0,
            algorithm,
            seed: 0,
            success_tol: 1e-6,
            n_signal: None,
            law: CoeffLaw::UnitGaussian,
            max_iters: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if !(self.success_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "success_tol must be positive".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.order < 2 {
            return Err(Error::InvalidOrder(self.order));
        }
        for &rho in &self.rho_grid {
            self.sparsity(rho)?;
        }
        Ok(())
    }

    pub fn sparsity(&self, rho: f64) -> Result<usize> {
        let k = (rho * self.n as f64).round();
        if !(k >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho = {rho} gives k = round(rho n) < 1 at n = {}",
                self.n
            )));
        }
        Ok(k as usize)
    }

    pub fn tree_size(&self, k: usize) -> usize {
        self.n_signal
            .unwrap_or_else(|| default_tree_size(self.order, k))
    }
}

/// Smallest complete `d`-ary tree with at least `20 k` nodes; for binary
/// trees `2^ceil(log2(20 k)) - 1`.
pub fn default_tree_size(order: usize, k: usize) -> usize {
    let target = 20 * k.max(1);
    let mut total = 1usize;
    let mut level = 1usize;
    while total < target {
        level *= order;
        total += level;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub rho: f64,
    pub k: usize,
    pub trial: usize,
    pub seed: u64,
    pub rel_error: f64,
    pub abs_error: f64,
    pub iterations: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMapRow {
    pub rho: f64,
    pub k: usize,
    pub n_signal: usize,
    pub success_rate: f64,
    pub mean_rel_error: f64,
    pub mean_abs_error: f64,
    pub mean_iters: f64,
    pub trials: usize,
}

impl PhaseMapRow {
    pub const CSV_HEADER: &'static str =
        "rho,k,n_signal,success_rate,mean_rel_error,mean_abs_error,mean_iters,trials";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6e},{:.6e},{},{}",
            self.rho,
            self.k,
            self.n_signal,
            self.success_rate,
            self.mean_rel_error,
            self.mean_abs_error,
            self.mean_iters,
            self.trials
        )
    }
}

fn trial_seed(seed: u64, grid_index: usize, trial: usize) -> u64 {
    derive_seed(seed, ((grid_index as u64) << 32) | trial as u64)
}

/// Solves every trial of every grid point, in parallel, returning outcomes
/// in grid-then-trial order.
pub fn run_trials(spec: &ExperimentSpec) -> Result<Vec<TrialOutcome>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.rho_grid.len())
        .flat_map(|g| (0..spec.trials).map(move |t| (g, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(g, t)| {
            let rho = spec.rho_grid[g];
            let k = spec.sparsity(rho)?;
            let topology = build_complete_tree(spec.tree_size(k), spec.order)?;
            let seed = trial_seed(spec.seed, g, t);
            let inst = ProblemInstance::generate(&InstanceSpec {
                n: spec.n,
                topology,
                k,
                sigma: spec.sigma,
                law: spec.law,
                seed,
            })?;
            let mut config = spec.algorithm.config(k, spec.n, spec.order)?;
            config.max_iters = spec.max_iters;
            config.seed = seed;
            let report = solve(&inst, &config)?;
            let rel_error = report.relative_error(&inst.x_star);
            let abs_error = if inst.x_star.norm() > 0.0 {
                rel_error * inst.x_star.norm()
            } else {
                rel_error
            };
            Ok(TrialOutcome {
                rho,
                k,
                trial: t,
                seed,
                rel_error,
                abs_error,
                iterations: report.iterations,
                termination: report.termination,
            })
        })
        .collect()
}

/// Whether a trial counts as exact recovery. A zero signal needs
/// `||x_hat|| <= 1e-12`.
pub fn is_success(outcome: &TrialOutcome, success_tol: f64, zero_signal: bool) -> bool {
    if zero_signal {
        outcome.abs_error <= 1e-12
    } else {
        outcome.rel_error <= success_tol
    }
}

pub fn aggregate(spec: &ExperimentSpec, outcomes: &[TrialOutcome]) -> Result<Vec<PhaseMapRow>> {
    spec.rho_grid
        .iter()
        .enumerate()
        .map(|(g, &rho)| {
            let k = spec.sparsity(rho)?;
            let rows = &outcomes[g * spec.trials..(g + 1) * spec.trials];
            let count = rows.len() as f64;
            let successes = rows
                .iter()
                .filter(|o| is_success(o, spec.success_tol, false))
                .count();
            Ok(PhaseMapRow {
                rho,
                k,
                n_signal: spec.tree_size(k),
                success_rate: successes as f64 / count,
                mean_rel_error: rows.iter().map(|o| o.rel_error).sum::<f64>() / count,
                mean_abs_error: rows.iter().map(|o| o.abs_error).sum::<f64>() / count,
                mean_iters: rows.iter().map(|o| o.iterations as f64).sum::<f64>() / count,
                trials: rows.len(),
            })
        })
        .collect()
}

pub fn run_phase_experiment(spec: &ExperimentSpec) -> Result<Vec<PhaseMapRow>> {
    let outcomes = run_trials(spec)?;
    aggregate(spec, &outcomes)
}

/// `# tree-itp <version> <command> key=value ...`
pub fn header_comment(command: &str, params: &[(&str, String)]) -> String {
    let mut line = format!("# tree-itp {VERSION} {command}");
    for (k, v) in params {
        line.push_str(&format!(" {k}={v}"));
    }
    line
}

pub fn phase_csv(spec: &ExperimentSpec, rows: &[PhaseMapRow]) -> String {
    let grid: Vec<String> = spec.rho_grid.iter().map(|r| r.to_string()).collect();
    let header = header_comment(
        "phase",
        &[
            ("seed", spec.seed.to_string()),
            ("d", spec.order.to_string()),
            ("n", spec.n.to_string()),
            ("rho", grid.join(";")),
            ("trials", spec.trials.to_string()),
            ("sigma", spec.sigma.to_string()),
            ("algorithm", spec.algorithm.describe().replace(' ', ";")),
            ("success_tol", spec.success_tol.to_string()),
            (
                "n_signal",
                spec.n_signal.map_or("default".into(), |v| v.to_string()),
            ),
            ("law", spec.law.name().into()),
            ("max_iters", spec.max_iters.to_string()),
        ],
    );
    let mut out = format!("{header}\n{}\n", PhaseMapRow::CSV_HEADER);
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub d: usize,
    pub variant: &'static str,
    pub analysis: &'static str,
    pub rho_hat: f64,
    /// `ceil(1 / rho_hat)`.
    pub reciprocal: u64,
}

impl ThresholdRow {
    pub const CSV_HEADER: &'static str = "d,variant,analysis,rho_hat,reciprocal";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6e},{}",
            self.d, self.variant, self.analysis, self.rho_hat, self.reciprocal
        )
    }
}

/// Every requested `(d, variant, analysis)` threshold. Combinations that
/// do not exist (the prior analysis beyond binary trees) are skipped.
pub fn emit_threshold_table(
    orders: &[usize],
    variants: &[Variant],
    analyses: &[Analysis],
) -> Result<Vec<ThresholdRow>> {
    let mut combos = Vec::new();
    for &d in orders {
        for &v in variants {
            for &an in analyses {
                if an == Analysis::Prior && d != 2 {
                    continue;
                }
                combos.push((d, v, an));
            }
        }
    }
    combos
        .into_par_iter()
        .map(|(d, v, an)| {
            let rho_hat = threshold(d, v, an)?;
            Ok(ThresholdRow {
                d,
                variant: v.name(),
                analysis: an.name(),
                rho_hat,
                reciprocal: oversampling_factor(rho_hat),
            })
        })
        .collect()
}

/// Current tree-RIP threshold against the prior symmetric-bound threshold
/// for binary trees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub variant: &'static str,
    pub rho_hat: f64,
    pub reciprocal: u64,
    pub prior_rho_hat: f64,
    pub prior_reciprocal: u64,
    /// `floor(rho_hat / prior_rho_hat)`, the ratio of the reciprocals.
    pub factor: u64,
}

impl ComparisonRow {
    pub const CSV_HEADER: &'static str =
        "variant,rho_hat,reciprocal,prior_rho_hat,prior_reciprocal,factor";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.6e},{},{:.6e},{},{}",
            self.variant,
            self.rho_hat,
            self.reciprocal,
            self.prior_rho_hat,
            self.prior_reciprocal,
            self.factor
        )
    }
}

pub fn comparison_table(kappa: f64) -> Result<Vec<ComparisonRow>> {
    [Variant::itp_optimal(), Variant::nitp(kappa)]
        .into_iter()
        .map(|v| {
            let rho_hat = threshold(2, v, Analysis::Rip)?;
            let prior = threshold(2, v, Analysis::Prior)?;
            Ok(ComparisonRow {
                variant: v.name(),
                rho_hat,
                reciprocal: oversampling_factor(rho_hat),
                prior_rho_hat: prior,
                prior_reciprocal: oversampling_factor(prior),
                factor: (rho_hat / prior).floor() as u64,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        assert_eq!(default_tree_size(2, 5), 127);
        assert_eq!(default_tree_size(2, 1), 31);
        assert_eq!(default_tree_size(2, 20), 511);
        assert_eq!(default_tree_size(4, 1), 21);
        for k in 1..200 {
            let n = default_tree_size(2, k);
            let want = (20 * k as u64).next_power_of_two() as usize - 1;
            assert_eq!(n, want, "k={k}");
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(2, 100, vec![0.001], Algorithm::Itp { alpha: None });
        assert!(spec.validate().is_err());
        spec.rho_grid = vec![0.02];
        assert!(spec.validate().is_ok());
        spec.trials = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let mut spec =
            ExperimentSpec::new(2, 100, vec![0.02, 0.05], Algorithm::Itp { alpha: None });
        spec.trials = 4;
        spec.seed = 9;
        let a = phase_csv(&spec, &run_phase_experiment(&spec).unwrap());
        let b = phase_csv(&spec, &run_phase_experiment(&spec).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("# tree-itp "));
        assert_eq!(a.lines().count(), 4);
    }

    #[test]
    fn comparison_factors() {
        let rows = comparison_table(1.1).unwrap();
        assert_eq!(rows[0].factor, 70);
        assert_eq!(rows[1].factor, 116);
        assert_eq!(rows[0].reciprocal, 115);
        assert_eq!(rows[1].reciprocal, 683);
    }

    #[test]
    fn threshold_table_skips_missing_combos() {
        let rows = emit_threshold_table(
            &[2, 4],
            &[Variant::itp_optimal()],
            &[Analysis::Rip, Analysis::Prior],
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.rho_hat > 0.0));
    }
}
