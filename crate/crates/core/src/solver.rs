//! Iterative tree projection: `x <- P_k(x + alpha A^T (b - A x))` from
//! `x = 0`, with either a constant stepsize (ITP) or an exact linesearch
//! guarded by backtracking (NITP), plus an empirical stable-point check of
//! the returned iterate.
//!
//! The support `G^m` of an iterate is the rooted subtree the projection
//! selected, which may hold entries that happen to be exactly zero. Before
//! the first iteration `G^0` is the support of `P_k(A^T b)`, the first
//! direction ITP moves along.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{columns, stream_rng, ProblemInstance, SupportSampler, SupportSolver};
use crate::projection::{project, BRUTE_FORCE_BUDGET};
use crate::tree::{enumerate_supports, support_count_bound, TreeSupport, TreeTopology};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StepRule {
    ItpConstant { alpha: f64 },
    Nitp { c: f64, kappa: f64 },
}

impl StepRule {
    pub fn name(&self) -> &'static str {
        match self {
            StepRule::ItpConstant { .. } => "itp",
            StepRule::Nitp { .. } => "nitp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub rule: StepRule,
    pub k: usize,
    pub max_iters: usize,
    /// Stop once `||A_G^T (b - A x)|| <= tol_gradient ||b||` and the support
    /// has held for three iterations.
    pub tol_gradient: f64,
    /// Stop once the residual moves by at most `tol_residual_change ||b||`
    /// in an iteration and the support has held for three iterations.
    pub tol_residual_change: f64,
    /// Slack for the stable-point verdict, relative to `||b||`.
    pub stable_slack: f64,
    /// Sampled candidate supports for the stable-point check when the full
    /// family is too large to scan.
    pub omega_budget: usize,
    pub seed: u64,
}

pub const STABLE_RUN: usize = 3;
const MAX_SHRINKS: usize = 10_000;

impl SolverConfig {
    fn with_rule(rule: StepRule, k: usize) -> Self {
        Self {
            rule,
            k,
            max_iters: 2000,
            tol_gradient: 1e-10,
            tol_residual_change: 1e-12,
            stable_slack: 1e-8,
            omega_budget: 2000,
            seed: 0,
        }
    }

    pub fn itp(k: usize, alpha: f64) -> Self {
        Self::with_rule(StepRule::ItpConstant { alpha }, k)
    }

    /// ITP with the asymptotically optimal stepsize at `rho = k / n`.
    pub fn itp_optimal(k: usize, n: usize, order: usize) -> Result<Self> {
        let alpha = crate::theory::optimal_alpha(order, k as f64 / n as f64)?;
        Ok(Self::itp(k, alpha))
    }

    pub fn nitp(k: usize, c: f64, kappa: f64) -> Self {
        Self::with_rule(StepRule::Nitp { c, kappa }, k)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self.rule {
            StepRule::ItpConstant { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                return bad(format!("ITP stepsize must be positive, got {alpha}"))
            }
            StepRule::Nitp { c, .. } if !(c > 0.0 && c < 1.0) => {
                return bad(format!("NITP needs c in (0, 1), got {c}"))
            }
            StepRule::Nitp { c, kappa } if !(kappa * (1.0 - c) > 1.0 && kappa.is_finite()) => {
                return bad(format!(
                    "NITP needs kappa (1 - c) > 1, got kappa = {kappa}, c = {c}"
                ))
            }
            _ => {}
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.tol_gradient >= 0.0
            && self.tol_residual_change >= 0.0
            && self.stable_slack >= 0.0)
        {
            return bad("tolerances must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientStationary,
    SupportStable,
    MaxIters,
}

/// What NITP's stepsize selection did on one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NitpStep {
    pub linesearch_alpha: f64,
    pub alpha: f64,
    /// The linesearch step left the support.
    pub support_changed: bool,
    pub shrinks: usize,
    /// `(1 - c) ||dx||^2 / ||A dx||^2` for the accepted step, when the
    /// backtracking loop ran.
    pub exit_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StablePointCheck {
    /// `||A_G^T (b - A x)||`.
    pub gradient_on_support_norm: f64,
    pub alpha_lower: f64,
    /// Smallest `||x_{G\W}|| - alpha ||A_{W\G}^T (b - A x)||` over the
    /// tested supports `W != G`; infinite if none was tested.
    pub swap_margin: f64,
    pub omegas_tested: usize,
    pub exhaustive: bool,
    /// `||x_G - A_G^+ b|| / max(1, ||A_G^+ b||)`; absent when `A_G` is rank
    /// deficient.
    pub pinv_deviation: Option<f64>,
}

impl StablePointCheck {
    /// Both stable-point conditions hold up to the absolute slack `tol`.
    pub fn is_stable(&self, tol: f64) -> bool {
        self.gradient_on_support_norm <= tol && self.swap_margin >= -tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub variant: &'static str,
    pub x_hat: Vec<f64>,
    pub support: Vec<usize>,
    pub iterations: usize,
    /// `Psi(x^m) = ||b - A x^m||^2 / 2` for `m = 0..=iterations`.
    pub objective_trace: Vec<f64>,
    pub stepsize_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nitp_trace: Vec<NitpStep>,
    pub support_changes: usize,
    pub termination: Termination,
    pub stable_point_check: StablePointCheck,
}

impl SolverReport {
    /// `||x_hat - x|| / ||x||`, or `||x_hat||` when `x = 0`.
    pub fn relative_error(&self, x: &DVector<f64>) -> f64 {
        let diff: f64 = self
            .x_hat
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale = x.norm();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}

fn objective(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

fn restricted_norm(v: &DVector<f64>, support: &TreeSupport) -> f64 {
    support
        .indices()
        .iter()
        .map(|&i| v[i] * v[i])
        .sum::<f64>()
        .sqrt()
}

/// One generic ITP step: `P_k(x + alpha A^T (b - A x))`.
pub fn itp_step(
    topology: &TreeTopology,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    alpha: f64,
    k: usize,
) -> Result<(DVector<f64>, TreeSupport)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stepsize must be positive, got {alpha}"
        )));
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if a.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: x.len(),
        });
    }
    let g = a.tr_mul(&(b - a * x));
    step_along(topology, x, &g, alpha, k)
}

fn step_along(
    topology: &TreeTopology,
    x: &DVector<f64>,
    g: &DVector<f64>,
    alpha: f64,
    k: usize,
) -> Result<(DVector<f64>, TreeSupport)> {
    let trial = x + g * alpha;
    let p = project(topology, trial.as_slice(), k)?;
    Ok((DVector::from_vec(p.projected), p.support))
}

struct Run<'a> {
    inst: &'a ProblemInstance,
    config: &'a SolverConfig,
    b_norm: f64,
}

pub fn solve_itp(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolverReport> {
    match config.rule {
        StepRule::ItpConstant { .. } => solve(instance, config),
        StepRule::Nitp { .. } => Err(Error::InvalidArgument(
            "solve_itp needs an ITP config".into(),
        )),
    }
}

pub fn solve_nitp(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolverReport> {
    match config.rule {
        StepRule::Nitp { .. } => solve(instance, config),
        StepRule::ItpConstant { .. } => Err(Error::InvalidArgument(
            "solve_nitp needs an NITP config".into(),
        )),
    }
}

/// Runs whichever variant `config` names.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let n_signal = instance.n_signal();
    if config.k > n_signal {
        return Err(Error::InfeasibleSparsity {
            k: config.k,
            n_nodes: n_signal,
        });
    }
    let run = Run {
        inst: instance,
        config,
        b_norm: instance.b.norm(),
    };
    run.iterate()
}

impl Run<'_> {
    fn iterate(&self) -> Result<SolverReport> {
        let a = &self.inst.matrix_a;
        let b = &self.inst.b;
        let topology = &self.inst.topology;
        let k = self.config.k;

        let mut x = DVector::zeros(self.inst.n_signal());
        let mut r = b.clone();
        let mut g = a.tr_mul(&r);
        let mut support = project(topology, g.as_slice(), k)?.support;
        let mut objective_trace = vec![objective(&r)];
        let mut stepsize_trace = Vec::new();
        let mut nitp_trace = Vec::new();
        let mut support_changes = 0;
        let mut unchanged_run = 0;
        let mut termination = Termination::MaxIters;

        for _ in 0..self.config.max_iters {
            let (alpha, next, next_support) = match self.config.rule {
                StepRule::ItpConstant { alpha } => {
                    let (next, s) = step_along(topology, &x, &g, alpha, k)?;
                    (alpha, next, s)
                }
                StepRule::Nitp { c, kappa } => {
                    match self.nitp_stepsize(&x, &g, &support, c, kappa)? {
                        Some((step, next, s)) => {
                            nitp_trace.push(step);
                            (step.alpha, next, s)
                        }
                        None => {
                            termination = Termination::GradientStationary;
                            break;
                        }
                    }
                }
            };
            let next_r = b - a * &next;
            let residual_change = (&next_r - &r).norm();

            if next_support == support {
                unchanged_run += 1;
            } else {
                support_changes += 1;
                unchanged_run = 0;
            }
            x = next;
            r = next_r;
            g = a.tr_mul(&r);
            support = next_support;
            stepsize_trace.push(alpha);
            objective_trace.push(objective(&r));

            if unchanged_run >= STABLE_RUN {
                if restricted_norm(&g, &support) <= self.config.tol_gradient * self.b_norm {
                    termination = Termination::GradientStationary;
                    break;
                }
                if residual_change <= self.config.tol_residual_change * self.b_norm {
                    termination = Termination::SupportStable;
                    break;
                }
            }
        }

        let alpha_lower = stepsize_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        let alpha_lower = match (self.config.rule, alpha_lower.is_finite()) {
            (_, true) => alpha_lower,
            (StepRule::ItpConstant { alpha }, false) => alpha,
            (StepRule::Nitp { .. }, false) => 0.0,
        };
        let stable_point_check = verify_stable_point_on(
            self.inst,
            &x,
            &support,
            alpha_lower,
            self.config.omega_budget,
            self.config.seed,
        );
        Ok(SolverReport {
            variant: self.config.rule.name(),
            iterations: stepsize_trace.len(),
            x_hat: x.as_slice().to_vec(),
            support: support.into_indices(),
            objective_trace,
            stepsize_trace,
            nitp_trace,
            support_changes,
            termination,
            stable_point_check,
        })
    }

    /// Exact linesearch on the current support, then shrinkage while the
    /// projected step fails the sufficient-decrease test. `None` means the
    /// gradient vanished on the support.
    fn nitp_stepsize(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
        support: &TreeSupport,
        c: f64,
        kappa: f64,
    ) -> Result<Option<(NitpStep, DVector<f64>, TreeSupport)>> {
        let a = &self.inst.matrix_a;
        let topology = &self.inst.topology;
        let k = self.config.k;

        let mut g_gamma = DVector::zeros(x.len());
        for &i in support.indices() {
            g_gamma[i] = g[i];
        }
        let numerator = g_gamma.norm_squared();
        let denominator = (a * &g_gamma).norm_squared();
        if !(denominator >= 1e-300) || numerator == 0.0 {
            return Ok(None);
        }
        let linesearch_alpha = numerator / denominator;
        let mut alpha = linesearch_alpha;
        let (mut trial, mut trial_support) = step_along(topology, x, g, alpha, k)?;
        if trial_support == *support {
            let step = NitpStep {
                linesearch_alpha,
                alpha,
                support_changed: false,
                shrinks: 0,
                exit_ratio: None,
            };
            return Ok(Some((step, trial, trial_support)));
        }

        let ratio = |trial: &DVector<f64>| {
            let dx = trial - x;
            let adx = (a * &dx).norm_squared();
            if adx > 0.0 {
                (1.0 - c) * dx.norm_squared() / adx
            } else {
                f64::INFINITY
            }
        };
        let mut exit_ratio = ratio(&trial);
        let mut shrinks = 0;
        while alpha >= exit_ratio {
            if shrinks == MAX_SHRINKS {
                return Err(Error::InvalidArgument(
                    "NITP backtracking did not terminate".into(),
                ));
            }
            alpha /= kappa * (1.0 - c);
            (trial, trial_support) = step_along(topology, x, g, alpha, k)?;
            exit_ratio = ratio(&trial);
            shrinks += 1;
        }
        let step = NitpStep {
            linesearch_alpha,
            alpha,
            support_changed: true,
            shrinks,
            exit_ratio: Some(exit_ratio),
        };
        Ok(Some((step, trial, trial_support)))
    }
}

/// Candidate supports one leaf swap away from `gamma`: drop a leaf, add a
/// node whose parent is still present.
pub fn leaf_swap_neighbours(topology: &TreeTopology, gamma: &TreeSupport) -> Vec<TreeSupport> {
    let inside = |i: usize| gamma.contains(i);
    let leaves: Vec<usize> = gamma
        .indices()
        .iter()
        .cloned()
        .filter(|&v| v != topology.root() && !topology.children(v).iter().any(|&c| inside(c)))
        .collect();
    let boundary: Vec<usize> = gamma
        .indices()
        .iter()
        .flat_map(|&v| topology.children(v).iter().cloned())
        .filter(|&c| !inside(c))
        .collect();
    let mut out = Vec::new();
    for &leaf in &leaves {
        for &add in &boundary {
            if topology.parent(add) == Some(leaf) {
                continue;
            }
            let mut idx: Vec<usize> = gamma
                .indices()
                .iter()
                .cloned()
                .filter(|&i| i != leaf)
                .collect();
            idx.push(add);
            idx.sort_unstable();
            out.push(TreeSupport::from_sorted_unchecked(idx));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Evidence that `x_bar` is an `alpha_lower`-stable point, on the support
/// the projection assigns to it.
pub fn verify_stable_point(
    instance: &ProblemInstance,
    x_bar: &DVector<f64>,
    alpha_lower: f64,
    omega_budget: usize,
    seed: u64,
) -> Result<StablePointCheck> {
    let k = instance.k.min(instance.n_signal());
    let gamma = project(&instance.topology, x_bar.as_slice(), k)?.support;
    Ok(verify_stable_point_on(
        instance,
        x_bar,
        &gamma,
        alpha_lower,
        omega_budget,
        seed,
    ))
}

/// As [`verify_stable_point`] with the support `gamma` given explicitly.
///
/// Every `W` of size `|G|` is scanned when the family fits the enumeration
/// budget; otherwise `omega_budget` random supports plus every leaf-swap
/// neighbour of `G` are tested.
pub fn verify_stable_point_on(
    instance: &ProblemInstance,
    x_bar: &DVector<f64>,
    gamma: &TreeSupport,
    alpha_lower: f64,
    omega_budget: usize,
    seed: u64,
) -> StablePointCheck {
    let a = &instance.matrix_a;
    let topology = &instance.topology;
    let r = &instance.b - a * x_bar;
    let g = a.tr_mul(&r);
    let k = gamma.cardinality();

    let margin = |omega: &TreeSupport| -> f64 {
        let lhs: f64 = gamma
            .indices()
            .iter()
            .filter(|&&i| !omega.contains(i))
            .map(|&i| x_bar[i] * x_bar[i])
            .sum::<f64>()
            .sqrt();
        let rhs: f64 = omega
            .indices()
            .iter()
            .filter(|&&i| !gamma.contains(i))
            .map(|&i| g[i] * g[i])
            .sum::<f64>()
            .sqrt();
        lhs - alpha_lower * rhs
    };

    let mut swap_margin = f64::INFINITY;
    let mut omegas_tested = 0;
    let mut test = |omega: &TreeSupport| {
        if omega != gamma {
            swap_margin = swap_margin.min(margin(omega));
            omegas_tested += 1;
        }
    };
    let exhaustive = support_count_bound(topology, k) <= BRUTE_FORCE_BUDGET;
    if exhaustive {
        enumerate_supports(topology, k).for_each(|w| test(&w));
    } else {
        leaf_swap_neighbours(topology, gamma)
            .iter()
            .for_each(&mut test);
        if let Ok(sampler) = SupportSampler::new(topology, k) {
            let mut rng = stream_rng(seed, 0);
            for _ in 0..omega_budget {
                test(&sampler.sample(&mut rng));
            }
        }
    }

    let pinv_deviation = SupportSolver::new(columns(a, gamma.indices()))
        .ok()
        .map(|solver| {
            let ls = solver.pinv_apply(&instance.b);
            let diff: f64 = gamma
                .indices()
                .iter()
                .zip(ls.iter())
                .map(|(&i, v)| (x_bar[i] - v) * (x_bar[i] - v))
                .sum::<f64>()
                .sqrt();
            diff / ls.norm().max(1.0)
        });

    StablePointCheck {
        gradient_on_support_norm: restricted_norm(&g, gamma),
        alpha_lower,
        swap_margin,
        omegas_tested,
        exhaustive,
        pinv_deviation,
    }
}
