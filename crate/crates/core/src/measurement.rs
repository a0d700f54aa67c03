//! Gaussian measurement ensembles, tree-sparse signals, noise, and the dense
//! linear algebra the solvers and diagnostics share.
//!
//! All randomness flows from ChaCha8 streams addressed by `(seed, stream)`,
//! so every parallel unit draws from its own independent stream and results
//! do not depend on scheduling. Gaussians come from Box-Muller.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::BRUTE_FORCE_BUDGET;
use crate::tree::{enumerate_supports, support_count_bound, TreeSupport, TreeTopology};

/// Random stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed for `(seed, stream)`, for handing to functions that take a
/// plain seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

/// Standard normal draws by the Box-Muller transform, caching the second
/// variate of each pair.
pub struct Gaussian<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> Gaussian<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// `n x n_signal` matrix with i.i.d. `N(0, 1/n)` entries, filled row by row.
pub fn sample_gaussian_matrix(n: usize, n_signal: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || n_signal == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions must be positive, got {n} x {n_signal}"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut g = Gaussian::new(stream_rng(seed, 0));
    let entries: Vec<f64> = (0..n * n_signal).map(|_| scale * g.sample()).collect();
    Ok(DMatrix::from_row_slice(n, n_signal, &entries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffLaw {
    UnitGaussian,
    Rademacher,
    FlatOnes,
}

impl CoeffLaw {
    pub fn name(&self) -> &'static str {
        match self {
            CoeffLaw::UnitGaussian => "unit_gaussian",
            CoeffLaw::Rademacher => "rademacher",
            CoeffLaw::FlatOnes => "flat_ones",
        }
    }
}

impl std::str::FromStr for CoeffLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit_gaussian" | "gaussian" => Ok(CoeffLaw::UnitGaussian),
            "rademacher" => Ok(CoeffLaw::Rademacher),
            "flat_ones" | "ones" => Ok(CoeffLaw::FlatOnes),
            other => Err(Error::InvalidArgument(format!(
                "unknown coefficient law {other:?}"
            ))),
        }
    }
}

/// Draws size-`k` supports: uniformly from the full enumeration when it
/// fits the budget, otherwise by random tree growth.
///
/// Growth starts at the root and repeatedly adds a uniformly chosen node of
/// the current boundary. It is not uniform over supports; deep narrow
/// subtrees are less likely than bushy ones.
pub struct SupportSampler<'a> {
    topology: &'a TreeTopology,
    k: usize,
    enumerated: Option<Vec<TreeSupport>>,
}

impl<'a> SupportSampler<'a> {
    pub fn new(topology: &'a TreeTopology, k: usize) -> Result<Self> {
        let n = topology.n_nodes();
        if k == 0 || k > n {
            return Err(Error::InfeasibleSparsity { k, n_nodes: n });
        }
        let enumerated = (support_count_bound(topology, k) <= BRUTE_FORCE_BUDGET)
            .then(|| enumerate_supports(topology, k).collect());
        Ok(Self {
            topology,
            k,
            enumerated,
        })
    }

    pub fn is_uniform(&self) -> bool {
        self.enumerated.is_some()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> TreeSupport {
        if let Some(all) = &self.enumerated {
            return all[rng.gen_range(0..all.len())].clone();
        }
        let root = self.topology.root();
        let mut chosen = vec![root];
        let mut boundary: Vec<usize> = self.topology.children(root).to_vec();
        while chosen.len() < self.k {
            let node = boundary.swap_remove(rng.gen_range(0..boundary.len()));
            chosen.push(node);
            boundary.extend_from_slice(self.topology.children(node));
        }
        chosen.sort_unstable();
        TreeSupport::from_sorted_unchecked(chosen)
    }
}

fn coefficient<R: RngCore>(law: CoeffLaw, g: &mut Gaussian<R>) -> f64 {
    match law {
        CoeffLaw::UnitGaussian => loop {
            let z = g.sample();
            if z != 0.0 {
                break z;
            }
        },
        CoeffLaw::Rademacher => {
            if g.rng_mut().gen::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        CoeffLaw::FlatOnes => 1.0,
    }
}

/// A vector whose support is a random rooted subtree of exactly `k` nodes.
pub fn sample_tree_sparse_signal(
    topology: &TreeTopology,
    k: usize,
    law: CoeffLaw,
    seed: u64,
) -> Result<DVector<f64>> {
    let sampler = SupportSampler::new(topology, k)?;
    let mut rng = stream_rng(seed, 0);
    let support = sampler.sample(&mut rng);
    let mut g = Gaussian::new(stream_rng(seed, 1));
    let mut x = DVector::zeros(topology.n_nodes());
    for &i in support.indices() {
        x[i] = coefficient(law, &mut g);
    }
    Ok(x)
}

/// Noise with i.i.d. `N(0, sigma^2 / n)` entries, so `E||e||^2 = sigma^2`.
pub fn sample_noise(n: usize, sigma: f64, seed: u64) -> Result<DVector<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let scale = sigma / (n as f64).sqrt();
    let mut g = Gaussian::new(stream_rng(seed, 0));
    Ok(DVector::from_fn(n, |_, _| scale * g.sample()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub matrix_a: DMatrix<f64>,
    pub x_star: DVector<f64>,
    pub noise_e: DVector<f64>,
    pub b: DVector<f64>,
    pub sigma: f64,
    pub topology: TreeTopology,
    pub k: usize,
    pub seed: u64,
}

/// Everything needed to draw a [`ProblemInstance`].
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub n: usize,
    pub topology: TreeTopology,
    pub k: usize,
    pub sigma: f64,
    pub law: CoeffLaw,
    pub seed: u64,
}

impl ProblemInstance {
    /// Draws `A`, `x*` and `e` from independent streams of `spec.seed`.
    pub fn generate(spec: &InstanceSpec) -> Result<Self> {
        let n_signal = spec.topology.n_nodes();
        let matrix_a = sample_gaussian_matrix(spec.n, n_signal, derive_seed(spec.seed, 1))?;
        let x_star =
            sample_tree_sparse_signal(&spec.topology, spec.k, spec.law, derive_seed(spec.seed, 2))?;
        let noise_e = sample_noise(spec.n, spec.sigma, derive_seed(spec.seed, 3))?;
        Self::assemble(
            matrix_a,
            x_star,
            noise_e,
            spec.sigma,
            spec.topology.clone(),
            spec.k,
            spec.seed,
        )
    }

    /// Builds an instance from its parts, computing `b = A x* + e`.
    pub fn assemble(
        matrix_a: DMatrix<f64>,
        x_star: DVector<f64>,
        noise_e: DVector<f64>,
        sigma: f64,
        topology: TreeTopology,
        k: usize,
        seed: u64,
    ) -> Result<Self> {
        let (n, n_signal) = matrix_a.shape();
        if n_signal != topology.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: topology.n_nodes(),
                got: n_signal,
            });
        }
        if x_star.len() != n_signal {
            return Err(Error::DimensionMismatch {
                expected: n_signal,
                got: x_star.len(),
            });
        }
        if noise_e.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: noise_e.len(),
            });
        }
        let b = &matrix_a * &x_star + &noise_e;
        Ok(Self {
            matrix_a,
            x_star,
            noise_e,
            b,
            sigma,
            topology,
            k,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix_a.nrows()
    }

    pub fn n_signal(&self) -> usize {
        self.matrix_a.ncols()
    }

    /// Sorted indices of the nonzero entries of `x*`.
    pub fn true_support(&self) -> Vec<usize> {
        support_of(&self.x_star)
    }
}

pub fn support_of(x: &DVector<f64>) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Least-squares solver for a column submatrix `A_G`, via column-pivoted QR.
pub struct SupportSolver {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    qr: nalgebra::linalg::ColPivQR<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl SupportSolver {
    /// Factorises `A_G`, refusing it unless it has full column rank with
    /// every pivot above `1e-12 ||A_G||_F`.
    pub fn new(a_gamma: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = a_gamma.shape();
        if cols > rows {
            return Err(Error::RankDeficient);
        }
        let tol = 1e-12 * a_gamma.norm();
        let qr = a_gamma.col_piv_qr();
        let r = qr.r();
        if (0..cols).any(|i| !(r[(i, i)].abs() > tol)) {
            return Err(Error::RankDeficient);
        }
        Ok(Self { q: qr.q(), r, qr })
    }

    /// `A_G^+ v`.
    pub fn pinv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut z = self
            .r
            .solve_upper_triangular(&self.q.tr_mul(v))
            .expect("pivots were checked non-zero");
        self.qr.p().inv_permute_rows(&mut z);
        z
    }

    /// `(I - A_G A_G^+) v`, the component of `v` orthogonal to range(`A_G`).
    pub fn orthogonal_residual(&self, v: &DVector<f64>) -> DVector<f64> {
        v - &self.q * self.q.tr_mul(v)
    }
}

pub fn columns(a: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    a.select_columns(indices)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RipEstimate {
    pub order_s: usize,
    /// Largest `1 - lambda_min` seen.
    pub lower_hat: f64,
    /// Largest `lambda_max - 1` seen.
    pub upper_hat: f64,
    pub n_supports_sampled: usize,
    /// `s` exceeded the number of rows, so every Gram matrix was singular.
    pub singular: bool,
    /// Supports were drawn uniformly from a full enumeration.
    pub uniform: bool,
}

const RIP_CHUNK: usize = 256;

/// Extreme eigenvalues of `A_G^T A_G`.
pub fn gram_extremes(a: &DMatrix<f64>, support: &[usize]) -> (f64, f64) {
    let sub = columns(a, support);
    let gram = sub.tr_mul(&sub);
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Monte Carlo lower estimate of the order-`s` tree-RIP constants of `A`.
///
/// Samples are drawn in fixed chunks, chunk `c` from stream `c` of `seed`,
/// so the result is independent of thread count and the estimate for a
/// smaller `n_samples` only ever uses a prefix of the draws for a larger one.
pub fn estimate_tree_rip(
    a: &DMatrix<f64>,
    topology: &TreeTopology,
    s: usize,
    n_samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    if a.ncols() != topology.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: topology.n_nodes(),
            got: a.ncols(),
        });
    }
    let sampler = SupportSampler::new(topology, s)?;
    let chunks = n_samples.div_ceil(RIP_CHUNK);
    let (lower_hat, upper_hat) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let count = RIP_CHUNK.min(n_samples - c * RIP_CHUNK);
            let mut acc = (0.0f64, 0.0f64);
            for _ in 0..count {
                let support = sampler.sample(&mut rng);
                let (lo, hi) = gram_extremes(a, support.indices());
                acc.0 = acc.0.max(1.0 - lo);
                acc.1 = acc.1.max(hi - 1.0);
            }
            acc
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    Ok(RipEstimate {
        order_s: s,
        lower_hat,
        upper_hat,
        n_supports_sampled: n_samples,
        singular: s > a.nrows(),
        uniform: sampler.is_uniform(),
    })
}

/// The four norms of the stable-point condition on `gamma`, with `L` the
/// true support:
/// `||A_G^+ A_{L\G} x*||`, `||A_G^+ e||`,
/// `||A_{L\G}^T (I - A_G A_G^+) A_{L\G} x*||` and
/// `||A_{L\G}^T (I - A_G A_G^+) e||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionTerms {
    pub signal_leak: f64,
    pub noise_leak: f64,
    pub signal_residual: f64,
    pub noise_residual: f64,
}

pub fn stable_point_condition_terms(
    instance: &ProblemInstance,
    gamma: &TreeSupport,
) -> Result<ConditionTerms> {
    let a = &instance.matrix_a;
    let missed: Vec<usize> = instance
        .true_support()
        .into_iter()
        .filter(|i| !gamma.contains(*i))
        .collect();
    let solver = SupportSolver::new(columns(a, gamma.indices()))?;
    let a_missed = columns(a, &missed);
    let x_missed = DVector::from_iterator(missed.len(), missed.iter().map(|&i| instance.x_star[i]));
    let signal = &a_missed * &x_missed;
    let e = &instance.noise_e;
    Ok(ConditionTerms {
        signal_leak: solver.pinv_apply(&signal).norm(),
        noise_leak: solver.pinv_apply(e).norm(),
        signal_residual: a_missed.tr_mul(&solver.orthogonal_residual(&signal)).norm(),
        noise_residual: a_missed.tr_mul(&solver.orthogonal_residual(e)).norm(),
    })
}
