//! Oversampling thresholds `rho_hat`: the largest `k/n` ratio for which each
//! analysis still guarantees recovery.

use super::bounds::{prior_bound_domain_limit, prior_bound_tr};
use super::factors::{rip_factors, stable_point_sides, Variant};
use super::roots::bisect;
use crate::error::{Error, Result};

const RHO_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Analysis {
    Rip,
    StablePoint,
    Prior,
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Rip => "rip",
            Analysis::StablePoint => "sp",
            Analysis::Prior => "prior",
        }
    }
}

/// Solution of `mu_RIP(rho) = 1`. For ITP with [`Stepsize::Optimal`] the
/// stepsize is re-derived at every trial `rho`.
///
/// [`Stepsize::Optimal`]: super::Stepsize::Optimal
pub fn threshold_rip(order: usize, variant: Variant) -> Result<f64> {
    let excess = |rho: f64| match rip_factors(order, rho, variant) {
        Ok(f) => f.mu - 1.0,
        Err(_) => f64::NAN,
    };
    // Surface parameter errors instead of a generic bracket failure.
    rip_factors(order, RHO_FLOOR, variant)?;
    // mu exceeds 1 well before 1/3, where the bounds at 3 rho degenerate.
    bisect(excess, RHO_FLOOR, 0.25, "rho_hat RIP")
}

/// `mu_RIP(rho) - 1`, the defining residual of [`threshold_rip`].
pub fn threshold_rip_residual(order: usize, variant: Variant, rho: f64) -> Result<f64> {
    Ok(rip_factors(order, rho, variant)?.mu - 1.0)
}

fn sp_kappa(variant: Variant) -> f64 {
    match variant {
        Variant::Itp { .. } => 1.0,
        Variant::Nitp { kappa } => kappa,
    }
}

/// Solution of the stable-point threshold equation. Independent of the ITP
/// stepsize; NITP enters through `kappa`.
pub fn threshold_stable_point(order: usize, variant: Variant) -> Result<f64> {
    let kappa = sp_kappa(variant);
    if let Variant::Nitp { kappa } = variant {
        if kappa <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "kappa must exceed 1, got {kappa}"
            )));
        }
    }
    stable_point_sides(order, RHO_FLOOR, kappa)?;
    let excess = |rho: f64| match stable_point_sides(order, rho, kappa) {
        Ok((lhs, rhs)) => lhs - rhs,
        Err(_) => f64::NAN,
    };
    bisect(excess, RHO_FLOOR, 0.5 - RHO_FLOOR, "rho_hat SP")
}

/// LHS minus RHS of the stable-point threshold equation.
pub fn threshold_stable_point_residual(order: usize, variant: Variant, rho: f64) -> Result<f64> {
    let (lhs, rhs) = stable_point_sides(order, rho, sp_kappa(variant))?;
    Ok(lhs - rhs)
}

/// Level the symmetric constant `TR_3k` must stay below under the prior
/// analysis: `1/sqrt(3)` for ITP, `(11 - sqrt 3)/(11 + 21 sqrt 3)` for NITP.
/// The NITP constant is only known for `kappa = 1.1`.
pub fn prior_recovery_level(variant: Variant) -> Result<f64> {
    let s3 = 3f64.sqrt();
    match variant {
        Variant::Itp { .. } => Ok(1.0 / s3),
        Variant::Nitp { kappa } if (kappa - 1.1).abs() < 1e-12 => {
            Ok((11.0 - s3) / (11.0 + 21.0 * s3))
        }
        Variant::Nitp { kappa } => Err(Error::InvalidArgument(format!(
            "prior NITP recovery level is only available for kappa = 1.1, got {kappa}"
        ))),
    }
}

/// Threshold from the prior symmetric bound: solves `TR(3 rho) = level`.
/// Binary trees only.
pub fn threshold_prior(order: usize, variant: Variant) -> Result<f64> {
    if order != 2 {
        return Err(Error::InvalidArgument(
            "the prior bound is only available for binary trees".into(),
        ));
    }
    let level = prior_recovery_level(variant)?;
    let limit = prior_bound_domain_limit() / 3.0;
    let excess = |rho: f64| match prior_bound_tr(3.0 * rho) {
        Ok(r) => r - level,
        Err(_) => f64::NAN,
    };
    bisect(excess, 1e-12, limit * (1.0 - 1e-12), "rho_hat prior")
}

pub fn threshold(order: usize, variant: Variant, analysis: Analysis) -> Result<f64> {
    match analysis {
        Analysis::Rip => threshold_rip(order, variant),
        Analysis::StablePoint => threshold_stable_point(order, variant),
        Analysis::Prior => threshold_prior(order, variant),
    }
}

/// Measurements per unit sparsity implied by a threshold, `ceil(1/rho_hat)`.
pub fn oversampling_factor(rho_hat: f64) -> u64 {
    (1.0 / rho_hat).ceil() as u64
}
