//! Convergence and stability factors, under both the tree-RIP analysis and
//! the stable-point analysis.

use super::bounds::{
    rip_bound_lower, rip_bound_upper, tail_bound_tif, tail_bound_til, tail_bound_tiu,
};
use crate::error::{Error, Result};

/// How the constant ITP stepsize is chosen as a function of `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stepsize {
    /// `2 / (2 + TU(3 rho) - TL(3 rho))`, equalising both branches of mu.
    Optimal,
    /// `1 / (1 + TU(2 rho))`, the largest stepsize covered by the
    /// convergence guarantee.
    ConvergenceCap,
    Fixed(f64),
}

impl Stepsize {
    pub fn resolve(self, order: usize, rho: f64) -> Result<f64> {
        match self {
            Stepsize::Optimal => optimal_alpha(order, rho),
            Stepsize::ConvergenceCap => Ok(1.0 / (1.0 + rip_bound_upper(order, 2.0 * rho)?)),
            Stepsize::Fixed(alpha) if alpha > 0.0 => Ok(alpha),
            Stepsize::Fixed(alpha) => Err(Error::InvalidArgument(format!(
                "stepsize must be positive, got {alpha}"
            ))),
        }
    }
}

/// Algorithm variant as seen by the theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Itp { alpha: Stepsize },
    Nitp { kappa: f64 },
}

impl Variant {
    pub fn itp_optimal() -> Self {
        Variant::Itp {
            alpha: Stepsize::Optimal,
        }
    }

    pub fn nitp(kappa: f64) -> Self {
        Variant::Nitp { kappa }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Itp { .. } => "itp",
            Variant::Nitp { .. } => "nitp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factors {
    pub mu: f64,
    pub xi: f64,
}

impl Factors {
    /// Noise amplification `xi / (1 - mu)` of the tree-RIP error bound;
    /// infinite once `mu >= 1`.
    pub fn noise_amplification(&self) -> f64 {
        if self.mu < 1.0 {
            self.xi / (1.0 - self.mu)
        } else {
            f64::INFINITY
        }
    }
}

fn check_third(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 / 3.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            quantity: "RIP factors",
            rho,
            reason: "requires 0 < rho < 1/3".into(),
        })
    }
}

pub fn optimal_alpha(order: usize, rho: f64) -> Result<f64> {
    check_third(rho)?;
    let tu = rip_bound_upper(order, 3.0 * rho)?;
    let tl = rip_bound_lower(order, 3.0 * rho)?;
    Ok(2.0 / (2.0 + tu - tl))
}

/// The two expressions under the max in the ITP convergence factor.
pub fn itp_mu_branches(order: usize, rho: f64, alpha: f64) -> Result<(f64, f64)> {
    check_third(rho)?;
    let tu = rip_bound_upper(order, 3.0 * rho)?;
    let tl = rip_bound_lower(order, 3.0 * rho)?;
    let s3 = 3f64.sqrt();
    Ok((
        s3 * (alpha * (1.0 + tu) - 1.0),
        s3 * (1.0 - alpha * (1.0 - tl)),
    ))
}

/// Asymptotic convergence factor `mu` and stability factor `xi` of the
/// tree-RIP analysis.
pub fn rip_factors(order: usize, rho: f64, variant: Variant) -> Result<Factors> {
    check_third(rho)?;
    match variant {
        Variant::Itp { alpha } => {
            let alpha = alpha.resolve(order, rho)?;
            let (a, b) = itp_mu_branches(order, rho, alpha)?;
            let tu2 = rip_bound_upper(order, 2.0 * rho)?;
            Ok(Factors {
                mu: a.max(b),
                xi: alpha * (3.0 * (1.0 + tu2)).sqrt(),
            })
        }
        Variant::Nitp { kappa } => {
            check_kappa(kappa)?;
            let tu3 = rip_bound_upper(order, 3.0 * rho)?;
            let tl3 = rip_bound_lower(order, 3.0 * rho)?;
            let tu2 = rip_bound_upper(order, 2.0 * rho)?;
            let tl1 = rip_bound_lower(order, rho)?;
            if tl1 >= 1.0 {
                return Err(Error::OutOfDomain {
                    quantity: "NITP factors",
                    rho,
                    reason: "TL(rho) >= 1".into(),
                });
            }
            let s3 = 3f64.sqrt();
            let first = (1.0 + tu3) / (1.0 - tl1) - 1.0;
            let second = 1.0 - (1.0 - tl3) / (kappa * (1.0 + tu2));
            Ok(Factors {
                mu: s3 * first.max(second),
                xi: (3.0 * (1.0 + tu2)).sqrt() / (1.0 - tl1),
            })
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "kappa must exceed 1, got {kappa}"
        )))
    }
}

/// Both sides of the stable-point threshold equation at `rho`:
/// `sqrt(TIF) / ((1 - rho)(1 - TIL(rho, 1 - rho)))` and
/// `1 / (kappa (1 + TU(2 rho)))`. Constant-stepsize ITP uses `kappa = 1`.
pub fn stable_point_sides(order: usize, rho: f64, kappa: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::OutOfDomain {
            quantity: "stable point threshold",
            rho,
            reason: "requires 0 < rho < 1/2".into(),
        });
    }
    let tif = tail_bound_tif(order, rho)?;
    let til = tail_bound_til(order, rho, 1.0 - rho)?;
    let tu2 = rip_bound_upper(order, 2.0 * rho)?;
    let lhs = tif.sqrt() / ((1.0 - rho) * (1.0 - til));
    let rhs = 1.0 / (kappa * (1.0 + tu2));
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityFactor {
    pub a: f64,
    pub xi: f64,
    /// Stepsize the factor was evaluated at (`1/(kappa(1+TU(2 rho)))` for
    /// NITP).
    pub alpha: f64,
}

/// Stable-point stability factor `a(rho)` and `xi_SP(rho)`.
///
/// NITP uses the ITP expression with the stepsize replaced by its
/// guaranteed lower bound `1 / (kappa (1 + TU(2 rho)))`.
pub fn stability_factor_sp(order: usize, rho: f64, variant: Variant) -> Result<StabilityFactor> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::OutOfDomain {
            quantity: "stable point stability factor",
            rho,
            reason: "requires 0 < rho < 1/2".into(),
        });
    }
    let alpha = match variant {
        Variant::Itp { alpha } => alpha.resolve(order, rho)?,
        Variant::Nitp { kappa } => {
            check_kappa(kappa)?;
            1.0 / (kappa * (1.0 + rip_bound_upper(order, 2.0 * rho)?))
        }
    };
    let tif = tail_bound_tif(order, rho)?;
    let til = tail_bound_til(order, rho, 1.0 - rho)?;
    let tiu_a = tail_bound_tiu(order, rho, 1.0 - rho)?;
    let tiu_b = tail_bound_tiu(order, rho, rho)?;
    let cross = (rho * (1.0 - rho) * (1.0 + tiu_a) * (1.0 + tiu_b)).sqrt();
    let denominator = alpha * (1.0 - rho) * (1.0 - til) - tif.sqrt();
    if !(denominator > 0.0) {
        return Err(Error::DenominatorNonpositive(rho));
    }
    let a = (tif.sqrt() + alpha * cross) / denominator;
    let xi = (tif * (1.0 + a) * (1.0 + a) + a * a).sqrt();
    Ok(StabilityFactor { a, xi, alpha })
}
