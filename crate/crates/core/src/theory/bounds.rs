//! Implicitly defined bounds: asymptotic tree-RIP bounds, the prior
//! symmetric bound for binary trees, and the chi-squared / F tail levels.
//!
//! Each bound is the unique root of a monotone defining function on a
//! stated interval. The defining functions are public so callers (and the
//! tests) can check residuals directly.

use super::roots::{bisect, bisect_expanding, bisect_shrinking};
use super::shannon_entropy;
use crate::error::{Error, Result};
use crate::tree::tree_count_exponent;

fn check_rho(quantity: &'static str, rho: f64, hi: f64, inclusive: bool) -> Result<()> {
    let ok = rho > 0.0 && if inclusive { rho <= hi } else { rho < hi };
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            quantity,
            rho,
            reason: format!(
                "requires 0 < rho {} {hi}",
                if inclusive { "<=" } else { "<" }
            ),
        })
    }
}

/// `d * rho * H(1/d)`: log of the support count per measurement.
pub fn union_exponent(order: usize, rho: f64) -> Result<f64> {
    Ok(rho * tree_count_exponent(order)?)
}

pub fn psi_max(lambda: f64, rho: f64) -> f64 {
    0.5 * ((1.0 + rho) * lambda.ln() + 1.0 + rho - rho * rho.ln() - lambda)
}

pub fn psi_min(lambda: f64, rho: f64) -> f64 {
    let h = -rho * rho.ln() - (1.0 - rho) * (1.0 - rho).ln();
    h + 0.5 * ((1.0 - rho) * lambda.ln() + 1.0 - rho + rho * rho.ln() - lambda)
}

/// Residual of the defining equation of the upper tree-RIP bound at `tu`.
pub fn rip_upper_residual(order: usize, rho: f64, tu: f64) -> Result<f64> {
    Ok(psi_max(1.0 + tu, rho) + union_exponent(order, rho)?)
}

/// Residual of the defining equation of the lower tree-RIP bound at `tl`.
pub fn rip_lower_residual(order: usize, rho: f64, tl: f64) -> Result<f64> {
    Ok(psi_min(1.0 - tl, rho) + union_exponent(order, rho)?)
}

/// Asymptotic upper tree-RIP bound `TU(rho) = lambda_max(rho) - 1`.
pub fn rip_bound_upper(order: usize, rho: f64) -> Result<f64> {
    check_rho("TU", rho, 1.0, false)?;
    let shift = union_exponent(order, rho)?;
    let f = |lambda: f64| psi_max(lambda, rho) + shift;
    let lo = 1.0 + rho;
    let lambda = bisect_expanding(f, lo, 2.0 * lo, "TU")?;
    Ok(lambda - 1.0)
}

/// Asymptotic lower tree-RIP bound `TL(rho) = 1 - lambda_min(rho)`.
pub fn rip_bound_lower(order: usize, rho: f64) -> Result<f64> {
    check_rho("TL", rho, 1.0, false)?;
    let shift = union_exponent(order, rho)?;
    let f = |lambda: f64| psi_min(lambda, rho) + shift;
    let hi = 1.0 - rho;
    let lambda = bisect_shrinking(f, 0.5 * hi, hi, "TL")?;
    Ok(1.0 - lambda)
}

/// `r^2 (9 - r) - 1296 rho [1 + ln(72 / r)]`.
pub fn prior_bound_residual(rho: f64, r: f64) -> f64 {
    r * r * (9.0 - r) - 1296.0 * rho * (1.0 + (72.0 / r).ln())
}

/// Largest `rho` for which the prior symmetric bound exists.
pub fn prior_bound_domain_limit() -> f64 {
    // The bound exists iff the peak of the residual in r is non-negative;
    // that peak decreases in rho.
    let peak_value = |rho: f64| match prior_bound_peak(rho) {
        Some(r) => prior_bound_residual(rho, r),
        None => -1.0,
    };
    bisect(peak_value, 1e-6, 0.5, "TR domain").unwrap_or(f64::NAN)
}

// The residual g has g' r = 18 r^2 - 3 r^3 + 1296 rho, which rises on
// (0, 4) and falls on (4, 9): one critical point, a maximum, in (4, 9).
fn prior_bound_peak(rho: f64) -> Option<f64> {
    let slope = |r: f64| 18.0 * r * r - 3.0 * r * r * r + 1296.0 * rho;
    bisect(slope, 4.0, 9.0, "TR peak").ok()
}

/// Prior symmetric tree-RIP bound `TR(rho)` for binary trees: the root of
/// [`prior_bound_residual`] on the rising branch, which tends to zero with
/// `rho`.
pub fn prior_bound_tr(rho: f64) -> Result<f64> {
    check_rho("TR", rho, 1.0, false)?;
    let out_of_domain = || Error::OutOfDomain {
        quantity: "TR",
        rho,
        reason: "prior bound equation has no solution (rho above about 0.02407)".into(),
    };
    let peak = prior_bound_peak(rho).ok_or_else(out_of_domain)?;
    if prior_bound_residual(rho, peak) < 0.0 {
        return Err(out_of_domain());
    }
    bisect_shrinking(|r| prior_bound_residual(rho, r), 0.5 * peak, peak, "TR")
}

fn tail_rhs(order: usize, rho: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail bound needs lambda in (0, 1], got {lambda}"
        )));
    }
    Ok(2.0 * union_exponent(order, rho)? / lambda)
}

pub fn tiu_residual(order: usize, rho: f64, lambda: f64, nu: f64) -> Result<f64> {
    Ok(nu - nu.ln_1p() - tail_rhs(order, rho, lambda)?)
}

pub fn til_residual(order: usize, rho: f64, lambda: f64, nu: f64) -> Result<f64> {
    Ok(-nu - (-nu).ln_1p() - tail_rhs(order, rho, lambda)?)
}

/// Upper chi-squared tail level `TIU(rho, lambda)`.
pub fn tail_bound_tiu(order: usize, rho: f64, lambda: f64) -> Result<f64> {
    check_rho("TIU", rho, 1.0, false)?;
    let rhs = tail_rhs(order, rho, lambda)?;
    bisect_expanding(|nu| nu - nu.ln_1p() - rhs, 0.0, 1.0, "TIU")
}

/// Lower chi-squared tail level `TIL(rho, lambda)`, always in `(0, 1)`.
pub fn tail_bound_til(order: usize, rho: f64, lambda: f64) -> Result<f64> {
    check_rho("TIL", rho, 1.0, false)?;
    let rhs = tail_rhs(order, rho, lambda)?;
    let below_one = 1.0 - f64::EPSILON / 2.0;
    bisect(|nu| -nu - (-nu).ln_1p() - rhs, 0.0, below_one, "TIL")
}

pub fn tif_residual(order: usize, rho: f64, f: f64) -> Result<f64> {
    let rhs = 2.0 * union_exponent(order, rho)? + shannon_entropy(rho)?;
    Ok(f.ln_1p() - rho * f.ln() - rhs)
}

/// F-distribution tail level `TIF(rho)`, defined for `rho` in `(0, 1/2]`.
pub fn tail_bound_tif(order: usize, rho: f64) -> Result<f64> {
    check_rho("TIF", rho, 0.5, true)?;
    let rhs = 2.0 * union_exponent(order, rho)? + shannon_entropy(rho)?;
    let lo = rho / (1.0 - rho);
    bisect_expanding(
        |f| f.ln_1p() - rho * f.ln() - rhs,
        lo,
        2.0 * lo + 1.0,
        "TIF",
    )
}
