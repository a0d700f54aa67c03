//! Bisection on monotone scalar functions.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 2_000;
const MAX_DOUBLINGS: usize = 1_000;

/// Root of `f` on `[lo, hi]`, given a sign change across the interval.
///
/// Runs until the bracket collapses onto adjacent doubles (or `f` hits an
/// exact zero) and returns the endpoint with the smaller residual.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, what: &'static str) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange(what));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.is_nan() {
            return Err(Error::BracketFailure(what));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Doubles `start` until `f` takes the sign opposite to `f(lo)`, then
/// bisects on `[lo, upper]`.
pub fn bisect_expanding<F>(f: F, lo: f64, start: f64, what: &'static str) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let sign_lo = f(lo).signum();
    let mut hi = start;
    for _ in 0..MAX_DOUBLINGS {
        let v = f(hi);
        if v.is_nan() {
            return Err(Error::BracketFailure(what));
        }
        if v == 0.0 || v.signum() != sign_lo {
            return bisect(f, lo, hi, what);
        }
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    Err(Error::BracketFailure(what))
}

/// Halves `start` towards zero until `f` changes sign relative to `f(hi)`,
/// then bisects on `[lower, hi]`.
pub fn bisect_shrinking<F>(f: F, start: f64, hi: f64, what: &'static str) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let sign_hi = f(hi).signum();
    let mut lo = start;
    for _ in 0..MAX_DOUBLINGS {
        let v = f(lo);
        if v.is_nan() {
            return Err(Error::BracketFailure(what));
        }
        if v == 0.0 || v.signum() != sign_hi {
            return bisect(f, lo, hi, what);
        }
        lo *= 0.5;
        if lo == 0.0 {
            break;
        }
    }
    Err(Error::BracketFailure(what))
}
