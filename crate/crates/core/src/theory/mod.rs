//! Numerical evaluation of the asymptotic recovery theory for Gaussian
//! measurements in the proportional-growth limit `k/n -> rho`.
//!
//! Everything here is a pure function of the tree order `d`, the ratio
//! `rho` and the algorithm parameters. Implicitly defined quantities are
//! computed by bisection to full double precision; see [`roots`].

pub mod bounds;
pub mod factors;
pub mod roots;
pub mod thresholds;

use serde::Serialize;

pub use bounds::{
    prior_bound_tr, rip_bound_lower, rip_bound_upper, tail_bound_tif, tail_bound_til,
    tail_bound_tiu,
};
pub use factors::{
    optimal_alpha, rip_factors, stability_factor_sp, stable_point_sides, Factors, StabilityFactor,
    Stepsize, Variant,
};
pub use thresholds::{
    oversampling_factor, threshold, threshold_prior, threshold_rip, threshold_stable_point,
    Analysis,
};

use crate::error::{Error, Result};

/// Shannon entropy in nats, `-p ln p - (1-p) ln(1-p)`.
pub fn shannon_entropy(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "entropy needs p in (0, 1), got {p}"
        )));
    }
    Ok(-p * p.ln() - (1.0 - p) * (1.0 - p).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryQuery {
    pub order: usize,
    pub alpha: Stepsize,
    pub kappa: f64,
}

impl Default for TheoryQuery {
    fn default() -> Self {
        Self {
            order: 2,
            alpha: Stepsize::Optimal,
            kappa: 1.1,
        }
    }
}

/// One row of bound curves. `None` marks a quantity undefined at `rho`.
///
/// `tiu` and `til` are taken at `lambda = 1 - rho`, the level used by the
/// stable-point threshold; the RIP factors take their bound arguments at
/// `rho`, `2 rho` and `3 rho` as their definitions require.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRow {
    pub rho: f64,
    pub tu: Option<f64>,
    pub tl: Option<f64>,
    pub tr: Option<f64>,
    pub tiu: Option<f64>,
    pub til: Option<f64>,
    pub tif: Option<f64>,
    pub mu_itp: Option<f64>,
    pub xi_itp: Option<f64>,
    pub mu_nitp: Option<f64>,
    pub xi_nitp: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub xi_sp_itp: Option<f64>,
    pub xi_sp_nitp: Option<f64>,
}

impl TheoryRow {
    pub const CSV_HEADER: &'static str =
        "rho,tu,tl,tr,tiu,til,tif,mu_itp,xi_itp,mu_nitp,xi_nitp,alpha_hat";

    pub fn evaluate(query: &TheoryQuery, rho: f64) -> Self {
        let d = query.order;
        let itp = Variant::Itp { alpha: query.alpha };
        let nitp = Variant::Nitp { kappa: query.kappa };
        let f_itp = rip_factors(d, rho, itp).ok();
        let f_nitp = rip_factors(d, rho, nitp).ok();
        let sp_itp = Variant::Itp {
            alpha: Stepsize::ConvergenceCap,
        };
        Self {
            rho,
            tu: rip_bound_upper(d, rho).ok(),
            tl: rip_bound_lower(d, rho).ok(),
            tr: if d == 2 {
                prior_bound_tr(rho).ok()
            } else {
                None
            },
            tiu: (rho < 1.0)
                .then(|| tail_bound_tiu(d, rho, 1.0 - rho).ok())
                .flatten(),
            til: (rho < 1.0)
                .then(|| tail_bound_til(d, rho, 1.0 - rho).ok())
                .flatten(),
            tif: tail_bound_tif(d, rho).ok(),
            mu_itp: f_itp.map(|f| f.mu),
            xi_itp: f_itp.map(|f| f.xi),
            mu_nitp: f_nitp.map(|f| f.mu),
            xi_nitp: f_nitp.map(|f| f.xi),
            alpha_hat: optimal_alpha(d, rho).ok(),
            xi_sp_itp: stability_factor_sp(d, rho, sp_itp).ok().map(|s| s.xi),
            xi_sp_nitp: stability_factor_sp(d, rho, nitp).ok().map(|s| s.xi),
        }
    }

    /// CSV line in [`Self::CSV_HEADER`] order; absent cells are empty.
    pub fn csv_line(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let cells = [
            self.tu,
            self.tl,
            self.tr,
            self.tiu,
            self.til,
            self.tif,
            self.mu_itp,
            self.xi_itp,
            self.mu_nitp,
            self.xi_nitp,
            self.alpha_hat,
        ];
        let mut line = format!("{:.12e}", self.rho);
        for c in cells {
            line.push(',');
            line.push_str(&cell(c));
        }
        line
    }
}

/// Evaluates every quantity on a grid of `rho` values, in parallel.
pub fn theory_table(query: &TheoryQuery, rho_grid: &[f64]) -> Vec<TheoryRow> {
    use rayon::prelude::*;
    rho_grid
        .par_iter()
        .map(|&rho| TheoryRow::evaluate(query, rho))
        .collect()
}

/// `points` values evenly spaced on `[lo, hi]`, endpoints included.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
