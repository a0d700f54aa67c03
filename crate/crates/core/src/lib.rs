//! Tree-sparse compressed sensing with iterative tree projection.
//!
//! The crate has two halves. The solver half recovers a vector supported
//! on a rooted subtree of a `d`-ary tree from Gaussian measurements, using
//! constant-stepsize ITP or its normalised variant NITP, both built on an
//! exact tree projection. The theory half evaluates the asymptotic bounds,
//! stability factors and oversampling thresholds that govern when those
//! solvers provably succeed.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod io;
pub mod measurement;
pub mod projection;
pub mod solver;
pub mod theory;
pub mod tree;

pub use error::{Error, Result};
