//! Spectral shift function and unitary spectral flow for finite-rank
//! perturbations of self-adjoint operators.
//!
//! The crate computes the integer step function `μ(θ; λ)` in two ways (as
//! the spectral flow of a resolvent path, and as an index of a pair of
//! spectral projections) and the spectral shift function `ξ(λ)` in three
//! ways (argument of the perturbation determinant, integral of `μ`, and an
//! index integral), and compares them with exact eigenvalue counts.

// `!(a < b)` is used on purpose: NaN has to fail these checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod circle_flow;
pub mod engine;
pub mod linalg;
pub mod models;
pub mod random;
