//! Spectral-coordinate regularization for inverse problems with a
//! data-adaptive RKHS prior.
//!
//! Everything here works in the eigenbasis of the normal operator: synthetic
//! spectra with controlled decay, a discretized Fredholm test problem,
//! regularized estimators and their errors, asymptotic series for the error,
//! hyperparameter selection (oracle, L-curve, GCV) and convergence-rate
//! experiments.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimators;
pub mod fredholm;
pub mod math;
pub mod rates;
pub mod rng;
pub mod selection;
pub mod series;
pub mod spectrum;

pub use error::{Error, Result};
