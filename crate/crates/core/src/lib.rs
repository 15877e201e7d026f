//! Second Wiener chaos versus centered Gamma laws.
//!
//! Exact cumulants and Gamma-operator variances of `F = sum_i c_i (N_i^2 - 1)`,
//! distance bounds to `G(nu) = 2 Gamma(nu/2) - nu`, quadrature distances for
//! two-eigenvalue laws, Monte Carlo checks and rate experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chaos2;
pub mod coeffs;
pub mod distances;
pub mod experiment;
mod error;
pub mod gamma_ops;
pub mod numerics;
pub mod rng;
pub mod target;

pub use chaos2::{canonicalize, family, ChaosSample, EigenvalueSpec, Family};
pub use error::{Error, Result};
pub use numerics::{LogLogFit, Tolerance};
pub use target::{GammaTarget, HolderData};
