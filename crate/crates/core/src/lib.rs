//! Reaction-diffusion with a distributed family of non-ideal relays.
//!
//! The biomass density `u(x, t)` lives on a threshold interval `[lo, hi]`,
//! each threshold carries a relay driven by the scalar input `w(t)`, and the
//! nutrient `v(t)` feeds growth. The crate integrates the coupled system,
//! evaluates the heat kernels used in its analysis, tracks relay fronts and
//! checks the pattern-formation statements against simulations.

// `!(x > 0.0)` style guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fronts;
pub mod hysteresis;
pub mod kernels;
pub mod par;
pub mod solver;

pub use error::{Error, Result};
