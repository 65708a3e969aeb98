//! Distant retrograde orbits of the planar Hill problem.
//!
//! The crate provides the exact rotating-frame truth model next to a ladder
//! of analytical approximations for quasi-satellite motion: the completely
//! reduced linear solution, averaged flows of order 6 and 8 with the
//! closed-form and Lindstedt solutions, an augmented averaging mode that
//! keeps the exact perturbation under a quadrature, and the short-period
//! corrections connecting mean and osculating variables. A differential
//! corrector turns approximate initial conditions into true periodic orbits.

// Validation deliberately uses `!(x > 0)` so that NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrections;
pub mod dynamics;
pub mod error;
pub mod ode;
pub mod params;
pub mod periodic;
pub mod reduce;
pub mod secular;
pub mod specfun;

pub use error::{Error, Result};
pub use params::ModelParams;
