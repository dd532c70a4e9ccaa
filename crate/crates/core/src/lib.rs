//! Directed transport in damped, periodically ac-driven one-dimensional
//! systems `ẍ + γẋ + U'(x) = E_δ(λt)`.
//!
//! The crate computes the running limit cycles of the static-field problem,
//! combines them into the adiabatic current, expands the cycles for large
//! fields to predict the sign and scaling of the current, and measures the
//! finite-time current of an ensemble of trajectories directly.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adiabatic;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod expansion;
pub mod forcing;
pub mod limit_cycle;
pub mod ode;
pub mod potentials;
pub mod quadrature;

pub use error::{Error, Result};
