//! Fractional pure birth processes.
//!
//! A pure birth process jumps from state `k` to `k + 1` at rate
//! `lambda_k`; replacing the time derivative in its governing equations
//! with the Dzherbashyan–Caputo derivative of order `nu` in (0, 1] gives
//! the fractional version. Its state probabilities are mixtures of
//! Mittag–Leffler functions, and the whole process is a classical birth
//! process run at the random time whose law is the folded solution of the
//! fractional diffusion equation (the inverse stable subordinator).
//!
//! The crate provides:
//!
//! - [`special`]: Mittag–Leffler and Airy kernels, stable sampling;
//! - [`rates`]: birth-rate schedules and the non-explosion criterion;
//! - [`analytic`]: closed-form distributions and moments, general and
//!   linear (Yule–Furry) rates;
//! - [`random_time`]: the random-time law — densities and exact sampling;
//! - [`simulation`]: event-driven simulation plus chi-square comparison
//!   against the analytic tables;
//! - [`verify`]: numerical checks of the transform identities and the
//!   governing fractional equations.

pub mod analytic;
pub mod error;
pub mod quad;
pub mod random_time;
pub mod rates;
pub mod simulation;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
