//! Discontinuity tracking for parameterized conservation laws.
//!
//! The workflow: a forward model maps a stochastic parameter point to a
//! scalar quantity of interest (QI). A level-set field evolved over the
//! stochastic domain locks onto the QI's discontinuities, which then drive
//! piecewise-polynomial surrogate construction (adaptive multi-element gPC,
//! simplex orthonormal polynomials, or frames of restricted global
//! polynomials) whose coefficients are estimated by OLS or LAD regression.

pub mod analytics;
pub mod basis;
pub mod error;
pub mod grid;
pub mod levelset;
pub mod megpc;
pub mod models;
pub mod parallel;
pub mod regression;
pub mod tessellation;
pub mod tracker;

pub use error::{Error, Result};
