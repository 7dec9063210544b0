//! Rank-based estimation for the accelerated failure time model under right
//! censoring.
//!
//! Residual ranks are imputed from the self-consistent (Kaplan-Meier) estimate
//! of the residual distribution, giving estimating functions that coincide
//! exactly with weighted logrank statistics. The crate provides bounded score
//! families, a sequential bisection solver, variance estimation by Huang's
//! inverse differentiation or Monte Carlo slope regression, and a simulation
//! laboratory.
//!
//! ```
//! use rankaft::{data::CensoredSample, fit::{fit, FitOptions}, rankest::Method, scores::ScoreFunction};
//!
//! let sample = CensoredSample::new(
//!     vec![0.1, 0.9, 0.4, 1.6, 1.1, 2.3, 0.2, 1.9],
//!     vec![true, true, false, true, true, false, true, true],
//!     vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0], vec![0.0], vec![1.0], vec![0.0], vec![1.0]],
//! )?;
//! let report = fit(&sample, &FitOptions::new(Method::Rank(ScoreFunction::wilcoxon())))?;
//! assert!(report.solver.converged);
//! # Ok::<(), rankaft::error::Error>(())
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod quad;
pub mod rankest;
pub mod scores;
pub mod simlab;
pub mod solver;
pub mod special;
pub mod stepcdf;
pub mod varinf;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
