//! Nonparametric regression by localized least-squares projection onto a
//! Daubechies multi-resolution lattice.
//!
//! The estimator partitions the design domain into dyadic cells of edge
//! `2^-j`. On each occupied cell it solves one small least-squares problem
//! against the `(2r-1)^d` scaling functions whose supports cover the cell,
//! and discards the fit when the smallest eigenvalue of the local Gram
//! matrix falls under a spectral threshold. Level `j` can be fixed or picked
//! pointwise with a Lepski-type rule, and a moving-grid variant handles
//! designs whose support is unknown.
//!
//! Modules:
//!
//! * [`scaling`] - Daubechies filters and tabulated father functions.
//! * [`lattice`] - dyadic cells, occupancy maps, coordinate shifts.
//! * [`regress`] - per-cell Gram systems, thresholded fits, fixed-level estimator.
//! * [`adapt`] - resolution ranges and pointwise Lepski selection.
//! * [`unknown_support`] - sample splitting, anchors and the moving-grid estimator.
//! * [`classify`] - plug-in classifiers and margin scenarios.
//! * [`bounds`] - finite-sample tail bounds and Monte-Carlo dominance checks.
//! * [`simulate`] - benchmark signals, random designs and the study protocol.

pub mod adapt;
pub mod bounds;
pub mod classify;
mod error;
pub mod lattice;
mod par;
pub mod regress;
pub mod rng;
pub mod scaling;
pub mod simulate;
pub mod unknown_support;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
