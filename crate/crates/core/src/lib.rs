//! Coordinate descent with approximate steepest-coordinate selection.
//!
//! The crate keeps an estimate of the full gradient together with per-coordinate
//! error radii. From those it derives safe lower/upper bounds on every gradient
//! entry and an active set that is guaranteed to contain the steepest
//! coordinate. Cheap gradient oracles refresh the estimate after each
//! coordinate step, so selection costs about as much as uniform sampling while
//! behaving like the Gauss-Southwell rule when the oracles are accurate.
//!
//! Modules:
//! - [`problem`]: sparse column storage, least-squares composite objectives, the residual `w = Ax`.
//! - [`oracles`]: estimators of the gradient change of passive coordinates.
//! - [`selector`]: bounds, active sets, and the selection rules (uniform, steepest, approximate, composite).
//! - [`driver`]: the descent loop, update rules, traces and diagnostics.
//! - [`hardcase`]: the quadratic family on which steepest descent gains only a constant over uniform.
//! - [`ratiosim`]: competitive-ratio measurements and the active-set equilibrium simulator.
//! - [`data`]: synthetic sparse datasets and svmlight I/O.

pub mod data;
pub mod driver;
pub mod error;
pub mod hardcase;
pub mod oracles;
pub mod problem;
pub mod ratiosim;
pub mod selector;

pub use error::{Error, Result};
