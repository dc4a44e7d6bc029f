//! Sparse estimation with folded concave penalties (SCAD, MCP, hard
//! threshold) computed by the local linear approximation (LLA) algorithm.
//!
//! The crate is organized bottom-up:
//!
//! - [`penalty`]: penalty values, derivatives and their constants.
//! - [`model`]: linear, logistic, quantile and Gaussian precision losses.
//! - [`wl1`]: weighted-l1 solvers, CLIME, and restricted (oracle) fits.
//! - [`lla`]: the LLA driver, initializers, and oracle/event diagnostics.
//! - [`simulation`]: data generators, tuning, metrics and the replication
//!   runner.
//! - [`io`]: dataset and trace files.

pub mod error;
pub mod io;
pub mod linalg;
pub mod lla;
pub mod model;
pub mod penalty;
pub mod simulation;
pub mod wl1;

pub use error::{Error, Result};
pub use model::{Estimate, LossKind, Problem, Support};
pub use penalty::{Family, PenaltySpec};
