//! Numerical laboratory for the Keller–Segel chemotaxis model with a
//! spatially variable chemotactic coefficient χ(x).
//!
//! The crate is split along the lines of the analysis it supports:
//!
//! * [`model`]: dimensional constants, the χ-profile catalog and the
//!   critical-mass formulas.
//! * [`kernelmath`]: pointwise identities and inequalities behind the moment
//!   estimates, plus the double integrals they feed (interaction and Riesz
//!   energies) evaluated on sample densities.
//! * [`momentflow`]: right-hand sides of the second-moment differential
//!   inequalities, the moment threshold, blow-up time bounds and the
//!   sub/supercritical classifier.
//! * [`radialsolver`]: finite-difference solver for the cumulative-mass
//!   formulation on a ball, with supersolution comparison and blow-up
//!   detection.
//! * [`harness`]: scenario configs, verification suites, mass sweeps and
//!   report emission used by the `chemolab` binary.

pub mod harness;
pub mod kernelmath;
pub mod model;
pub mod momentflow;
pub mod radialsolver;

mod numerics;
mod sampling;

pub use kernelmath::{MomentSummary, SampleDensity};
pub use model::{ChiProfile, DimensionConstants};
pub use momentflow::{Classification, MomentBound};
pub use radialsolver::{MassProfile, RadialGrid, RunReport, SolverConfig};
