//! Finite-difference solver for the cumulative-mass formulation on a ball.
//!
//! For radial data with `χ(x) = χ·|x|^{n−2}` the cumulative mass
//! `M(r,t) = ∫_{B(0,r)} u` satisfies
//!
//! ```text
//! M_t = M_rr − (n−1)/r · M_r + χ/(ω_n r) · M·M_r,   M(0,t) = 0,  M(L,t) = θ,
//! ```
//!
//! a scalar parabolic problem whose steady states include the explicit
//! family `M̄(r) = (2nω_n/χ)·k rⁿ/(1 + k rⁿ)` used as comparison barriers.

mod diagnostics;
mod initial;
mod run;
mod scheme;
mod supersolution;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernelmath::KernelError;
use crate::model::{DimensionConstants, ModelError};

pub use diagnostics::{
    grad_v_magnitude, grad_v_max, recover_density, second_moment_of, DensityRecovery,
};
pub use initial::{init_mass_profile, initial_state, InitialDensity, InitialState, MIN_NODES_ACROSS};
pub use run::{
    detect_blowup, run, write_series_csv, DetectorSignal, DetectorVerdict, KRoute, Outcome, RunReport,
    Sample, SupersolutionInfo, Thresholds, EVENT_SAMPLE_GROWTH, SERIES_SAMPLES,
};
pub use scheme::{apply_operator, step, steady_residual, RadialOperator, StepDiagnostics};
pub use supersolution::{
    choose_k, choose_k_dominating, comparison_violation, supersolution, supersolution_grad_v,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("time step {dt} fell below dt_min = {dt_min}")]
    StepCollapse { dt: f64, dt_min: f64 },
    #[error("singular radius: node 0 sits at r = 0")]
    SingularRadius,
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Minimum number of interior nodes.
pub const MIN_INTERIOR_NODES: usize = 16;

/// Uniform grid `r_i = i·Δr`, `i = 0..=N+1`, on `[0, L]` with `Δr = L/(N+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub length: f64,
    pub interior: usize,
}

impl RadialGrid {
    pub fn new(length: f64, interior: usize) -> Result<Self, SolverError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(SolverError::InvalidGrid(format!("L must be > 0, got {length}")));
        }
        if interior < MIN_INTERIOR_NODES {
            return Err(SolverError::InvalidGrid(format!(
                "need N >= {MIN_INTERIOR_NODES} interior nodes, got {interior}"
            )));
        }
        Ok(Self { length, interior })
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.interior + 1) as f64
    }

    /// Total node count `N + 2`.
    pub fn len(&self) -> usize {
        self.interior + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.interior + 1 {
            self.length
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

/// Cumulative mass `M(r_i, t)` at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassProfile {
    pub grid: RadialGrid,
    pub n: usize,
    pub values: Vec<f64>,
    pub theta: f64,
    pub time: f64,
}

impl MassProfile {
    /// Builds a profile, checking length and the boundary values
    /// `M(0) = 0`, `M(L) = θ`.
    pub fn new(grid: RadialGrid, n: usize, values: Vec<f64>, time: f64) -> Result<Self, SolverError> {
        DimensionConstants::new(n)?;
        if values.len() != grid.len() {
            return Err(SolverError::InvalidProfile(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProfile("non-finite value".into()));
        }
        if values[0] != 0.0 {
            return Err(SolverError::InvalidProfile(format!("M(0) must be 0, got {}", values[0])));
        }
        let theta = values[values.len() - 1];
        if theta < 0.0 {
            return Err(SolverError::InvalidProfile(format!("theta must be >= 0, got {theta}")));
        }
        Ok(Self { grid, n, values, theta, time })
    }

    /// Samples `f` on the grid, forcing `M(0) = 0`.
    pub fn from_fn(grid: RadialGrid, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, SolverError> {
        let mut values: Vec<f64> = grid.nodes().into_iter().map(f).collect();
        values[0] = 0.0;
        Self::new(grid, n, values, 0.0)
    }

    /// Largest decrease `max_i (M_i − M_{i+1})₊`.
    pub fn monotonicity_violation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max)
    }
}

/// Time-stepping and detector settings. `chi` is the strength of the
/// `χ·|x|^{n−2}` weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub chi: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub blowup_factor: f64,
    pub safety: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { chi: 1.0, dt_init: 1e-4, dt_min: 1e-13, t_end: 1.0, blowup_factor: 1e3, safety: 0.5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.chi.is_finite() && self.chi > 0.0) {
            return bad(format!("chi must be > 0, got {}", self.chi));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init.is_finite()) {
            return bad(format!(
                "need 0 < dt_min < dt_init, got dt_min = {}, dt_init = {}",
                self.dt_min, self.dt_init
            ));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be > 0, got {}", self.t_end));
        }
        if !(self.blowup_factor >= 1e3) {
            return bad(format!("blowup_factor must be >= 1e3, got {}", self.blowup_factor));
        }
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return bad(format!("safety must lie in (0, 1), got {}", self.safety));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = RadialGrid::new(2.0, 19).unwrap();
        assert_eq!(g.spacing(), 0.1);
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 21);
        assert_eq!(nodes[0], 0.0);
        assert_eq!(nodes[20], 2.0);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(RadialGrid::new(1.0, 15).is_err());
        assert!(RadialGrid::new(0.0, 32).is_err());
    }

    #[test]
    fn profile_boundary_checks() {
        let g = RadialGrid::new(1.0, 16).unwrap();
        let mut v = vec![0.0; 18];
        v[17] = 1.0;
        assert!(MassProfile::new(g, 2, v.clone(), 0.0).is_ok());
        v[0] = 0.1;
        assert!(MassProfile::new(g, 2, v, 0.0).is_err());
        assert!(MassProfile::new(g, 2, vec![0.0; 5], 0.0).is_err());
        assert!(MassProfile::new(g, 1, vec![0.0; 18], 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        ok.validate().unwrap();
        assert!(SolverConfig { dt_min: 1.0, ..ok }.validate().is_err());
        assert!(SolverConfig { blowup_factor: 10.0, ..ok }.validate().is_err());
        assert!(SolverConfig { safety: 1.0, ..ok }.validate().is_err());
        assert!(SolverConfig { chi: 0.0, ..ok }.validate().is_err());
    }
}
