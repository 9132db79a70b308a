//! Spatial operator and the linearly implicit time step.
//!
//! The linear part `M_rr − (n−1)/r·M_r` equals `n² r^{2n−2} M_ss` in the
//! variable `s = rⁿ`, and is discretised as a three-point flux difference on
//! the image nodes `s_i = r_iⁿ`. That stencil annihilates both `1` and `rⁿ`,
//! so the behaviour `M ~ C·rⁿ` near the origin carries no truncation error.
//! The chemotactic drift `c = χM/(ω_n r) ≥ 0` is frozen at the old level and
//! centred wherever the resulting off-diagonal stays nonnegative, upwinded
//! otherwise. Every step is therefore an M-matrix solve, which keeps the
//! profile monotone and inside `[0, θ]`.

use super::diagnostics::recover_density;
use super::{MassProfile, RadialGrid, SolverConfig, SolverError};
use crate::model::DimensionConstants;

/// Precomputed stencil for one `(grid, n, χ)` triple.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    grid: RadialGrid,
    n: usize,
    chi: f64,
    dr: f64,
    /// Diffusive weight on `M_{i−1}`, indexed by node.
    diff_lower: Vec<f64>,
    /// Diffusive weight on `M_{i+1}`, indexed by node.
    diff_upper: Vec<f64>,
    /// `χ/(ω_n r_i)`, zero at the endpoints.
    drift_scale: Vec<f64>,
}

/// Per-step report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub dt: f64,
    pub u_max: f64,
    /// `dt·max|c|/Δr` evaluated on the old level.
    pub cfl: f64,
    pub monotonicity_violation: f64,
    pub density_clamp: f64,
}

impl RadialOperator {
    pub fn new(grid: RadialGrid, n: usize, chi: f64) -> Result<Self, SolverError> {
        let dims = DimensionConstants::new(n)?;
        if !(chi.is_finite() && chi > 0.0) {
            return Err(SolverError::InvalidConfig(format!("chi must be > 0, got {chi}")));
        }
        let radii = grid.nodes();
        let s: Vec<f64> = radii.iter().map(|r| r.powi(n as i32)).collect();
        let len = grid.len();
        let mut diff_lower = vec![0.0; len];
        let mut diff_upper = vec![0.0; len];
        let mut drift_scale = vec![0.0; len];
        let nn = (n * n) as f64;
        for i in 1..len - 1 {
            let r = radii[i];
            let w = nn * r.powi(2 * n as i32 - 2) * 2.0 / (s[i + 1] - s[i - 1]);
            diff_lower[i] = w / (s[i] - s[i - 1]);
            diff_upper[i] = w / (s[i + 1] - s[i]);
            drift_scale[i] = chi / (dims.omega_n * r);
        }
        Ok(Self { grid, n, chi, dr: grid.spacing(), diff_lower, diff_upper, drift_scale })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Largest drift speed `max_i |χ M_i/(ω_n r_i)|`.
    pub fn max_drift(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.drift_scale).map(|(m, s)| (m * s).abs()).fold(0.0, f64::max)
    }

    /// `dt` bound `safety·Δr/max|c|`; infinite when there is no drift.
    pub fn cfl_limit(&self, values: &[f64], safety: f64) -> f64 {
        let c = self.max_drift(values);
        if c > 0.0 {
            safety * self.dr / c
        } else {
            f64::INFINITY
        }
    }

    /// Off-diagonal weights at interior node `i` with the drift taken from
    /// `values`. Both are nonnegative.
    fn weights(&self, values: &[f64], i: usize) -> (f64, f64) {
        let c = values[i] * self.drift_scale[i];
        let half = c / (2.0 * self.dr);
        let (lo, up) = (self.diff_lower[i], self.diff_upper[i]);
        if lo - half >= 0.0 && up + half >= 0.0 {
            (lo - half, up + half)
        } else if c > 0.0 {
            (lo, up + c / self.dr)
        } else {
            (lo - c / self.dr, up)
        }
    }

    /// Discrete right-hand side at interior nodes `1..=N` (index 0 is node 1).
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        (1..values.len() - 1)
            .map(|i| {
                let (lo, up) = self.weights(values, i);
                lo * (values[i - 1] - values[i]) + up * (values[i + 1] - values[i])
            })
            .collect()
    }

    /// Backward-Euler step of length `dt` with the drift frozen at
    /// `profile`. No range checks on `dt`.
    pub fn advance(&self, profile: &MassProfile, dt: f64) -> Result<(MassProfile, StepDiagnostics), SolverError> {
        let m = &profile.values;
        let len = m.len();
        let interior = len - 2;
        let cfl = dt * self.max_drift(m) / self.dr;

        // Thomas algorithm on rows i = 1..=N.
        let mut c_prime = vec![0.0; interior];
        let mut d_prime = vec![0.0; interior];
        let mut prev_c = 0.0;
        let mut prev_d = 0.0;
        for k in 0..interior {
            let i = k + 1;
            let (lo, up) = self.weights(m, i);
            let a = -dt * lo;
            let b = 1.0 + dt * (lo + up);
            let c = -dt * up;
            let mut d = m[i];
            if i == interior {
                d += dt * up * profile.theta;
            }
            let denom = b - a * prev_c;
            if !(denom > 0.0) {
                return Err(SolverError::Internal(format!("tridiagonal pivot {denom} at node {i}")));
            }
            prev_c = if i == interior { 0.0 } else { c / denom };
            prev_d = (d - a * prev_d) / denom;
            c_prime[k] = prev_c;
            d_prime[k] = prev_d;
        }
        let mut next = vec![0.0; len];
        next[len - 1] = profile.theta;
        let mut x = 0.0;
        for k in (0..interior).rev() {
            x = d_prime[k] - c_prime[k] * x;
            next[k + 1] = x;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Internal("non-finite value after step".into()));
        }
        let out = MassProfile {
            grid: profile.grid,
            n: profile.n,
            values: next,
            theta: profile.theta,
            time: profile.time + dt,
        };
        let rec = recover_density(&out);
        let diag = StepDiagnostics {
            dt,
            u_max: rec.max(),
            cfl,
            monotonicity_violation: out.monotonicity_violation(),
            density_clamp: rec.clamped,
        };
        Ok((out, diag))
    }
}

/// One step of length `dt` for `profile`, with `dt` required to lie in
/// `[dt_min, dt_init]`.
pub fn step(
    profile: &MassProfile,
    config: &SolverConfig,
    dt: f64,
) -> Result<(MassProfile, StepDiagnostics), SolverError> {
    config.validate()?;
    if dt < config.dt_min {
        return Err(SolverError::StepCollapse { dt, dt_min: config.dt_min });
    }
    if !(dt <= config.dt_init) {
        return Err(SolverError::InvalidConfig(format!("dt {dt} exceeds dt_init {}", config.dt_init)));
    }
    RadialOperator::new(profile.grid, profile.n, config.chi)?.advance(profile, dt)
}

/// Discrete right-hand side of the cumulative-mass equation at interior nodes.
pub fn apply_operator(profile: &MassProfile, chi: f64) -> Result<Vec<f64>, SolverError> {
    Ok(RadialOperator::new(profile.grid, profile.n, chi)?.apply(&profile.values))
}

/// `max_i |L_h[M̄]_i|` for the sampled supersolution with parameter `k`.
pub fn steady_residual(grid: &RadialGrid, n: usize, chi: f64, k: f64) -> Result<f64, SolverError> {
    let profile = MassProfile::from_fn(*grid, n, |r| super::supersolution(r, k, n, chi))?;
    let res = apply_operator(&profile, chi)?;
    Ok(res.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radialsolver::{init_mass_profile, InitialDensity};

    fn cfg() -> SolverConfig {
        SolverConfig { dt_init: 1e-3, dt_min: 1e-12, t_end: 1.0, ..SolverConfig::default() }
    }

    #[test]
    fn zero_is_fixed_point() {
        let grid = RadialGrid::new(1.0, 63).unwrap();
        let p = MassProfile::new(grid, 2, vec![0.0; 65], 0.0).unwrap();
        let (q, d) = step(&p, &cfg(), 1e-3).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0));
        assert_eq!(d.u_max, 0.0);
        assert_eq!(q.time, 1e-3);
    }

    #[test]
    fn linear_part_is_exact_on_r_to_the_n() {
        for n in 2..=4 {
            let grid = RadialGrid::new(1.0, 31).unwrap();
            let p = MassProfile::from_fn(grid, n, |r| r.powi(n as i32)).unwrap();
            // Tiny χ isolates the linear part.
            let res = apply_operator(&p, 1e-300).unwrap();
            assert!(res.iter().all(|v| v.abs() < 1e-9), "n = {n}: {res:?}");
        }
    }

    #[test]
    fn endpoint_and_monotonicity_preserved() {
        let grid = RadialGrid::new(1.0, 255).unwrap();
        let theta = 4.0 * std::f64::consts::PI;
        let mut p = init_mass_profile(&InitialDensity::GaussianBump { mass: theta, width: 0.2 }, &grid, 2).unwrap();
        for _ in 0..50 {
            let (q, d) = step(&p, &cfg(), 1e-3).unwrap();
            assert_eq!(q.theta, theta);
            assert_eq!(q.values[0], 0.0);
            assert_eq!(q.values[256], theta);
            assert!(d.monotonicity_violation <= 1e-10 * theta);
            p = q;
        }
    }

    #[test]
    fn steady_supersolution_barely_moves() {
        let grid = RadialGrid::new(1.0, 511).unwrap();
        let p = MassProfile::from_fn(grid, 2, |r| crate::radialsolver::supersolution(r, 1.0, 2, 1.0)).unwrap();
        let (q, _) = step(&p, &cfg(), 1e-4).unwrap();
        let drift = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn residual_is_second_order() {
        for n in 3..=4 {
            let mut prev: Option<f64> = None;
            for &nint in &[255usize, 511, 1023] {
                let grid = RadialGrid::new(1.0, nint).unwrap();
                let r = steady_residual(&grid, n, 1.0, 3.0).unwrap();
                if let Some(p) = prev {
                    let order = (p / r).log2();
                    assert!(order > 1.8, "n = {n}: order {order}");
                }
                prev = Some(r);
            }
        }
    }

    #[test]
    fn planar_barrier_is_a_discrete_steady_state() {
        // At n = 2 the stencil reproduces the barrier up to rounding.
        for &nint in &[255usize, 1023] {
            let grid = RadialGrid::new(1.0, nint).unwrap();
            let r = steady_residual(&grid, 2, 1.0, 3.0).unwrap();
            let scale = 8.0 * std::f64::consts::PI / grid.spacing().powi(2);
            assert!(r < 1e-13 * scale, "{r}");
        }
    }

    #[test]
    fn step_rejects_tiny_dt() {
        let grid = RadialGrid::new(1.0, 31).unwrap();
        let p = MassProfile::new(grid, 2, vec![0.0; 33], 0.0).unwrap();
        assert!(matches!(step(&p, &cfg(), 1e-14), Err(SolverError::StepCollapse { .. })));
    }
}
