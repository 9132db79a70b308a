use super::{MassProfile, SolverError};
use crate::model::{ball_volume, DimensionConstants};

/// Samples for the post-check in [`choose_k`].
const VERIFY_POINTS: usize = 1024;

fn ceiling(n: usize, chi: f64) -> f64 {
    let omega = n as f64 * ball_volume(n).unwrap_or(f64::NAN);
    2.0 * n as f64 * omega / chi
}

/// `M̄(r) = (2nω_n/χ)·k rⁿ/(1 + k rⁿ)`. Requires `n ≥ 1`.
pub fn supersolution(r: f64, k: f64, n: usize, chi: f64) -> f64 {
    let x = k * r.powi(n as i32);
    let t = ceiling(n, chi);
    if x.is_infinite() {
        t
    } else {
        t * x / (1.0 + x)
    }
}

/// `|∇v|` for `M = M̄`: `(2n/χ)·k r/(1 + k rⁿ)`.
pub fn supersolution_grad_v(r: f64, k: f64, n: usize, chi: f64) -> f64 {
    2.0 * n as f64 / chi * k * r / (1.0 + k * r.powi(n as i32))
}

fn check_safety(safety: f64) -> Result<(), SolverError> {
    if safety.is_finite() && safety >= 1.0 {
        Ok(())
    } else {
        Err(SolverError::Domain(format!("safety factor must be >= 1, got {safety}")))
    }
}

/// Picks `k` so that `θ < M̄(L)` and `C rⁿ ≤ M̄(r)` on `[0, L]` with
/// `C = α_n·u0_sup`, which dominates any initial mass with that sup norm.
pub fn choose_k(theta: f64, u0_sup: f64, length: f64, n: usize, chi: f64, safety: f64) -> Result<f64, SolverError> {
    let dims = DimensionConstants::new(n)?;
    check_safety(safety)?;
    if !(theta >= 0.0 && u0_sup >= 0.0 && length > 0.0 && chi > 0.0) {
        return Err(SolverError::Domain(format!(
            "need theta, u0_sup >= 0 and L, chi > 0; got theta = {theta}, u0_sup = {u0_sup}, L = {length}, chi = {chi}"
        )));
    }
    let t = 2.0 * n as f64 * dims.omega_n / chi;
    if theta >= t {
        return Err(SolverError::HypothesisViolated(format!("theta = {theta} >= 2n*omega_n/chi = {t}")));
    }
    let c = dims.alpha_n * u0_sup;
    let ln = length.powi(n as i32);
    if c * ln >= t {
        return Err(SolverError::Infeasible(format!(
            "C*L^n = {} >= {t}: no member of the family dominates C*r^n",
            c * ln
        )));
    }
    let mut k = safety * (theta / (ln * (t - theta))).max(c / (t - c * ln));
    if k == 0.0 {
        k = safety / ln;
    }

    let ok_edge = theta < supersolution(length, k, n, chi) || theta == 0.0;
    let ok_bulk = (0..=VERIFY_POINTS).all(|j| {
        let r = length * j as f64 / VERIFY_POINTS as f64;
        c * r.powi(n as i32) <= supersolution(r, k, n, chi) * (1.0 + 1e-14)
    });
    if !(ok_edge && ok_bulk) {
        return Err(SolverError::Infeasible(format!("k = {k} fails the domination check")));
    }
    Ok(k)
}

/// Smallest `k` (times `safety`) whose barrier lies above the given
/// profile at every node. Useful when [`choose_k`] is infeasible because
/// the sup-norm bound `C rⁿ` is too coarse.
pub fn choose_k_dominating(profile: &MassProfile, chi: f64, safety: f64) -> Result<f64, SolverError> {
    let dims = DimensionConstants::new(profile.n)?;
    check_safety(safety)?;
    let t = 2.0 * profile.n as f64 * dims.omega_n / chi;
    if profile.theta >= t {
        return Err(SolverError::HypothesisViolated(format!(
            "theta = {} >= 2n*omega_n/chi = {t}",
            profile.theta
        )));
    }
    let radii = profile.grid.nodes();
    let need = radii
        .iter()
        .zip(&profile.values)
        .skip(1)
        .filter(|(_, &m)| m > 0.0)
        .map(|(r, &m)| m / (r.powi(profile.n as i32) * (t - m)))
        .fold(0.0, f64::max);
    let k = if need > 0.0 { safety * need } else { safety / profile.grid.length.powi(profile.n as i32) };
    Ok(k)
}

/// `max_i (M_i − M̄(r_i))₊`.
pub fn comparison_violation(profile: &MassProfile, k: f64, chi: f64) -> f64 {
    profile
        .grid
        .nodes()
        .iter()
        .zip(&profile.values)
        .map(|(&r, &m)| (m - supersolution(r, k, profile.n, chi)).max(0.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radialsolver::RadialGrid;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_values() {
        assert_eq!(supersolution(0.0, 3.0, 2, 1.0), 0.0);
        assert!((supersolution(1.0, 1.0, 2, 1.0) - 4.0 * PI).abs() < 1e-14);
        let top = supersolution(1.0, 1e300, 2, 1.0);
        assert!(top <= 8.0 * PI && top > 8.0 * PI * (1.0 - 1e-12));
        assert_eq!(supersolution(2.0, f64::INFINITY, 2, 1.0), 8.0 * PI);
    }

    #[test]
    fn choose_k_examples() {
        let k = choose_k(4.0 * PI, 4.0, 1.0, 2, 1.0, 2.0).unwrap();
        assert!((k - 2.0).abs() < 1e-12);
        assert!(matches!(choose_k(8.0 * PI, 1.0, 1.0, 2, 1.0, 2.0), Err(SolverError::HypothesisViolated(_))));
        assert!(matches!(choose_k(PI, 10.0, 1.0, 2, 1.0, 2.0), Err(SolverError::Infeasible(_))));
        assert!(choose_k(PI, 1.0, 1.0, 2, 1.0, 0.5).is_err());
    }

    #[test]
    fn dominating_k_covers_profile() {
        let grid = RadialGrid::new(1.0, 200).unwrap();
        let theta = 4.0 * PI;
        let p = MassProfile::from_fn(grid, 2, |r| theta * (1.0 - (-r * r / 0.08).exp()) / (1.0 - (-12.5f64).exp()))
            .unwrap();
        let k = choose_k_dominating(&p, 1.0, 2.0).unwrap();
        assert_eq!(comparison_violation(&p, k, 1.0), 0.0);
        assert!(supersolution(1.0, k, 2, 1.0) > theta);
    }

    #[test]
    fn violation_zero_on_barrier() {
        let grid = RadialGrid::new(1.0, 63).unwrap();
        let p = MassProfile::from_fn(grid, 3, |r| supersolution(r, 2.0, 3, 1.5)).unwrap();
        assert_eq!(comparison_violation(&p, 2.0, 1.5), 0.0);
        let z = MassProfile::new(grid, 3, vec![0.0; 65], 0.0).unwrap();
        assert_eq!(comparison_violation(&z, 2.0, 1.5), 0.0);
    }
}
