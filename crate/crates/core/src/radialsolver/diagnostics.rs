use super::{MassProfile, SolverError};
use crate::kernelmath::SampleDensity;
use crate::model::DimensionConstants;
use crate::numerics::trapezoid;

/// Nodal density recovered from `M`, clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRecovery {
    pub values: Vec<f64>,
    /// Largest magnitude removed by the clamp.
    pub clamped: f64,
}

impl DensityRecovery {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn dims(profile: &MassProfile) -> DimensionConstants {
    DimensionConstants::new(profile.n).expect("profile dimension validated at construction")
}

/// `u_i = M'(r_i)/(ω_n r_i^{n−1})`: central differences inside,
/// `M(r₁)/(α_n r₁ⁿ)` at the origin, second-order one-sided at `L`.
pub fn recover_density(profile: &MassProfile) -> DensityRecovery {
    let d = dims(profile);
    let m = &profile.values;
    let len = m.len();
    let dr = profile.grid.spacing();
    let radii = profile.grid.nodes();
    let pow = profile.n as i32 - 1;
    let mut values = Vec::with_capacity(len);
    values.push(m[1] / (d.alpha_n * radii[1].powi(pow + 1)));
    for i in 1..len - 1 {
        values.push((m[i + 1] - m[i - 1]) / (2.0 * dr * d.omega_n * radii[i].powi(pow)));
    }
    let slope = (3.0 * m[len - 1] - 4.0 * m[len - 2] + m[len - 3]) / (2.0 * dr);
    values.push(slope / (d.omega_n * radii[len - 1].powi(pow)));

    let mut clamped = 0.0_f64;
    for v in &mut values {
        if *v < 0.0 {
            clamped = clamped.max(-*v);
            *v = 0.0;
        }
    }
    DensityRecovery { values, clamped }
}

/// `m = L²θ − 2∫₀ᴸ r M(r) dr` by the trapezoid rule.
pub fn second_moment_of(profile: &MassProfile) -> f64 {
    let radii = profile.grid.nodes();
    let rm: Vec<f64> = radii.iter().zip(&profile.values).map(|(r, m)| r * m).collect();
    let l = profile.grid.length;
    l * l * profile.theta - 2.0 * trapezoid(&radii, &rm)
}

/// `|∇v(r_i)| = M(r_i)/(ω_n r_i^{n−1})`.
pub fn grad_v_magnitude(profile: &MassProfile, i: usize) -> Result<f64, SolverError> {
    if i == 0 {
        return Err(SolverError::SingularRadius);
    }
    let m = *profile
        .values
        .get(i)
        .ok_or_else(|| SolverError::Domain(format!("node {i} out of range")))?;
    let r = profile.grid.node(i);
    Ok(m.max(0.0) / (dims(profile).omega_n * r.powi(profile.n as i32 - 1)))
}

/// `max_{i ≥ 1} |∇v(r_i)|`.
pub fn grad_v_max(profile: &MassProfile) -> f64 {
    (1..profile.values.len())
        .map(|i| grad_v_magnitude(profile, i).unwrap_or(0.0))
        .fold(0.0, f64::max)
}

impl MassProfile {
    /// Radial-grid sample density built from the recovered nodal values.
    pub fn to_sample_density(&self) -> Result<SampleDensity, SolverError> {
        let rec = recover_density(self);
        Ok(SampleDensity::radial_grid(self.n, self.grid.nodes(), rec.values)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radialsolver::{supersolution, RadialGrid};
    use std::f64::consts::PI;

    fn grid() -> RadialGrid {
        RadialGrid::new(1.0, 99).unwrap()
    }

    #[test]
    fn quadratic_gives_constant_density() {
        let p = MassProfile::from_fn(grid(), 2, |r| r * r).unwrap();
        let rec = recover_density(&p);
        for u in &rec.values {
            assert!((u - 1.0 / PI).abs() < 1e-10);
        }
        assert_eq!(rec.clamped, 0.0);
    }

    #[test]
    fn zero_profile() {
        let p = MassProfile::new(grid(), 3, vec![0.0; 101], 0.0).unwrap();
        assert!(recover_density(&p).values.iter().all(|&u| u == 0.0));
        assert_eq!(second_moment_of(&p), 0.0);
        assert_eq!(grad_v_max(&p), 0.0);
    }

    #[test]
    fn supersolution_density_at_one() {
        // d/dr[8π r²/(1+r²)] / (2π r) at r = 1 is 2.
        let g = RadialGrid::new(1.0, 999).unwrap();
        let p = MassProfile::from_fn(g, 2, |r| supersolution(r, 1.0, 2, 1.0)).unwrap();
        let u = recover_density(&p).values;
        assert!((u[1000] - 2.0).abs() < 1e-5, "{}", u[1000]);
        assert!((u[0] - 8.0).abs() < 1e-4, "{}", u[0]);
    }

    #[test]
    fn second_moment_cases() {
        let theta = 2.5;
        let point = MassProfile::from_fn(grid(), 2, |_| theta).unwrap();
        // The trapezoid rule sees the first cell as a ramp.
        assert!(second_moment_of(&point).abs() < theta * grid().spacing().powi(2));

        let disc = MassProfile::from_fn(grid(), 2, |r| theta * r * r).unwrap();
        assert!((second_moment_of(&disc) - theta / 2.0).abs() < 1e-3);
    }

    #[test]
    fn grad_v_cases() {
        let theta = 3.0;
        let g = grid();
        let p = MassProfile::from_fn(g, 2, |r| theta * r * r).unwrap();
        let last = g.len() - 1;
        let got = grad_v_magnitude(&p, last).unwrap();
        assert!((got - theta / (2.0 * PI)).abs() < 1e-14);
        assert!(matches!(grad_v_magnitude(&p, 0), Err(SolverError::SingularRadius)));
    }
}
