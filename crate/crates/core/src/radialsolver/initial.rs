use serde::{Deserialize, Serialize};

use super::{MassProfile, RadialGrid, SolverError};
use crate::model::DimensionConstants;
use crate::numerics::cumulative_trapezoid;

/// Minimum number of grid nodes across a bump width or annulus thickness.
pub const MIN_NODES_ACROSS: f64 = 8.0;

/// Radial initial densities. Every variant carries the requested total mass;
/// the shape is rescaled so the discrete `M(L, 0)` equals it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDensity {
    Uniform { mass: f64 },
    /// `exp(−r²/(2w²))` centred at the origin.
    GaussianBump { mass: f64, width: f64 },
    /// Constant on `r_in ≤ r ≤ r_out`, zero elsewhere.
    Annulus { mass: f64, r_in: f64, r_out: f64 },
    /// Piecewise-linear in `r` through `(radius, density)` rows covering `[0, L]`.
    Table { mass: f64, table: Vec<(f64, f64)> },
}

impl InitialDensity {
    pub fn mass(&self) -> f64 {
        match *self {
            Self::Uniform { mass }
            | Self::GaussianBump { mass, .. }
            | Self::Annulus { mass, .. }
            | Self::Table { mass, .. } => mass,
        }
    }

    /// Same shape, different mass.
    pub fn with_mass(&self, mass: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Uniform { mass: m }
            | Self::GaussianBump { mass: m, .. }
            | Self::Annulus { mass: m, .. }
            | Self::Table { mass: m, .. } => *m = mass,
        }
        out
    }

    pub fn validate(&self, length: f64) -> Result<(), SolverError> {
        let mass = self.mass();
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(SolverError::Domain(format!("mass must be >= 0, got {mass}")));
        }
        match self {
            Self::Uniform { .. } => {}
            Self::GaussianBump { width, .. } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(SolverError::Domain(format!("width must be > 0, got {width}")));
                }
            }
            Self::Annulus { r_in, r_out, .. } => {
                if !(*r_in >= 0.0 && r_in < r_out && *r_out <= length) {
                    return Err(SolverError::Domain(format!(
                        "annulus needs 0 <= r_in < r_out <= L, got [{r_in}, {r_out}] with L = {length}"
                    )));
                }
            }
            Self::Table { table, .. } => {
                if table.len() < 2 {
                    return Err(SolverError::Domain("table needs at least two rows".into()));
                }
                if table.iter().any(|(r, u)| !r.is_finite() || !u.is_finite()) {
                    return Err(SolverError::Domain("table has non-finite entries".into()));
                }
                if let Some((r, u)) = table.iter().find(|(_, u)| *u < 0.0) {
                    return Err(SolverError::Domain(format!("negative density {u} at r = {r}")));
                }
                if !table.windows(2).all(|w| w[1].0 > w[0].0) {
                    return Err(SolverError::Domain("table radii must be strictly increasing".into()));
                }
                let (first, last) = (table[0].0, table[table.len() - 1].0);
                if first > 0.0 || last < length {
                    return Err(SolverError::Domain(format!(
                        "table covers [{first}, {last}], need [0, {length}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Unnormalised shape at radius `r`.
    fn shape(&self, r: f64) -> f64 {
        match self {
            Self::Uniform { .. } => 1.0,
            Self::GaussianBump { width, .. } => (-r * r / (2.0 * width * width)).exp(),
            Self::Annulus { r_in, r_out, .. } => {
                if (*r_in..=*r_out).contains(&r) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Table { table, .. } => interpolate(table, r),
        }
    }

    /// Smallest feature length the grid has to resolve.
    fn feature_width(&self) -> Option<f64> {
        match self {
            Self::GaussianBump { width, .. } => Some(*width),
            Self::Annulus { r_in, r_out, .. } => Some(r_out - r_in),
            _ => None,
        }
    }

    /// Rejects grids with fewer than [`MIN_NODES_ACROSS`] spacings across
    /// the feature width.
    pub fn check_resolution(&self, grid: &RadialGrid) -> Result<(), SolverError> {
        if let Some(w) = self.feature_width() {
            let across = w / grid.spacing();
            if across < MIN_NODES_ACROSS {
                return Err(SolverError::Infeasible(format!(
                    "feature width {w} spans {across:.2} grid spacings, need at least {MIN_NODES_ACROSS}"
                )));
            }
        }
        Ok(())
    }
}

fn interpolate(table: &[(f64, f64)], r: f64) -> f64 {
    let idx = table.partition_point(|(x, _)| *x <= r);
    if idx == 0 {
        return table[0].1;
    }
    if idx == table.len() {
        return table[table.len() - 1].1;
    }
    let (x0, y0) = table[idx - 1];
    let (x1, y1) = table[idx];
    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
}

/// Initial profile together with the rescaled nodal density.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub profile: MassProfile,
    pub density: Vec<f64>,
}

impl InitialState {
    pub fn u0_sup(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }
}

/// Builds `M(r, 0)` by the trapezoid rule on `ω_n u₀(ρ) ρ^{n−1}`, rescaled so
/// `M(L, 0)` equals the requested mass.
pub fn initial_state(spec: &InitialDensity, grid: &RadialGrid, n: usize) -> Result<InitialState, SolverError> {
    let dims = DimensionConstants::new(n)?;
    spec.validate(grid.length)?;
    let radii = grid.nodes();
    let shape: Vec<f64> = radii.iter().map(|&r| spec.shape(r)).collect();
    let integrand: Vec<f64> = radii
        .iter()
        .zip(&shape)
        .map(|(&r, &u)| dims.omega_n * u * r.powi(n as i32 - 1))
        .collect();
    let mut values = cumulative_trapezoid(&radii, &integrand);
    let natural = values[values.len() - 1];
    let mass = spec.mass();

    let scale = if mass == 0.0 {
        0.0
    } else if natural > 0.0 {
        mass / natural
    } else {
        return Err(SolverError::Domain("initial density vanishes on the grid".into()));
    };
    for v in &mut values {
        *v *= scale;
    }
    let last = values.len() - 1;
    values[last] = mass;
    let density = shape.iter().map(|u| u * scale).collect();
    let profile = MassProfile::new(*grid, n, values, 0.0)?;
    Ok(InitialState { profile, density })
}

pub fn init_mass_profile(spec: &InitialDensity, grid: &RadialGrid, n: usize) -> Result<MassProfile, SolverError> {
    initial_state(spec, grid, n).map(|s| s.profile)
}
