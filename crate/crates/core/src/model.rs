//! Dimensional constants, the χ-profile catalog and critical-mass formulas.
//!
//! Two geometric constants are carried side by side: `alpha_n`, the volume
//! of the unit n-ball, and `omega_n = n * alpha_n`, the area of the unit
//! sphere. The blow-up formulas (moment method on the whole space) are
//! written with `alpha_n`; the radial global-existence formulas (cumulative
//! mass on a ball) with `omega_n`. With that binding both routes give
//! `8π/χ` in the plane.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::norm_sq;
use crate::sampling::uniform_in_shell;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("radius {radius} outside tabulated range [{lo}, {hi}]")]
    Range { radius: f64, lo: f64, hi: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid chi profile: {0}")]
    InvalidProfile(String),
}

/// Volume of the unit ball in `n` dimensions, `π^{n/2} / Γ(n/2 + 1)`.
///
/// Evaluated through the recurrence `V_n = 2π/n · V_{n-2}` from `V_0 = 1`
/// and `V_1 = 2`, which avoids a Gamma function and is exact to rounding.
pub fn ball_volume(n: usize) -> Result<f64, ModelError> {
    if n < 1 {
        return Err(ModelError::Domain("ball_volume needs n >= 1".into()));
    }
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(v)
}

/// Geometric constants for dimension `n >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    /// Unit-ball volume.
    pub alpha_n: f64,
    /// Unit-sphere surface area.
    pub omega_n: f64,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::Domain(format!("dimension must be >= 2, got {n}")));
        }
        let alpha_n = ball_volume(n)?;
        Ok(Self { n, alpha_n, omega_n: n as f64 * alpha_n })
    }
}

/// Chemotactic coefficient χ(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChiProfile {
    /// χ(x) = chi0.
    Constant { chi0: f64 },
    /// χ(x) = |x|²/(1+|x|²) + 1.
    Saturating,
    /// χ(x) = arctan(|x|²).
    Arctan,
    /// χ(x) = strength · |x|^{exponent-2}.
    Power { strength: f64, exponent: f64 },
    /// χ(x) = x₁²/|x|, and 0 at the origin.
    Anisotropic,
    /// Piecewise-linear in |x| through sorted (radius, value) pairs.
    TabulatedRadial { table: Vec<(f64, f64)> },
}

impl ChiProfile {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ChiProfile::Constant { chi0 } => {
                if !(chi0.is_finite() && *chi0 > 0.0) {
                    return Err(ModelError::InvalidProfile(format!("chi0 must be > 0, got {chi0}")));
                }
            }
            ChiProfile::Power { strength, exponent } => {
                if !(strength.is_finite() && *strength > 0.0) {
                    return Err(ModelError::InvalidProfile(format!(
                        "strength must be > 0, got {strength}"
                    )));
                }
                if !(exponent.is_finite() && *exponent >= 2.0) {
                    return Err(ModelError::InvalidProfile(format!(
                        "exponent must be >= 2, got {exponent}"
                    )));
                }
            }
            ChiProfile::TabulatedRadial { table } => {
                if table.len() < 2 {
                    return Err(ModelError::InvalidProfile("table needs at least two rows".into()));
                }
                if table[0].0 < 0.0 {
                    return Err(ModelError::InvalidProfile("table radii must be >= 0".into()));
                }
                for w in table.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(ModelError::InvalidProfile(
                            "table radii must be strictly increasing".into(),
                        ));
                    }
                }
                if table.iter().any(|&(r, v)| !r.is_finite() || !v.is_finite() || v < 0.0) {
                    return Err(ModelError::InvalidProfile(
                        "table values must be finite and >= 0".into(),
                    ));
                }
            }
            ChiProfile::Saturating | ChiProfile::Arctan | ChiProfile::Anisotropic => {}
        }
        Ok(())
    }

    /// Evaluate χ at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, ModelError> {
        let s = norm_sq(x);
        match self {
            ChiProfile::Constant { chi0 } => Ok(*chi0),
            ChiProfile::Saturating => Ok(s / (1.0 + s) + 1.0),
            ChiProfile::Arctan => Ok(s.atan()),
            ChiProfile::Power { strength, exponent } => {
                Ok(strength * s.powf(0.5 * (exponent - 2.0)))
            }
            ChiProfile::Anisotropic => {
                if s == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(x[0] * x[0] / s.sqrt())
                }
            }
            ChiProfile::TabulatedRadial { table } => interpolate(table, s.sqrt()),
        }
    }

    pub fn at_origin(&self, dim: usize) -> Result<f64, ModelError> {
        self.eval(&vec![0.0; dim])
    }

    /// Whether the profile is radially nondecreasing by construction.
    pub fn declared_monotone(&self) -> bool {
        match self {
            ChiProfile::Constant { .. }
            | ChiProfile::Saturating
            | ChiProfile::Arctan
            | ChiProfile::Power { .. } => true,
            ChiProfile::Anisotropic => false,
            ChiProfile::TabulatedRadial { table } => table.windows(2).all(|w| w[1].1 >= w[0].1),
        }
    }

    /// Default region for random sampling: the plane, radius range of the
    /// table for tabulated profiles and `[0, 2]` otherwise.
    pub fn default_domain(&self) -> SamplingDomain {
        match self {
            ChiProfile::TabulatedRadial { table } => SamplingDomain {
                dim: 2,
                r_min: table[0].0,
                r_max: table[table.len() - 1].0,
            },
            _ => SamplingDomain { dim: 2, r_min: 0.0, r_max: 2.0 },
        }
    }

    /// If the profile has the form `χ·|x|^{p-2}`, returns `(χ, p)`.
    pub fn power_form(&self) -> Option<(f64, f64)> {
        match self {
            ChiProfile::Constant { chi0 } => Some((*chi0, 2.0)),
            ChiProfile::Power { strength, exponent } => Some((*strength, *exponent)),
            _ => None,
        }
    }
}

fn interpolate(table: &[(f64, f64)], r: f64) -> Result<f64, ModelError> {
    let lo = table[0].0;
    let hi = table[table.len() - 1].0;
    if !(r >= lo && r <= hi) {
        return Err(ModelError::Range { radius: r, lo, hi });
    }
    let j = table.partition_point(|&(ri, _)| ri <= r);
    if j >= table.len() {
        return Ok(table[table.len() - 1].1);
    }
    let (r0, v0) = table[j - 1];
    let (r1, v1) = table[j];
    let t = (r - r0) / (r1 - r0);
    Ok(v0 + t * (v1 - v0))
}

/// Evaluate a profile at a point; equivalent to [`ChiProfile::eval`].
pub fn chi_eval(profile: &ChiProfile, x: &[f64]) -> Result<f64, ModelError> {
    profile.eval(x)
}

/// Region `r_min <= |x| <= r_max` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingDomain {
    pub dim: usize,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    /// The point with the larger norm.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// χ(x) − χ(y).
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub holds: bool,
    pub worst_pair: Option<WorstPair>,
    pub samples: usize,
}

pub const MONOTONE_TOLERANCE: f64 = 1e-12;

/// Randomized check of `|x| >= |y| ⇒ χ(x) >= χ(y)` on the profile's default
/// sampling domain.
pub fn check_radial_monotone(
    profile: &ChiProfile,
    sample_count: usize,
    seed: u64,
) -> Result<MonotoneReport, ModelError> {
    check_radial_monotone_in(profile, profile.default_domain(), sample_count, seed)
}

pub fn check_radial_monotone_in(
    profile: &ChiProfile,
    domain: SamplingDomain,
    sample_count: usize,
    seed: u64,
) -> Result<MonotoneReport, ModelError> {
    if sample_count < 2 {
        return Err(ModelError::Domain("sample_count must be >= 2".into()));
    }
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<WorstPair> = None;
    for _ in 0..sample_count {
        let a = uniform_in_shell(&mut rng, domain.dim, domain.r_min, domain.r_max);
        let b = uniform_in_shell(&mut rng, domain.dim, domain.r_min, domain.r_max);
        let (x, y) = if norm_sq(&a) >= norm_sq(&b) { (a, b) } else { (b, a) };
        let gap = profile.eval(&x)? - profile.eval(&y)?;
        if worst.as_ref().is_none_or(|w| gap < w.gap) {
            worst = Some(WorstPair { x, y, gap });
        }
    }
    let holds = worst.as_ref().is_none_or(|w| w.gap >= -MONOTONE_TOLERANCE);
    Ok(MonotoneReport { holds, worst_pair: worst, samples: sample_count })
}

/// Mass above which the moment method rules out global solutions.
///
/// * `n = 2`: `8π/χ(0)` for a radially nondecreasing χ; `p` is ignored.
/// * `n >= 3`, `p = n`: `2ⁿ·n·alpha_n/χ` for `χ·|x|^{n-2}`.
///
/// For `n >= 3` with `p < n` the certificate is a moment condition, see
/// [`crate::momentflow::cb_threshold`].
pub fn critical_mass_blowup(n: usize, chi0: f64, p: f64) -> Result<f64, ModelError> {
    if !(chi0.is_finite() && chi0 > 0.0) {
        return Err(ModelError::Domain(format!("chi must be > 0, got {chi0}")));
    }
    match n {
        0 | 1 => Err(ModelError::Domain(format!("dimension must be >= 2, got {n}"))),
        2 => Ok(8.0 * PI / chi0),
        _ => {
            if p != n as f64 {
                return Err(ModelError::Unsupported(format!(
                    "no mass threshold for p = {p} < n = {n}; use the moment threshold"
                )));
            }
            let dc = DimensionConstants::new(n)?;
            Ok(2f64.powi(n as i32) * n as f64 * dc.alpha_n / chi0)
        }
    }
}

/// Mass below which radial solutions on a ball exist globally, `2·n·omega_n/χ`.
pub fn critical_mass_global(n: usize, chi: f64) -> Result<f64, ModelError> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(ModelError::Domain(format!("chi must be > 0, got {chi}")));
    }
    let dc = DimensionConstants::new(n)?;
    Ok(2.0 * n as f64 * dc.omega_n / chi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn ball_volume_low_dimensions() {
        assert!(rel(ball_volume(2).unwrap(), PI) < 1e-15);
        assert!(rel(ball_volume(3).unwrap(), 4.0 * PI / 3.0) < 1e-15);
        assert!(rel(ball_volume(4).unwrap(), PI * PI / 2.0) < 1e-15);
        assert_eq!(ball_volume(1).unwrap(), 2.0);
        assert!(ball_volume(0).is_err());
    }

    #[test]
    fn dimension_constants_reject_line() {
        assert!(DimensionConstants::new(1).is_err());
        let d2 = DimensionConstants::new(2).unwrap();
        assert!(rel(d2.omega_n, 2.0 * PI) < 1e-15);
        let d3 = DimensionConstants::new(3).unwrap();
        assert!(rel(d3.omega_n, 4.0 * PI) < 1e-15);
    }

    #[test]
    fn catalog_values() {
        assert_eq!(ChiProfile::Saturating.eval(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(ChiProfile::Anisotropic.eval(&[0.0, 0.0]).unwrap(), 0.0);
        let p = ChiProfile::Power { strength: 2.0, exponent: 3.0 };
        assert!((p.eval(&[0.0, 0.0, 2.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!((ChiProfile::Anisotropic.eval(&[0.5, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ChiProfile::Anisotropic.eval(&[0.0, 1.0]).unwrap(), 0.0);
        // p = 2 reduces to a constant, including at the origin
        let flat = ChiProfile::Power { strength: 3.0, exponent: 2.0 };
        assert_eq!(flat.eval(&[0.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn tabulated_interpolates_and_refuses_extrapolation() {
        let t = ChiProfile::TabulatedRadial { table: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 3.5)] };
        t.validate().unwrap();
        assert!((t.eval(&[0.5, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((t.eval(&[0.0, 1.5]).unwrap() - 3.25).abs() < 1e-15);
        assert_eq!(t.eval(&[2.0, 0.0]).unwrap(), 3.5);
        assert!(matches!(t.eval(&[2.5, 0.0]), Err(ModelError::Range { .. })));
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(ChiProfile::Constant { chi0: 0.0 }.validate().is_err());
        assert!(ChiProfile::Power { strength: 1.0, exponent: 1.5 }.validate().is_err());
        let unsorted = ChiProfile::TabulatedRadial { table: vec![(1.0, 1.0), (0.5, 1.0)] };
        assert!(unsorted.validate().is_err());
        let negative = ChiProfile::TabulatedRadial { table: vec![(0.0, -1.0), (1.0, 1.0)] };
        assert!(negative.validate().is_err());
    }

    #[test]
    fn monotone_check_outcomes() {
        assert!(check_radial_monotone(&ChiProfile::Saturating, 10_000, 1).unwrap().holds);
        assert!(check_radial_monotone(&ChiProfile::Arctan, 10_000, 2).unwrap().holds);
        let aniso = check_radial_monotone(&ChiProfile::Anisotropic, 10_000, 3).unwrap();
        assert!(!aniso.holds);
        assert!(aniso.worst_pair.unwrap().gap < -0.1);
        let decreasing = ChiProfile::TabulatedRadial { table: vec![(0.0, 1.0), (1.0, 0.5)] };
        assert!(!decreasing.declared_monotone());
        assert!(!check_radial_monotone(&decreasing, 10_000, 4).unwrap().holds);
        assert!(check_radial_monotone(&ChiProfile::Arctan, 1, 0).is_err());
    }

    #[test]
    fn anisotropic_counterexample_pair() {
        let x = [0.0, 1.0];
        let y = [0.5, 0.0];
        let gap = ChiProfile::Anisotropic.eval(&x).unwrap() - ChiProfile::Anisotropic.eval(&y).unwrap();
        assert!((gap + 0.5).abs() < 1e-15);
    }

    #[test]
    fn thresholds() {
        assert!(rel(critical_mass_blowup(2, 1.0, 0.0).unwrap(), 8.0 * PI) < 1e-12);
        assert!(rel(critical_mass_blowup(2, 2.0, 2.0).unwrap(), 4.0 * PI) < 1e-12);
        assert!(rel(critical_mass_blowup(3, 1.0, 3.0).unwrap(), 32.0 * PI) < 1e-12);
        assert!(matches!(
            critical_mass_blowup(3, 1.0, 2.0),
            Err(ModelError::Unsupported(_))
        ));
        assert!(rel(critical_mass_global(2, 1.0).unwrap(), 8.0 * PI) < 1e-12);
        assert!(rel(critical_mass_global(2, 4.0).unwrap(), 2.0 * PI) < 1e-12);
        assert!(rel(critical_mass_global(3, 1.0).unwrap(), 24.0 * PI) < 1e-12);
        assert!(critical_mass_global(2, -1.0).is_err());
    }

    #[test]
    fn planar_thresholds_coincide() {
        for chi in [0.3, 1.0, 2.5, 7.0] {
            assert_eq!(
                critical_mass_blowup(2, chi, 2.0).unwrap(),
                critical_mass_global(2, chi).unwrap()
            );
        }
    }

    #[test]
    fn profile_serde_roundtrip_and_unknown_keys() {
        let p: ChiProfile = serde_json::from_str(r#"{"kind":"power","strength":1.0,"exponent":3.0}"#).unwrap();
        assert_eq!(p, ChiProfile::Power { strength: 1.0, exponent: 3.0 });
        let bad = serde_json::from_str::<ChiProfile>(r#"{"kind":"constant","chi0":1.0,"extra":2}"#);
        assert!(bad.is_err());
        let t: ChiProfile =
            serde_json::from_str(r#"{"kind":"tabulated-radial","table":[[0,1],[1,2]]}"#).unwrap();
        assert!(t.declared_monotone());
    }
}
