//! Pointwise identities and inequalities behind the moment estimates, and
//! the double integrals they feed.
//!
//! Densities are either weighted point clouds or radial grids. Pairwise sums
//! skip coincident pairs whenever the kernel is singular; Monte-Carlo
//! estimates draw pairs independently from the normalized density and report
//! a standard error.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChiProfile, DimensionConstants, ModelError};
use crate::numerics::{norm_sq, trapezoid, CompensatedSum};
use crate::sampling::unit_direction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("degenerate pair: x and y coincide")]
    DegeneratePair,
    #[error("degenerate density: {0}")]
    DegenerateDensity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("singular case: {0}")]
    Singular(String),
    #[error("table parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Number of directions used when a radial grid is spread into a point cloud.
pub const CLOUD_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// Flat positions (`dim` coordinates per point) and nonnegative weights.
    PointCloud { positions: Vec<f64>, weights: Vec<f64> },
    /// Radial density values on increasing radii.
    RadialGrid { radii: Vec<f64>, values: Vec<f64> },
}

/// Nonnegative density with cached total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDensity {
    repr: Representation,
    dim: usize,
    total_mass: f64,
}

impl SampleDensity {
    pub fn point_cloud(dim: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self, KernelError> {
        if dim == 0 {
            return Err(KernelError::InvalidDensity("dimension must be >= 1".into()));
        }
        if positions.len() != dim * weights.len() {
            return Err(KernelError::InvalidDensity(format!(
                "{} coordinates do not match {} points in dimension {dim}",
                positions.len(),
                weights.len()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::InvalidDensity("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(KernelError::InvalidDensity("weights must be finite and >= 0".into()));
        }
        let total_mass = weights.iter().copied().collect::<CompensatedSum>().value();
        if !(total_mass > 0.0) {
            return Err(KernelError::InvalidDensity("total mass must be > 0".into()));
        }
        Ok(Self { repr: Representation::PointCloud { positions, weights }, dim, total_mass })
    }

    /// Equal-weight cloud from a list of points.
    pub fn from_points(points: &[Vec<f64>], mass: f64) -> Result<Self, KernelError> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(KernelError::InvalidDensity("points of mixed dimension".into()));
        }
        let w = mass / points.len() as f64;
        Self::point_cloud(dim, points.concat(), vec![w; points.len()])
    }

    pub fn radial_grid(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self, KernelError> {
        if dim < 2 {
            return Err(KernelError::InvalidDensity("radial grids need dimension >= 2".into()));
        }
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(KernelError::InvalidDensity(
                "radial grid needs matching radii/values with at least two nodes".into(),
            ));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(KernelError::InvalidDensity("radii must be >= 0 and strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(KernelError::InvalidDensity("density values must be finite and >= 0".into()));
        }
        let total_mass = radial_mass(dim, &radii, &values);
        if !(total_mass > 0.0) {
            return Err(KernelError::InvalidDensity("total mass must be > 0".into()));
        }
        Ok(Self { repr: Representation::RadialGrid { radii, values }, dim, total_mass })
    }

    /// Parses a whitespace- or comma-separated table, one point per row:
    /// coordinates followed by the weight. Blank lines and `#` comments are
    /// ignored.
    pub fn from_table_str(text: &str) -> Result<Self, KernelError> {
        let mut dim = None;
        let mut positions = Vec::new();
        let mut weights = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Result<Vec<f64>, _> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::parse::<f64>)
                .collect();
            let fields = fields.map_err(|e| KernelError::Parse { line: idx + 1, message: e.to_string() })?;
            if fields.len() < 2 {
                return Err(KernelError::Parse {
                    line: idx + 1,
                    message: "need at least one coordinate and a weight".into(),
                });
            }
            let d = fields.len() - 1;
            match dim {
                None => dim = Some(d),
                Some(expected) if expected != d => {
                    return Err(KernelError::Parse {
                        line: idx + 1,
                        message: format!("expected {expected} coordinates, found {d}"),
                    })
                }
                _ => {}
            }
            positions.extend_from_slice(&fields[..d]);
            weights.push(fields[d]);
        }
        let dim = dim.ok_or_else(|| KernelError::Parse { line: 0, message: "empty table".into() })?;
        Self::point_cloud(dim, positions, weights)
    }

    pub fn from_table_path(path: impl AsRef<Path>) -> Result<Self, KernelError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| KernelError::Io(e.to_string()))?;
        Self::from_table_str(&text)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// Point-cloud view. A radial grid is spread over `directions` points per
    /// shell at the cell midpoint radius, each shell carrying its trapezoid
    /// mass, so no two points coincide.
    pub fn to_point_cloud(&self, directions: usize, seed: u64) -> SampleDensity {
        match &self.repr {
            Representation::PointCloud { .. } => self.clone(),
            Representation::RadialGrid { radii, values } => {
                let shells = shell_masses(self.dim, radii, values);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = directions.max(1);
                let mut positions = Vec::new();
                let mut weights = Vec::new();
                let golden = 0.5 * (5f64.sqrt() - 1.0);
                for (i, &mass) in shells.iter().enumerate() {
                    if mass <= 0.0 {
                        continue;
                    }
                    let r = 0.5 * (radii[i] + radii[i + 1]);
                    for j in 0..k {
                        if self.dim == 2 {
                            let phase = (i as f64 * golden).fract();
                            let a = 2.0 * PI * (j as f64 + phase) / k as f64;
                            positions.push(r * a.cos());
                            positions.push(r * a.sin());
                        } else {
                            positions.extend(unit_direction(&mut rng, self.dim).into_iter().map(|c| c * r));
                        }
                        weights.push(mass / k as f64);
                    }
                }
                SampleDensity::point_cloud(self.dim, positions, weights)
                    .expect("radial grid with positive mass yields a valid cloud")
            }
        }
    }
}

fn radial_weight(dim: usize) -> f64 {
    DimensionConstants::new(dim).map(|d| d.omega_n).unwrap_or(f64::NAN)
}

fn radial_mass(dim: usize, radii: &[f64], values: &[f64]) -> f64 {
    let omega = radial_weight(dim);
    let f: Vec<f64> =
        radii.iter().zip(values).map(|(r, u)| omega * u * r.powi(dim as i32 - 1)).collect();
    trapezoid(radii, &f)
}

fn shell_masses(dim: usize, radii: &[f64], values: &[f64]) -> Vec<f64> {
    let omega = radial_weight(dim);
    let f: Vec<f64> =
        radii.iter().zip(values).map(|(r, u)| omega * u * r.powi(dim as i32 - 1)).collect();
    (1..radii.len()).map(|i| 0.5 * (f[i] + f[i - 1]) * (radii[i] - radii[i - 1])).collect()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x == y {
        return Err(KernelError::DegeneratePair);
    }
    Ok(())
}

/// `2[χ(x)x − χ(y)y]·(x−y) − (χ(x)+χ(y))|x−y|² − (|x|²−|y|²)(χ(x)−χ(y))`.
pub fn identity_residual(profile: &ChiProfile, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    Ok(identity_sides(profile, x, y)?.residual())
}

/// Both sides of the polarization identity, for relative-error reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySides {
    pub lhs: f64,
    pub rhs: f64,
}

impl IdentitySides {
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }

    /// `|lhs − rhs| / (1 + |lhs|)`.
    pub fn relative_residual(&self) -> f64 {
        self.residual().abs() / (1.0 + self.lhs.abs())
    }
}

pub fn identity_sides(profile: &ChiProfile, x: &[f64], y: &[f64]) -> Result<IdentitySides, KernelError> {
    check_pair(x, y)?;
    let cx = profile.eval(x)?;
    let cy = profile.eval(y)?;
    let lhs = 2.0 * x.iter().zip(y).map(|(a, b)| (cx * a - cy * b) * (a - b)).sum::<f64>();
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let rhs = (cx + cy) * d2 + (norm_sq(x) - norm_sq(y)) * (cx - cy);
    Ok(IdentitySides { lhs, rhs })
}

/// Evaluated chain `[χ(x)x − χ(y)y]·(x−y)/|x−y|² ≥ (χ(x)+χ(y))/2 ≥ χ(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneChain {
    pub ratio: f64,
    pub half_sum: f64,
    pub chi_origin: f64,
}

impl MonotoneChain {
    pub fn gap(&self) -> f64 {
        self.ratio - self.half_sum
    }
}

/// The quotient is evaluated as `half_sum + (χ(x)−χ(y))·(x+y)·(x−y)/(2|x−y|²)`,
/// which equals the direct quotient exactly and stays accurate for close
/// pairs where the direct form cancels.
pub fn monotone_chain(profile: &ChiProfile, x: &[f64], y: &[f64]) -> Result<MonotoneChain, KernelError> {
    check_pair(x, y)?;
    let cx = profile.eval(x)?;
    let cy = profile.eval(y)?;
    let chi_origin = profile.at_origin(x.len())?;
    let (half_sum, gap) = chain_terms(cx, cy, x, y);
    Ok(MonotoneChain { ratio: half_sum + gap, half_sum, chi_origin })
}

#[inline]
fn chain_terms(cx: f64, cy: f64, x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut d2 = 0.0;
    let mut sq_diff = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        d2 += d * d;
        sq_diff += (a + b) * d;
    }
    (0.5 * (cx + cy), (cx - cy) * sq_diff / (2.0 * d2))
}

/// `[χ(x)x − χ(y)y]·(x−y)/|x−y|² − (χ(x)+χ(y))/2`; nonnegative for radially
/// nondecreasing χ.
pub fn monotone_lower_bound_gap(profile: &ChiProfile, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    Ok(monotone_chain(profile, x, y)?.gap())
}

/// Both sides of `(|x|^{p−2}x − |y|^{p−2}y)·(x−y) ≥ 2^{2−p}|x−y|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetaSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl NetaSides {
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }
}

pub fn neta_sides(p: f64, x: &[f64], y: &[f64]) -> Result<NetaSides, KernelError> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(KernelError::Domain(format!("inequality needs p >= 2, got {p}")));
    }
    check_pair(x, y)?;
    let half = 0.5 * (p - 2.0);
    let sx = norm_sq(x).powf(half);
    let sy = norm_sq(y).powf(half);
    let mut lhs = 0.0;
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        lhs += (sx * a - sy * b) * d;
        d2 += d * d;
    }
    let rhs = 2f64.powf(2.0 - p) * d2.powf(0.5 * p);
    Ok(NetaSides { lhs, rhs })
}

pub fn neta_gap(p: f64, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    Ok(neta_sides(p, x, y)?.gap())
}

fn cloud_view(density: &SampleDensity) -> SampleDensity {
    density.to_point_cloud(CLOUD_DIRECTIONS, 0)
}

fn cloud_parts(cloud: &SampleDensity) -> (&[f64], &[f64]) {
    match &cloud.repr {
        Representation::PointCloud { positions, weights } => (positions, weights),
        Representation::RadialGrid { .. } => unreachable!("cloud_view returns a point cloud"),
    }
}

/// Deterministic symmetric pair sum `Σ_{i≠j} wᵢwⱼ k(i, j)` for a symmetric
/// kernel; `None` from the kernel marks a skipped pair. Rows are reduced in
/// parallel and merged in index order so the result does not depend on the
/// thread schedule.
fn symmetric_pair_sum<F>(positions: &[f64], weights: &[f64], dim: usize, kernel: F) -> (f64, usize)
where
    F: Fn(usize, &[f64], usize, &[f64]) -> Option<f64> + Sync,
{
    let n = weights.len();
    let rows: Vec<(CompensatedSum, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &positions[i * dim..(i + 1) * dim];
            let mut acc = CompensatedSum::new();
            let mut used = 0usize;
            for j in (i + 1)..n {
                let xj = &positions[j * dim..(j + 1) * dim];
                if let Some(k) = kernel(i, xi, j, xj) {
                    acc.add(2.0 * weights[i] * weights[j] * k);
                    used += 1;
                }
            }
            (acc, used)
        })
        .collect();
    let mut total = CompensatedSum::new();
    let mut pairs = 0;
    for (acc, used) in &rows {
        total.merge(acc);
        pairs += used;
    }
    (total.value(), pairs)
}

/// Symmetrized interaction `∫∫[χ(x)x − χ(y)y]·(x−y)/|x−y|² u(x)u(y)`
/// over off-diagonal pairs of a planar density.
///
/// For constant χ₀ on a point cloud this is exactly `χ₀·(M² − Σwᵢ²)`.
pub fn interaction_integral(density: &SampleDensity, profile: &ChiProfile) -> Result<f64, KernelError> {
    if density.dim != 2 {
        return Err(KernelError::DimensionMismatch { expected: 2, got: density.dim });
    }
    profile.validate()?;
    let cloud = cloud_view(density);
    let (positions, weights) = cloud_parts(&cloud);
    let dim = cloud.dim;
    let chi: Vec<f64> = positions
        .chunks_exact(dim)
        .map(|x| profile.eval(x))
        .collect::<Result<_, _>>()?;
    let (value, pairs) = symmetric_pair_sum(positions, weights, dim, |i, xi, j, xj| {
        if xi == xj {
            return None;
        }
        let (half_sum, gap) = chain_terms(chi[i], chi[j], xi, xj);
        Some(half_sum + gap)
    });
    if pairs == 0 {
        return Err(KernelError::DegenerateDensity("fewer than two distinct points".into()));
    }
    Ok(value)
}

/// Value with a (possibly zero) standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RieszMethod {
    /// Exhaustive off-diagonal pair sum over the point-cloud view.
    Pairwise,
    /// Independent pair sampling from the normalized density.
    MonteCarlo { pairs: usize, seed: u64 },
}

fn check_riesz_exponent(p: f64, n: usize) -> Result<(), KernelError> {
    if !p.is_finite() || p > n as f64 {
        return Err(KernelError::Domain(format!("Riesz exponent needs p <= n = {n}, got {p}")));
    }
    if p < 2.0 {
        return Err(KernelError::Domain(format!("Riesz exponent needs p >= 2, got {p}")));
    }
    Ok(())
}

/// `J = ∫∫ u(x)u(y)|x−y|^{p−n}` for `2 <= p <= n`.
///
/// At `p = n` the kernel is identically one and `J = M²` is returned without
/// sampling. For `p < n` coincident pairs are excluded.
pub fn riesz_double_integral(
    density: &SampleDensity,
    p: f64,
    method: RieszMethod,
) -> Result<Estimate, KernelError> {
    let n = density.dim;
    check_riesz_exponent(p, n)?;
    let mass = density.total_mass;
    if p == n as f64 {
        return Ok(Estimate { value: mass * mass, std_error: 0.0 });
    }
    let half_exp = 0.5 * (p - n as f64);
    match method {
        RieszMethod::Pairwise => {
            let cloud = cloud_view(density);
            let (positions, weights) = cloud_parts(&cloud);
            let (value, pairs) = symmetric_pair_sum(positions, weights, n, |_, xi, _, xj| {
                let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2 > 0.0).then(|| d2.powf(half_exp))
            });
            if pairs == 0 {
                return Err(KernelError::DegenerateDensity("fewer than two distinct points".into()));
            }
            Ok(Estimate { value, std_error: 0.0 })
        }
        RieszMethod::MonteCarlo { pairs, seed } => {
            if pairs < 2 {
                return Err(KernelError::Domain("Monte-Carlo needs at least two pairs".into()));
            }
            let sampler = PairSampler::new(density)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Welford accumulation of the kernel mean and variance
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for k in 0..pairs {
                let kv = match sampler.draw_pair(&mut rng) {
                    Some((x, y)) => {
                        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                        if d2 > 0.0 {
                            d2.powf(half_exp)
                        } else {
                            0.0
                        }
                    }
                    None => 0.0,
                };
                let delta = kv - mean;
                mean += delta / (k + 1) as f64;
                m2 += delta * (kv - mean);
            }
            let var = m2 / (pairs - 1) as f64;
            Ok(Estimate { value: mass * mass * mean, std_error: mass * mass * (var / pairs as f64).sqrt() })
        }
    }
}

enum PairSampler<'a> {
    Cloud { positions: &'a [f64], dim: usize, index: WeightedIndex<f64> },
    Radial { radii: &'a [f64], f: Vec<f64>, dim: usize, index: WeightedIndex<f64> },
}

impl<'a> PairSampler<'a> {
    fn new(density: &'a SampleDensity) -> Result<Self, KernelError> {
        let dim = density.dim;
        match &density.repr {
            Representation::PointCloud { positions, weights } => {
                let index = WeightedIndex::new(weights.iter().copied())
                    .map_err(|e| KernelError::InvalidDensity(e.to_string()))?;
                Ok(PairSampler::Cloud { positions, dim, index })
            }
            Representation::RadialGrid { radii, values } => {
                let omega = radial_weight(dim);
                let f: Vec<f64> =
                    radii.iter().zip(values).map(|(r, u)| omega * u * r.powi(dim as i32 - 1)).collect();
                let shells = shell_masses(dim, radii, values);
                let index = WeightedIndex::new(shells.iter().copied())
                    .map_err(|e| KernelError::InvalidDensity(e.to_string()))?;
                Ok(PairSampler::Radial { radii, f, dim, index })
            }
        }
    }

    /// Draws an independent pair; `None` when both draws hit the same atom of
    /// a point cloud (the excluded diagonal).
    fn draw_pair<R: Rng>(&self, rng: &mut R) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            PairSampler::Cloud { positions, dim, index } => {
                let i = index.sample(rng);
                let j = index.sample(rng);
                if i == j {
                    return None;
                }
                Some((positions[i * dim..(i + 1) * dim].to_vec(), positions[j * dim..(j + 1) * dim].to_vec()))
            }
            PairSampler::Radial { .. } => Some((self.draw_radial(rng), self.draw_radial(rng))),
        }
    }

    fn draw_radial<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let PairSampler::Radial { radii, f, dim, index } = self else { unreachable!() };
        let i = index.sample(rng);
        let (a, b) = (radii[i], radii[i + 1]);
        let (fa, fb) = (f[i], f[i + 1]);
        let h = b - a;
        let u: f64 = rng.random();
        // inverse CDF of the linear radial mass density on [a, b]
        let slope = (fb - fa) / h;
        let target = u * 0.5 * (fa + fb) * h;
        let t = if slope.abs() * h < 1e-12 * (fa + fb).max(1e-300) {
            target / fa.max(1e-300)
        } else {
            (-fa + (fa * fa + 2.0 * slope * target).max(0.0).sqrt()) / slope
        };
        let r = (a + t.clamp(0.0, h)).clamp(a, b);
        unit_direction(rng, *dim).into_iter().map(|c| c * r).collect()
    }
}

/// Mass, second moment and centroid of a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mass: f64,
    pub second_moment: f64,
    pub centroid: Vec<f64>,
}

pub fn moment_summary(density: &SampleDensity) -> MomentSummary {
    let dim = density.dim;
    match &density.repr {
        Representation::PointCloud { positions, weights } => {
            let mut m2 = CompensatedSum::new();
            let mut first = vec![CompensatedSum::new(); dim];
            for (x, w) in positions.chunks_exact(dim).zip(weights) {
                m2.add(w * norm_sq(x));
                for (acc, c) in first.iter_mut().zip(x) {
                    acc.add(w * c);
                }
            }
            let mass = density.total_mass;
            MomentSummary {
                mass,
                second_moment: m2.value(),
                centroid: first.iter().map(|a| a.value() / mass).collect(),
            }
        }
        Representation::RadialGrid { radii, values } => {
            let omega = radial_weight(dim);
            let f: Vec<f64> =
                radii.iter().zip(values).map(|(r, u)| omega * u * r.powi(dim as i32 + 1)).collect();
            MomentSummary { mass: density.total_mass, second_moment: trapezoid(radii, &f), centroid: vec![0.0; dim] }
        }
    }
}

/// `J·(2m)^{(n−p)/2} − M^{2+(n−p)/2}`, nonnegative up to quadrature error.
/// The standard error propagates the one reported for `J`.
pub fn riesz_moment_slack(density: &SampleDensity, p: f64, method: RieszMethod) -> Result<Estimate, KernelError> {
    let n = density.dim;
    check_riesz_exponent(p, n)?;
    let summary = moment_summary(density);
    let a = 0.5 * (n as f64 - p);
    if summary.second_moment <= 0.0 && a > 0.0 {
        return Err(KernelError::Singular("all mass at the origin: J diverges for p < n".into()));
    }
    let j = riesz_double_integral(density, p, method)?;
    let scale = (2.0 * summary.second_moment).powf(a);
    Ok(Estimate {
        value: j.value * scale - summary.mass.powf(2.0 + a),
        std_error: j.std_error * scale,
    })
}
