//! Random point generation used by the sampling-based checks.

use rand::Rng;
use rand_distr::StandardNormal;

/// Uniformly distributed direction on the unit sphere in `dim` dimensions.
pub(crate) fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Point uniformly distributed (by volume) in the shell `r_min <= |x| <= r_max`.
pub(crate) fn uniform_in_shell<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    r_min: f64,
    r_max: f64,
) -> Vec<f64> {
    let d = dim as f64;
    let lo = r_min.powf(d);
    let hi = r_max.powf(d);
    let u: f64 = rng.random();
    let r = (lo + u * (hi - lo)).powf(1.0 / d).clamp(r_min, r_max);
    unit_direction(rng, dim).into_iter().map(|x| x * r).collect()
}
