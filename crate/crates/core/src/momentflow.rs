//! Second-moment differential inequalities and the classifier built on them.
//!
//! Along a solution the second moment `m(t) = ∫u|x|²` obeys `dm/dt <= f(m)`,
//! with `f` depending on the regime:
//!
//! | regime               | f(m)                                                        |
//! |----------------------|-------------------------------------------------------------|
//! | `TwoDVariableChi`    | `4M − χ(0)M²/(2π)`                                          |
//! | `PEqualsN`           | `4M − 2^{2−n}χM²/(n·α_n)`                                   |
//! | `PBelowN`            | `4M − 2^{2−(p+n)/2}χ·M^{2+(n−p)/2}·m^{(p−n)/2}/(n·α_n)`     |
//!
//! A negative `f` forces `m` below zero in finite time, which is impossible
//! for a nonnegative density, so the solution cannot be global.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_radial_monotone, critical_mass_blowup, critical_mass_global, ChiProfile, DimensionConstants,
    ModelError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("invalid bound: {0}")]
    InvalidBound(String),
    #[error("singular evaluation: {0}")]
    Singularity(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    TwoDVariableChi,
    PEqualsN,
    PBelowN,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::TwoDVariableChi => "two-d-variable-chi",
            Regime::PEqualsN => "p-equals-n",
            Regime::PBelowN => "p-below-n",
        }
    }
}

/// Parameters of one moment inequality. For `n = 2`, `chi` is χ(0) of a
/// radially nondecreasing profile and `p` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub n: usize,
    pub p: f64,
    pub chi: f64,
    pub mass: f64,
    pub regime: Regime,
}

impl MomentBound {
    pub fn new(n: usize, p: f64, chi: f64, mass: f64) -> Result<Self, MomentError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(MomentError::InvalidBound(format!("mass must be > 0, got {mass}")));
        }
        if !(chi.is_finite() && chi > 0.0) {
            return Err(MomentError::InvalidBound(format!("chi must be > 0, got {chi}")));
        }
        let regime = match n {
            0 | 1 => return Err(MomentError::InvalidBound(format!("dimension must be >= 2, got {n}"))),
            2 => Regime::TwoDVariableChi,
            _ if p == n as f64 => Regime::PEqualsN,
            _ if (2.0..(n as f64)).contains(&p) => Regime::PBelowN,
            _ => {
                return Err(MomentError::InvalidBound(format!("need 2 <= p <= n = {n}, got p = {p}")))
            }
        };
        Ok(Self { n, p, chi, mass, regime })
    }

    fn alpha(&self) -> f64 {
        DimensionConstants::new(self.n).expect("n >= 2 checked on construction").alpha_n
    }

    /// Coefficient `A` of `f(m) = 4M − A·m^{(p−n)/2}` in the `PBelowN` regime.
    fn singular_coefficient(&self) -> f64 {
        let n = self.n as f64;
        let a = 0.5 * (n - self.p);
        2f64.powf(2.0 - 0.5 * (self.p + n)) * self.chi * self.mass.powf(2.0 + a) / (n * self.alpha())
    }

    /// `f(m)`, the right-hand side of `dm/dt <= f(m)`.
    pub fn rhs(&self, m: f64) -> Result<f64, MomentError> {
        let mass = self.mass;
        match self.regime {
            Regime::TwoDVariableChi => Ok(4.0 * mass - self.chi * mass * mass / (2.0 * PI)),
            Regime::PEqualsN => {
                let n = self.n as f64;
                Ok(4.0 * mass - 2f64.powf(2.0 - n) * self.chi * mass * mass / (n * self.alpha()))
            }
            Regime::PBelowN => {
                if !(m > 0.0) {
                    return Err(MomentError::Singularity(format!(
                        "f(m) needs m > 0 when p < n, got m = {m}"
                    )));
                }
                let e = 0.5 * (self.p - self.n as f64);
                Ok(4.0 * mass - self.singular_coefficient() * m.powf(e))
            }
        }
    }
}

/// Free-function form of [`MomentBound::rhs`].
pub fn bound_rhs(bound: &MomentBound, m: f64) -> Result<f64, MomentError> {
    bound.rhs(m)
}

/// Initial second moment below which blow-up is certified when `2 <= p < n`:
/// `(χ/(2^{(p+n)/2}·n·α_n))^{2/(n−p)} · M^{(n−p+2)/(n−p)}`.
pub fn cb_threshold(n: usize, p: f64, chi: f64, mass: f64) -> Result<f64, MomentError> {
    if n < 3 {
        return Err(MomentError::Regime(format!("moment threshold needs n >= 3, got {n}")));
    }
    let nf = n as f64;
    if p >= nf {
        return Err(MomentError::Regime(format!(
            "p = {p} >= n = {n}: use the critical mass instead"
        )));
    }
    if !(p >= 2.0) {
        return Err(MomentError::InvalidBound(format!("need p >= 2, got {p}")));
    }
    if !(chi > 0.0 && mass > 0.0) {
        return Err(MomentError::InvalidBound("chi and mass must be > 0".into()));
    }
    let alpha = DimensionConstants::new(n)?.alpha_n;
    let c = (chi / (2f64.powf(0.5 * (p + nf)) * nf * alpha)).powf(2.0 / (nf - p));
    Ok(c * mass.powf((nf - p + 2.0) / (nf - p)))
}

/// Number of fixed RK4 steps per linear-decay time `m0/|f(m0)|`.
pub const HIT_TIME_STEPS: f64 = 1e4;

/// Upper bound on the time at which `m` would reach zero, if `f(m0) < 0`.
///
/// In the m-independent regimes this is `m0/|f|`. When `p < n` the ODE
/// `dm/dt = f(m)` is integrated with fixed-step RK4 in the variable
/// `w = m^{1+a}`, `a = (n−p)/2`, in which the right-hand side
/// `(1+a)(4M·w^{a/(1+a)} − A)` stays bounded through `m = 0`; the final step
/// is located by bisection.
pub fn blowup_time_upper(bound: &MomentBound, m0: f64) -> Result<Option<f64>, MomentError> {
    if !(m0.is_finite() && m0 > 0.0) {
        return Err(MomentError::InvalidBound(format!("m0 must be > 0, got {m0}")));
    }
    let f0 = bound.rhs(m0)?;
    if f0 >= 0.0 {
        return Ok(None);
    }
    if bound.regime != Regime::PBelowN {
        return Ok(Some(m0 / f0.abs()));
    }

    let a = 0.5 * (bound.n as f64 - bound.p);
    let big_a = bound.singular_coefficient();
    let four_m = 4.0 * bound.mass;
    let b = a / (1.0 + a);
    let rate = |w: f64| (1.0 + a) * (four_m * w.max(0.0).powf(b) - big_a);
    let rk4 = |w: f64, h: f64| {
        let k1 = rate(w);
        let k2 = rate(w + 0.5 * h * k1);
        let k3 = rate(w + 0.5 * h * k2);
        let k4 = rate(w + h * k3);
        w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };

    let linear = m0 / f0.abs();
    let h = linear / HIT_TIME_STEPS;
    let mut w = m0.powf(1.0 + a);
    let mut t = 0.0;
    // |f| grows as m decreases, so the hit happens within the linear bound
    let max_steps = (HIT_TIME_STEPS as usize) + 2;
    for _ in 0..max_steps {
        let next = rk4(w, h);
        if next > 0.0 {
            w = next;
            t += h;
            continue;
        }
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > 1e-15 * (t + h) {
            let mid = 0.5 * (lo + hi);
            if rk4(w, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(Some((t + 0.5 * (lo + hi)).min(linear)));
    }
    Ok(Some(linear))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    BlowupCertified,
    GlobalCertified,
    Indeterminate,
}

impl Certificate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Certificate::BlowupCertified => "blowup-certified",
            Certificate::GlobalCertified => "global-certified",
            Certificate::Indeterminate => "indeterminate",
        }
    }
}

/// Inputs to [`classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyRequest {
    pub n: usize,
    pub profile: ChiProfile,
    pub mass: f64,
    /// Initial second moment, required for the `p < n` certificate.
    pub m0: Option<f64>,
    /// Radial data on a ball, the setting of the global-existence result.
    pub radial_ball: bool,
    pub monotone_samples: usize,
    pub seed: u64,
}

impl ClassifyRequest {
    pub fn new(n: usize, profile: ChiProfile, mass: f64) -> Self {
        Self { n, profile, mass, m0: None, radial_ball: true, monotone_samples: 10_000, seed: 0 }
    }
}

/// Flat classification record; serializes to a single-level JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    pub certificate: Certificate,
    pub n: usize,
    pub p: Option<f64>,
    pub chi: Option<f64>,
    pub mass: f64,
    pub m0: Option<f64>,
    pub blowup_mass_threshold: Option<f64>,
    pub global_mass_threshold: Option<f64>,
    pub moment_threshold: Option<f64>,
    /// `M − blow-up threshold`; positive means certified.
    pub blowup_margin: Option<f64>,
    /// `global threshold − M`; positive means certified.
    pub global_margin: Option<f64>,
    /// `moment threshold − m0`; positive means certified.
    pub moment_margin: Option<f64>,
    pub hypothesis_monotone_chi: Option<bool>,
    pub hypothesis_chi_origin_positive: Option<bool>,
    pub hypothesis_power_weight: bool,
    pub hypothesis_radial_ball: bool,
    pub reason: String,
}

/// Decision tree over the blow-up and global-existence certificates.
pub fn classify(req: &ClassifyRequest) -> Result<Classification, MomentError> {
    if !(req.mass.is_finite() && req.mass > 0.0) {
        return Err(MomentError::InvalidBound(format!("mass must be > 0, got {}", req.mass)));
    }
    if let Some(m0) = req.m0 {
        if !(m0.is_finite() && m0 >= 0.0) {
            return Err(MomentError::InvalidBound(format!("m0 must be >= 0, got {m0}")));
        }
    }
    req.profile.validate()?;
    let n = req.n;
    if n < 2 {
        return Err(MomentError::InvalidBound(format!("dimension must be >= 2, got {n}")));
    }
    let power = req.profile.power_form();
    let nf = n as f64;

    let mut rec = Classification {
        regime: Regime::TwoDVariableChi,
        certificate: Certificate::Indeterminate,
        n,
        p: power.map(|(_, p)| p),
        chi: power.map(|(c, _)| c),
        mass: req.mass,
        m0: req.m0,
        blowup_mass_threshold: None,
        global_mass_threshold: None,
        moment_threshold: None,
        blowup_margin: None,
        global_margin: None,
        moment_margin: None,
        hypothesis_monotone_chi: None,
        hypothesis_chi_origin_positive: None,
        hypothesis_power_weight: power.is_some_and(|(_, p)| p == nf),
        hypothesis_radial_ball: req.radial_ball,
        reason: String::new(),
    };
    let mut reasons: Vec<String> = Vec::new();

    if n == 2 {
        let chi0 = req.profile.at_origin(2)?;
        let monotone = req.profile.declared_monotone()
            && check_radial_monotone(&req.profile, req.monotone_samples.max(2), req.seed)?.holds;
        rec.hypothesis_monotone_chi = Some(monotone);
        rec.hypothesis_chi_origin_positive = Some(chi0 > 0.0);
        if rec.chi.is_none() {
            rec.chi = Some(chi0);
        }
        if !monotone {
            reasons.push("chi is not radially nondecreasing: blow-up hypothesis unmet".into());
        } else if chi0 <= 0.0 {
            reasons.push("chi(0) = 0: blow-up hypothesis unmet".into());
        } else {
            let thr = critical_mass_blowup(2, chi0, 2.0)?;
            rec.blowup_mass_threshold = Some(thr);
            rec.blowup_margin = Some(req.mass - thr);
        }
    } else {
        match power {
            None => reasons.push("chi is not of the form chi*|x|^(p-2): no certificate applies".into()),
            Some((_, p)) if p > nf => reasons.push(format!("p = {p} exceeds n = {n}: no certificate applies")),
            Some((chi, p)) if p == nf => {
                rec.regime = Regime::PEqualsN;
                let thr = critical_mass_blowup(n, chi, p)?;
                rec.blowup_mass_threshold = Some(thr);
                rec.blowup_margin = Some(req.mass - thr);
            }
            Some((chi, p)) => {
                rec.regime = Regime::PBelowN;
                let thr = cb_threshold(n, p, chi, req.mass)?;
                rec.moment_threshold = Some(thr);
                match req.m0 {
                    Some(m0) => rec.moment_margin = Some(thr - m0),
                    None => reasons.push("m0 not supplied: moment certificate not evaluated".into()),
                }
            }
        }
    }

    if rec.hypothesis_power_weight {
        let chi = rec.chi.expect("power form carries a strength");
        let thr = critical_mass_global(n, chi)?;
        rec.global_mass_threshold = Some(thr);
        rec.global_margin = Some(thr - req.mass);
        if !req.radial_ball {
            reasons.push("not a radial ball setting: global certificate not applicable".into());
        }
    } else {
        reasons.push("chi is not chi*|x|^(n-2): global certificate not applicable".into());
    }

    let blowup = rec.blowup_margin.is_some_and(|m| m > 0.0) || rec.moment_margin.is_some_and(|m| m > 0.0);
    let global = req.radial_ball && rec.global_margin.is_some_and(|m| m > 0.0);
    rec.certificate = if blowup {
        Certificate::BlowupCertified
    } else if global {
        Certificate::GlobalCertified
    } else {
        Certificate::Indeterminate
    };
    rec.reason = match rec.certificate {
        Certificate::BlowupCertified if rec.moment_margin.is_some_and(|m| m > 0.0) => {
            "initial second moment below the moment threshold".into()
        }
        Certificate::BlowupCertified => "mass above the blow-up threshold".into(),
        Certificate::GlobalCertified => "mass below the global-existence threshold".into(),
        Certificate::Indeterminate if reasons.is_empty() => "between thresholds".into(),
        Certificate::Indeterminate => reasons.join("; "),
    };
    Ok(rec)
}
