//! Adaptive time integration, sampling and blow-up detection.

use std::io::{self, Write};

use serde::Serialize;

use super::diagnostics::{grad_v_max, recover_density, second_moment_of};
use super::initial::{initial_state, InitialDensity};
use super::scheme::RadialOperator;
use super::supersolution::{choose_k, choose_k_dominating, comparison_violation};
use super::{MassProfile, RadialGrid, SolverConfig, SolverError};
use crate::model::{critical_mass_blowup, critical_mass_global};

/// Uniformly spaced samples on `(0, t_end]`, plus the initial one.
pub const SERIES_SAMPLES: usize = 200;
/// Extra sample whenever `u_max` grows by this factor since the last one.
pub const EVENT_SAMPLE_GROWTH: f64 = 1.25;
/// Reject and halve when `u_max` grows by more than this factor in one step.
const STEP_GROWTH_LIMIT: f64 = 1.1;
/// Accepted steps without a cut before `dt` may double.
const QUIET_STEPS: usize = 50;
/// Samples over which the doubling time must shrink for the secondary signal.
const DOUBLING_WINDOW: usize = 10;
/// Safety factor applied to the barrier parameter.
const K_SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    NumericalBlowup,
    Infeasible,
    StepCollapse,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::NumericalBlowup => "numerical-blowup",
            Self::Infeasible => "infeasible",
            Self::StepCollapse => "step-collapse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorSignal {
    /// `u_max ≥ blowup_factor·u_max(0)`.
    SupNorm,
    /// `dt` hit `dt_min` while the `u_max` doubling time kept shrinking.
    StepCollapse,
}

/// Detector output. A fired detector only ever means grid-limited blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetectorVerdict {
    pub verdict: &'static str,
    pub signal: Option<DetectorSignal>,
}

impl DetectorVerdict {
    const NONE: Self = Self { verdict: "no-blowup", signal: None };

    fn fired(signal: DetectorSignal) -> Self {
        Self { verdict: "numerical-blowup", signal: Some(signal) }
    }

    pub fn is_blowup(&self) -> bool {
        self.signal.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub theta: f64,
    pub m: f64,
    pub u_max: f64,
    pub grad_v_max: f64,
    pub comparison_violation: Option<f64>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Mass above which blow-up is guaranteed.
    pub blowup_mass: f64,
    /// Mass below which global existence is guaranteed.
    pub global_mass: f64,
}

impl Thresholds {
    pub fn new(n: usize, chi: f64) -> Result<Self, SolverError> {
        Ok(Self {
            blowup_mass: critical_mass_blowup(n, chi, n as f64)?,
            global_mass: critical_mass_global(n, chi)?,
        })
    }
}

/// How the barrier parameter was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRoute {
    /// From `θ` and `‖u₀‖_∞` alone.
    SupNorm,
    /// From the sampled initial profile.
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersolutionInfo {
    pub k: f64,
    pub route: KRoute,
    /// `2n·k·L/χ`.
    pub grad_v_bound: f64,
    /// Reason the sup-norm route was not used, if any.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub outcome: Outcome,
    pub detector: DetectorVerdict,
    pub message: Option<String>,
    pub n: usize,
    pub grid: RadialGrid,
    pub config: SolverConfig,
    pub initial: InitialDensity,
    pub theta: f64,
    pub thresholds: Thresholds,
    pub supersolution: Option<SupersolutionInfo>,
    pub u_max_initial: f64,
    pub u_max_final: f64,
    pub t_final: f64,
    pub t_detect: Option<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub max_monotonicity_violation: f64,
    pub max_density_clamp: f64,
    pub max_comparison_violation: Option<f64>,
    pub series: Vec<Sample>,
    #[serde(skip)]
    pub final_profile: Option<MassProfile>,
}

/// Applies both detector signals to a sampled series.
pub fn detect_blowup(series: &[Sample], config: &SolverConfig) -> DetectorVerdict {
    let Some(first) = series.first() else {
        return DetectorVerdict::NONE;
    };
    let u0 = first.u_max;
    if u0 > 0.0 && series.iter().any(|s| s.u_max >= config.blowup_factor * u0) {
        return DetectorVerdict::fired(DetectorSignal::SupNorm);
    }
    let last = series[series.len() - 1];
    if last.dt <= config.dt_min && doubling_time_shrinks(series) {
        return DetectorVerdict::fired(DetectorSignal::StepCollapse);
    }
    DetectorVerdict::NONE
}

fn doubling_time_shrinks(series: &[Sample]) -> bool {
    if series.len() < DOUBLING_WINDOW {
        return false;
    }
    let tail = &series[series.len() - DOUBLING_WINDOW..];
    let mut times = Vec::with_capacity(DOUBLING_WINDOW - 1);
    for w in tail.windows(2) {
        let growth = w[1].u_max / w[0].u_max;
        if !(growth > 1.0) || !(w[1].t > w[0].t) {
            return false;
        }
        times.push((w[1].t - w[0].t) * std::f64::consts::LN_2 / growth.ln());
    }
    times.windows(2).all(|w| w[1] < w[0])
}

struct Tracker {
    k: Option<f64>,
    chi: f64,
    series: Vec<Sample>,
    max_violation: Option<f64>,
}

impl Tracker {
    fn record(&mut self, p: &MassProfile, u_max: f64, dt: f64) {
        let cv = self.k.map(|k| comparison_violation(p, k, self.chi));
        if let Some(v) = cv {
            self.max_violation = Some(self.max_violation.map_or(v, |m| m.max(v)));
        }
        let s = Sample {
            t: p.time,
            theta: p.theta,
            m: second_moment_of(p),
            u_max,
            grad_v_max: grad_v_max(p),
            comparison_violation: cv,
            dt,
        };
        match self.series.last_mut() {
            Some(prev) if prev.t == s.t => *prev = s,
            _ => self.series.push(s),
        }
    }
}

/// Integrates from the initial density until `t_end` or a detector fires.
///
/// Invalid arguments are errors; an unresolvable setup comes back as an
/// `infeasible` report.
pub fn run(
    initial: &InitialDensity,
    grid: &RadialGrid,
    n: usize,
    config: &SolverConfig,
) -> Result<RunReport, SolverError> {
    config.validate()?;
    let thresholds = Thresholds::new(n, config.chi)?;
    let state = initial_state(initial, grid, n)?;
    let theta = state.profile.theta;

    let mut report = RunReport {
        outcome: Outcome::Completed,
        detector: DetectorVerdict::NONE,
        message: None,
        n,
        grid: *grid,
        config: *config,
        initial: initial.clone(),
        theta,
        thresholds,
        supersolution: None,
        u_max_initial: 0.0,
        u_max_final: 0.0,
        t_final: 0.0,
        t_detect: None,
        steps_accepted: 0,
        steps_rejected: 0,
        max_monotonicity_violation: 0.0,
        max_density_clamp: 0.0,
        max_comparison_violation: None,
        series: Vec::new(),
        final_profile: None,
    };

    if let Err(SolverError::Infeasible(msg)) = initial.check_resolution(grid) {
        report.outcome = Outcome::Infeasible;
        report.message = Some(msg);
        return Ok(report);
    }

    report.supersolution = barrier(&state.profile, state.u0_sup(), config.chi);
    let op = RadialOperator::new(*grid, n, config.chi)?;
    let mut profile = state.profile;
    let u_initial = recover_density(&profile).max();
    report.u_max_initial = u_initial;

    let mut tracker = Tracker {
        k: report.supersolution.as_ref().map(|s| s.k),
        chi: config.chi,
        series: Vec::with_capacity(SERIES_SAMPLES + 64),
        max_violation: None,
    };
    tracker.record(&profile, u_initial, 0.0);

    let sample_dt = config.t_end / SERIES_SAMPLES as f64;
    let mut next_sample = 1usize;
    let mut dt = config.dt_init;
    let mut quiet = 0usize;
    let mut u_prev = u_initial;
    let mut u_last_sample = u_initial;

    loop {
        if next_sample > SERIES_SAMPLES {
            report.outcome = Outcome::Completed;
            break;
        }
        let target = if next_sample == SERIES_SAMPLES { config.t_end } else { next_sample as f64 * sample_dt };

        let limit = op.cfl_limit(&profile.values, config.safety);
        while dt > limit {
            dt *= 0.5;
            quiet = 0;
        }
        if dt < config.dt_min {
            tracker.record(&profile, u_prev, dt);
            report.outcome = Outcome::StepCollapse;
            break;
        }

        let remaining = target - profile.time;
        let clipped = dt >= remaining;
        let h = if clipped { remaining } else { dt };
        let (mut next, diag) = op.advance(&profile, h)?;

        if u_prev > 0.0 && diag.u_max > STEP_GROWTH_LIMIT * u_prev {
            report.steps_rejected += 1;
            dt = 0.5 * h;
            quiet = 0;
            continue;
        }

        if clipped {
            next.time = target;
        }
        profile = next;
        report.steps_accepted += 1;
        report.max_monotonicity_violation = report.max_monotonicity_violation.max(diag.monotonicity_violation);
        report.max_density_clamp = report.max_density_clamp.max(diag.density_clamp);
        u_prev = diag.u_max;
        quiet += 1;
        if quiet >= QUIET_STEPS && dt < config.dt_init {
            dt = (2.0 * dt).min(config.dt_init);
            quiet = 0;
        }

        let blown = u_initial > 0.0 && diag.u_max >= config.blowup_factor * u_initial;
        if clipped || blown || diag.u_max >= EVENT_SAMPLE_GROWTH * u_last_sample {
            tracker.record(&profile, diag.u_max, h);
            u_last_sample = diag.u_max;
            if clipped {
                next_sample += 1;
            }
        }
        if blown {
            report.outcome = Outcome::NumericalBlowup;
            break;
        }
    }

    report.detector = detect_blowup(&tracker.series, config);
    if report.outcome == Outcome::StepCollapse && report.detector.is_blowup() {
        report.outcome = Outcome::NumericalBlowup;
    }
    if report.outcome == Outcome::NumericalBlowup {
        report.t_detect = Some(profile.time);
    }
    report.u_max_final = tracker.series.last().map_or(0.0, |s| s.u_max);
    report.t_final = profile.time;
    report.max_comparison_violation = tracker.max_violation;
    report.series = tracker.series;
    report.final_profile = Some(profile);
    Ok(report)
}

fn barrier(profile: &MassProfile, u0_sup: f64, chi: f64) -> Option<SupersolutionInfo> {
    let n = profile.n;
    let length = profile.grid.length;
    let bound = |k: f64| 2.0 * n as f64 * k * length / chi;
    match choose_k(profile.theta, u0_sup, length, n, chi, K_SAFETY) {
        Ok(k) => Some(SupersolutionInfo { k, route: KRoute::SupNorm, grad_v_bound: bound(k), note: None }),
        Err(SolverError::Infeasible(why)) => choose_k_dominating(profile, chi, K_SAFETY).ok().map(|k| {
            SupersolutionInfo { k, route: KRoute::Profile, grad_v_bound: bound(k), note: Some(why) }
        }),
        Err(_) => None,
    }
}

/// Writes the series as CSV with round-trip float formatting. A missing
/// comparison violation is written as `NaN`.
pub fn write_series_csv<W: Write>(series: &[Sample], mut out: W) -> io::Result<()> {
    writeln!(out, "t,theta,m,u_max,grad_v_max,comparison_violation,dt")?;
    for s in series {
        writeln!(
            out,
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            s.t,
            s.theta,
            s.m,
            s.u_max,
            s.grad_v_max,
            s.comparison_violation.unwrap_or(f64::NAN),
            s.dt
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn config(t_end: f64) -> SolverConfig {
        SolverConfig { chi: 1.0, dt_init: 1e-3, dt_min: 1e-12, t_end, blowup_factor: 1e3, safety: 0.5 }
    }

    fn flat(u: f64, count: usize) -> Vec<Sample> {
        (0..count)
            .map(|i| Sample {
                t: i as f64,
                theta: 1.0,
                m: 0.0,
                u_max: u,
                grad_v_max: 0.0,
                comparison_violation: None,
                dt: 1e-3,
            })
            .collect()
    }

    #[test]
    fn detector_cases() {
        let cfg = config(1.0);
        assert!(!detect_blowup(&flat(1.0, 20), &cfg).is_blowup());
        let mut s = flat(1.0, 3);
        s[2].u_max = 1e6;
        assert_eq!(detect_blowup(&s, &cfg).signal, Some(DetectorSignal::SupNorm));

        // Accelerating growth ending with a collapsed step.
        let mut t = 0.0;
        let mut u = 1.0;
        let mut acc = Vec::new();
        for j in 0..12 {
            acc.push(Sample { t, u_max: u, ..flat(1.0, 1)[0] });
            t += 1.0 / (j + 1) as f64;
            u *= 1.5;
        }
        acc.last_mut().unwrap().dt = 1e-13;
        assert_eq!(detect_blowup(&acc, &cfg).signal, Some(DetectorSignal::StepCollapse));
        acc.last_mut().unwrap().dt = 1e-3;
        assert!(!detect_blowup(&acc, &cfg).is_blowup());
    }

    #[test]
    fn zero_data_completes_flat() {
        let grid = RadialGrid::new(1.0, 63).unwrap();
        let r = run(&InitialDensity::Uniform { mass: 0.0 }, &grid, 2, &config(0.1)).unwrap();
        assert_eq!(r.outcome, Outcome::Completed);
        assert!(r.series.len() > SERIES_SAMPLES);
        assert!(r.series.iter().all(|s| s.u_max == 0.0 && s.m == 0.0));
        assert_eq!(r.series.last().unwrap().t, 0.1);
    }

    #[test]
    fn thin_bump_is_infeasible() {
        let grid = RadialGrid::new(1.0, 63).unwrap();
        let spec = InitialDensity::GaussianBump { mass: 1.0, width: 0.05 };
        let r = run(&spec, &grid, 2, &config(0.1)).unwrap();
        assert_eq!(r.outcome, Outcome::Infeasible);
        assert!(r.message.is_some());
    }

    #[test]
    fn subcritical_completes_and_timestamps_increase() {
        let grid = RadialGrid::new(1.0, 255).unwrap();
        let spec = InitialDensity::GaussianBump { mass: 4.0 * PI, width: 0.2 };
        let r = run(&spec, &grid, 2, &config(0.2)).unwrap();
        assert_eq!(r.outcome, Outcome::Completed);
        assert!(r.series.windows(2).all(|w| w[1].t > w[0].t));
        assert!(r.series.iter().all(|s| s.theta == 4.0 * PI));
        let k = r.supersolution.as_ref().unwrap();
        assert_eq!(k.route, KRoute::Profile);
        assert!(r.max_comparison_violation.unwrap() <= 1e-3 * r.theta);
    }

    #[test]
    fn supercritical_blows_up() {
        let grid = RadialGrid::new(1.0, 1023).unwrap();
        let spec = InitialDensity::GaussianBump { mass: 16.0 * PI, width: 0.05 };
        let r = run(&spec, &grid, 2, &config(0.1)).unwrap();
        assert_eq!(r.outcome, Outcome::NumericalBlowup, "{:?}", r.u_max_final / r.u_max_initial);
        assert!(r.u_max_final >= 1e3 * r.u_max_initial);
        assert!(r.supersolution.is_none());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_series_csv(&flat(0.5, 2), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,theta,m,u_max,grad_v_max,comparison_violation,dt");
        assert_eq!(lines[1], "0.0,1.0,0.0,0.5,0.0,NaN,0.001");
        assert!(!text.contains('\r'));
    }
}
