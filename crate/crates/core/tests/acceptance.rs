//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Built with `harness = false` so the lines come out in
//! order and uncaptured.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chemolab::harness::{run_scenario, run_suite, ScenarioConfig, SuiteName, VerifyOptions};
use chemolab::model::{critical_mass_blowup, critical_mass_global};
use chemolab::momentflow::{blowup_time_upper, MomentBound};
use chemolab::radialsolver::{run, InitialDensity, Outcome, RadialGrid, RunReport, SolverConfig};

const SEED: u64 = 20_240_601;
const NODES: usize = 2048;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn solver(t_end: f64) -> SolverConfig {
    SolverConfig { chi: 1.0, dt_init: 1e-4, dt_min: 1e-13, t_end, blowup_factor: 1e3, safety: 0.5 }
}

fn bump_run(mass: f64, width: f64) -> (RunReport, Duration) {
    let grid = RadialGrid::new(1.0, NODES).unwrap();
    let initial = InitialDensity::GaussianBump { mass, width };
    timed(|| run(&initial, &grid, 2, &solver(1.0)).unwrap())
}

fn thresholds() -> Verdict {
    let cases = [
        ("blowup(2,1)", critical_mass_blowup(2, 1.0, 2.0).unwrap(), 8.0 * PI),
        ("global(2,1)", critical_mass_global(2, 1.0).unwrap(), 8.0 * PI),
        ("blowup(3,1,3)", critical_mass_blowup(3, 1.0, 3.0).unwrap(), 32.0 * PI),
        ("global(3,1)", critical_mass_global(3, 1.0).unwrap(), 24.0 * PI),
    ];
    let worst = cases.iter().map(|(_, got, want)| rel(*got, *want)).fold(0.0, f64::max);
    let listing: Vec<String> = cases.iter().map(|(name, got, _)| format!("{name}={got:.12}")).collect();
    verdict(worst <= 1e-12, format!("{} worst rel {worst:.1e}", listing.join(" ")))
}

fn suite(name: SuiteName, opts: &VerifyOptions) -> (chemolab::harness::SuiteReport, Duration) {
    timed(|| run_suite(name, SEED, opts).unwrap())
}

fn identity(opts: &VerifyOptions) -> Verdict {
    let (r, dt) = suite(SuiteName::Identity, opts);
    let worst = r.worst.as_ref().map_or(0.0, |w| w.value);
    verdict(
        r.passed && dt.as_secs_f64() < 5.0,
        format!("{} checks, worst rel residual {worst:.2e}, {:.2}s", r.checks, dt.as_secs_f64()),
    )
}

fn monotone(opts: &VerifyOptions) -> Verdict {
    let (r, dt) = suite(SuiteName::Monotone, opts);
    let flags = r.details["monotonicity_flags"].as_array().unwrap();
    let aniso = flags.iter().find(|f| f["profile"] == "anisotropic").unwrap();
    let flagged = aniso["detected_monotone"] == false;
    verdict(
        r.passed && flagged && dt.as_secs_f64() < 5.0,
        format!(
            "{} checks, {} failures, anisotropic flagged non-monotone: {flagged}, {:.2}s",
            r.checks,
            r.failures,
            dt.as_secs_f64()
        ),
    )
}

fn neta(opts: &VerifyOptions) -> Verdict {
    let (r, dt) = suite(SuiteName::Neta, opts);
    let cases = r.details["cases"].as_array().unwrap();
    let min_gap = cases.iter().map(|c| c["min_gap"].as_f64().unwrap()).fold(f64::INFINITY, f64::min);
    let eq = cases
        .iter()
        .flat_map(|c| [c["max_equality_defect_p2"].as_f64().unwrap(), c["max_equality_defect_antipodal_p4"].as_f64().unwrap()])
        .fold(0.0, f64::max);
    verdict(
        r.passed && min_gap >= -1e-12 && eq <= 1e-12 && dt.as_secs_f64() < 5.0,
        format!("{} checks, min gap {min_gap:.2e}, equality defect {eq:.2e}, {:.2}s", r.checks, dt.as_secs_f64()),
    )
}

fn riesz_slack(opts: &VerifyOptions) -> Verdict {
    let (r, dt) = suite(SuiteName::RieszSlack, opts);
    let ball = &r.details["uniform_ball"];
    let j = ball["j"].as_f64().unwrap();
    let slack = ball["slack"].as_f64().unwrap();
    let min_z = r.details["mixtures"]["min_z"].as_f64().unwrap();
    let count = r.details["mixtures"]["count"].as_u64().unwrap();
    let ok = rel(j, 1.2) <= 0.01 && rel(slack, 0.3145) <= 0.02 && min_z >= -3.0 && count == 100;
    verdict(
        ok && r.passed && dt.as_secs_f64() < 60.0,
        format!(
            "J={j:.5} (rel {:.2e}), slack={slack:.5} (rel {:.2e}), {count} mixtures min z {min_z:.2}, {:.2}s",
            rel(j, 1.2),
            rel(slack, 0.3145),
            dt.as_secs_f64()
        ),
    )
}

fn residual(opts: &VerifyOptions) -> Verdict {
    let (r, dt) = suite(SuiteName::SteadyResidual, opts);
    let studies = r.details["residual_studies"].as_array().unwrap();
    let mut parts = Vec::new();
    let mut orders_ok = true;
    for s in studies {
        let n = s["n"].as_u64().unwrap();
        let k = s["k"].as_f64().unwrap();
        if s["at_rounding"] == true {
            parts.push(format!("n={n},k={k}: exact to rounding"));
            continue;
        }
        let orders: Vec<f64> = s["orders"].as_array().unwrap().iter().map(|o| o.as_f64().unwrap()).collect();
        orders_ok &= orders.iter().all(|&o| o >= 1.8);
        parts.push(format!("n={n},k={k}: orders {:.3?}", orders));
    }
    let grad = r.details["grad_v_identity"].as_array().unwrap();
    let grad_err = grad.iter().map(|g| g["max_relative_error"].as_f64().unwrap()).fold(0.0, f64::max);
    verdict(
        r.passed && orders_ok && grad_err <= 1e-12 && dt.as_secs_f64() < 10.0,
        format!("{}; grad_v identity err {grad_err:.1e}, {:.2}s", parts.join("; "), dt.as_secs_f64()),
    )
}

fn dichotomy(sub: &(RunReport, Duration), sup: &(RunReport, Duration)) -> Verdict {
    let (s, s_dt) = sub;
    let u_peak = s.series.iter().map(|x| x.u_max).fold(0.0, f64::max);
    let cmp = s.max_comparison_violation;
    let sub_ok = s.outcome == Outcome::Completed
        && s.t_final == 1.0
        && u_peak <= 10.0 * s.u_max_initial
        && cmp.is_some_and(|c| c <= 1e-3 * s.theta)
        && s_dt.as_secs_f64() < 60.0;
    let (b, b_dt) = sup;
    let sup_ok = b.outcome == Outcome::NumericalBlowup && b.t_detect.is_some_and(|t| t < 1.0) && b_dt.as_secs_f64() < 60.0;
    verdict(
        sub_ok && sup_ok,
        format!(
            "0.5x: {} peak u {:.3} vs initial {:.3}, comparison {:?}, {:.2}s | 2x: {} at t={:?}, u {:.3e} -> {:.3e}, {:.2}s",
            s.outcome.as_str(),
            u_peak,
            s.u_max_initial,
            cmp,
            s_dt.as_secs_f64(),
            b.outcome.as_str(),
            b.t_detect,
            b.u_max_initial,
            b.u_max_final,
            b_dt.as_secs_f64()
        ),
    )
}

fn moment_inequality(sup: &RunReport) -> Verdict {
    let theta = sup.theta;
    let bound = 4.0 * theta - theta * theta / (2.0 * PI);
    let eps = 0.05 * bound.abs() + 0.1;
    let t_stop = sup.t_detect.unwrap_or(f64::INFINITY);
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    let mut decreasing = true;
    for w in sup.series.windows(2) {
        if w[1].t > t_stop {
            break;
        }
        let dt = w[1].t - w[0].t;
        if dt <= 0.0 {
            continue;
        }
        pairs += 1;
        worst = worst.max((w[1].m - w[0].m) / dt - bound);
        decreasing &= w[1].m < w[0].m;
    }
    verdict(
        pairs > 0 && worst <= eps && decreasing && theta > 8.0 * PI,
        format!("{pairs} pairs, max(dm/dt - bound) = {worst:.3} vs eps {eps:.3}, m strictly decreasing: {decreasing}"),
    )
}

fn blowup_time(sup: &RunReport) -> Verdict {
    let bound = MomentBound::new(2, 2.0, 1.0, 16.0 * PI).unwrap();
    let t = blowup_time_upper(&bound, 1.0).unwrap();
    let want = 1.0 / (64.0 * PI);
    let ok = t.is_some_and(|t| rel(t, want) <= 1e-12) && sup.t_detect.is_some();
    verdict(ok, format!("T*={t:?} vs 1/(64pi)={want:?}; simulation detected at {:?}", sup.t_detect))
}

fn scenario_files(json: &str, dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut config = ScenarioConfig::from_json_str(json).unwrap();
    config.output_dir = Some(dir.to_path_buf());
    let result = run_scenario(&config).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = result
        .artifacts
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
        .collect();
    files.sort();
    files
}

fn bump_json(mass: &str, width: f64) -> String {
    format!(
        r#"{{"scenario": "simulate-radial", "seed": {SEED},
            "model": {{"n": 2, "chi": 1.0}}, "domain": {{"length": 1.0, "nodes": {NODES}}},
            "initial": {{"kind": "gaussian-bump", "mass": "{mass}", "width": {width}}},
            "time": {{"dt_init": 1e-4, "dt_min": 1e-13, "t_end": 1.0}}}}"#
    )
}

fn sweep_json(parallelism: usize) -> String {
    format!(
        r#"{{"scenario": "sweep-mass", "seed": {SEED},
            "model": {{"n": 2, "chi": 1.0}}, "domain": {{"length": 1.0, "nodes": 1024}},
            "initial": {{"kind": "gaussian-bump", "width": 0.05}},
            "time": {{"dt_init": 1e-4, "dt_min": 1e-13, "t_end": 0.5}},
            "sweep": {{"mass_grid": ["0.5x", "0.9x", "1.1x", "2.0x"], "parallelism": {parallelism}}}}}"#
    )
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut checked = Vec::new();
    let mut same = true;
    let verify = format!(r#"{{"scenario": "verify-inequalities", "seed": {SEED}}}"#);
    for (label, json) in
        [("sub", bump_json("0.5x", 0.2)), ("sup", bump_json("2x", 0.05)), ("verify", verify)]
    {
        let a = scenario_files(&json, &tmp.path().join(format!("{label}-a")));
        let b = scenario_files(&json, &tmp.path().join(format!("{label}-b")));
        same &= !a.is_empty() && a == b;
        checked.push(format!("{label}: {} files", a.len()));
    }
    let one = scenario_files(&sweep_json(1), &tmp.path().join("sweep-1"));
    let four = scenario_files(&sweep_json(4), &tmp.path().join("sweep-4"));
    let sweep_same = !one.is_empty() && one == four;
    checked.push(format!("sweep 1 vs 4 workers: {} files", one.len()));
    verdict(same && sweep_same, format!("byte-identical: {}", checked.join(", ")))
}

fn main() -> ExitCode {
    let opts = VerifyOptions::default();
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |name: &'static str, v: Verdict| {
        println!("{} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        results.push((name, v));
    };

    report("1 threshold constants", thresholds());
    report("2 identity suite", identity(&opts));
    report("3 monotone-bound suite", monotone(&opts));
    report("4 neta suite", neta(&opts));
    report("5 uniform ball and mixtures", riesz_slack(&opts));
    report("6 supersolution residual", residual(&opts));
    let sub = bump_run(0.5 * 8.0 * PI, 0.2);
    let sup = bump_run(2.0 * 8.0 * PI, 0.05);
    report("7 dichotomy at n=2", dichotomy(&sub, &sup));
    report("8 moment inequality along trajectory", moment_inequality(&sup.0));
    report("9 blow-up time bound", blowup_time(&sup.0));
    report("10 determinism", determinism());

    let failed: Vec<&str> = results.iter().filter(|(_, v)| !v.passed).map(|(n, _)| *n).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
