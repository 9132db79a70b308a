//! Scenario runner behind the command-line front end.
//!
//! A scenario document is parsed and fully validated before any work
//! starts; each scenario then writes its artifacts into one output
//! directory. Exit statuses: 0 on success (a detected blow-up counts as
//! success), 2 for configuration errors, 3 when the run cannot be carried
//! out.

pub mod config;
pub mod sweep;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

pub use config::{
    relevant_threshold, ConfigError, MassSpec, Overrides, Scenario, ScenarioConfig, SuiteName, SweepSpec,
    VerifyOptions,
};
pub use sweep::{sweep_mass, SweepRow, SweepSummary};
pub use verify::{run_suite, run_suites, SuiteReport, VerifyReport};

use crate::momentflow::{classify, Classification, ClassifyRequest, MomentError};
use crate::radialsolver::{init_mass_profile, run, second_moment_of, write_series_csv, InitialDensity, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// Environment variable that may set the output directory.
pub const OUT_DIR_ENV: &str = "CHEMOLAB_OUT";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error at `{}`: {}", .0.key, .0.message)]
    Config(#[from] ConfigError),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("{0}")]
    Runtime(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            _ => EXIT_INFEASIBLE,
        }
    }
}

/// What a scenario produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub exit_code: i32,
    pub message: String,
    pub artifacts: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        fs::write(&path, data).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), HarnessError> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|source| HarnessError::Io { path: self.dir.join(name), source })?;
        self.bytes(name, &buf)
    }
}

/// Output directory by priority: explicit flag, then environment, then the
/// config file, then [`DEFAULT_OUT_DIR`].
pub fn resolve_output_dir(flag: Option<PathBuf>, config: Option<&Path>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn moment_error(e: MomentError) -> HarnessError {
    match e {
        MomentError::InvalidBound(m) | MomentError::Regime(m) => HarnessError::Config(ConfigError::new("model", m)),
        other => HarnessError::Runtime(other.to_string()),
    }
}

/// Classification for `mass`, with `m0` taken from the config or computed
/// from the initial density on the configured grid. `None` for zero mass.
pub(crate) fn classify_with_initial(
    config: &ScenarioConfig,
    mass: f64,
    initial: Option<&InitialDensity>,
) -> Result<Option<Classification>, HarnessError> {
    if !(mass > 0.0) {
        return Ok(None);
    }
    let m0 = match (config.classify.m0, initial) {
        (Some(m0), _) => Some(m0),
        (None, Some(d)) => {
            let profile = init_mass_profile(&d.with_mass(mass), &config.grid, config.n)
                .map_err(|e| HarnessError::Config(ConfigError::new("initial", e.to_string())))?;
            Some(second_moment_of(&profile).max(0.0))
        }
        (None, None) => None,
    };
    let req = ClassifyRequest {
        n: config.n,
        profile: config.chi.clone(),
        mass,
        m0,
        radial_ball: config.classify.radial_ball,
        monotone_samples: config.classify.monotone_samples,
        seed: config.seed,
    };
    classify(&req).map(Some).map_err(moment_error)
}

fn out_dir(config: &ScenarioConfig) -> PathBuf {
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs a validated scenario and writes its artifacts.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult, HarnessError> {
    let mut w = Writer::new(&out_dir(config))?;
    let (exit_code, message) = match config.scenario {
        Scenario::SimulateRadial => simulate(config, &mut w)?,
        Scenario::Classify => classify_scenario(config, &mut w)?,
        Scenario::VerifyInequalities => verify_scenario(config, &mut w)?,
        Scenario::SweepMass => sweep_scenario(config, &mut w)?,
    };
    Ok(ScenarioResult { exit_code, message, artifacts: w.written })
}

fn simulate(config: &ScenarioConfig, w: &mut Writer) -> Result<(i32, String), HarnessError> {
    let initial = config.initial.as_ref().expect("validated");
    let solver = config.solver.as_ref().expect("validated");
    let report = run(initial, &config.grid, config.n, solver).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let classification = classify_with_initial(config, report.theta, Some(initial))?;
    w.csv("series_run.csv", |b| write_series_csv(&report.series, b))?;
    w.json(
        "summary_run.json",
        &json!({
            "scenario": config.scenario.as_str(),
            "seed": config.seed,
            "mass_input": config.mass_input,
            "report": report,
            "classification": classification,
            "config": config,
        }),
    )?;
    let code = match report.outcome {
        Outcome::Completed | Outcome::NumericalBlowup => EXIT_OK,
        Outcome::Infeasible | Outcome::StepCollapse => EXIT_INFEASIBLE,
    };
    let msg = match &report.message {
        Some(m) => format!("{}: {m}", report.outcome.as_str()),
        None => format!(
            "{} at t = {:?} (u_max {:?} -> {:?})",
            report.outcome.as_str(),
            report.t_final,
            report.u_max_initial,
            report.u_max_final
        ),
    };
    Ok((code, msg))
}

fn classify_scenario(config: &ScenarioConfig, w: &mut Writer) -> Result<(i32, String), HarnessError> {
    let mass = config.classify.mass.expect("validated");
    let c = classify_with_initial(config, mass, config.initial.as_ref())?.expect("validated: mass > 0");
    let msg = format!("{}: {}", c.certificate.as_str(), c.reason);
    w.json(
        "summary_classify.json",
        &json!({
            "scenario": config.scenario.as_str(),
            "seed": config.seed,
            "mass_input": config.classify.mass_input,
            "classification": c,
            "config": config,
        }),
    )?;
    Ok((EXIT_OK, msg))
}

fn verify_scenario(config: &ScenarioConfig, w: &mut Writer) -> Result<(i32, String), HarnessError> {
    let report = run_suites(config.seed, &config.verify).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    w.json("verify.json", &report)?;
    let lines: Vec<String> =
        report.suites.iter().map(|s| format!("{} {}", s.suite, if s.passed { "pass" } else { "FAIL" })).collect();
    Ok((EXIT_OK, lines.join(", ")))
}

fn sweep_scenario(config: &ScenarioConfig, w: &mut Writer) -> Result<(i32, String), HarnessError> {
    let cells = sweep_mass(config)?;
    for cell in &cells {
        if let Some(report) = &cell.report {
            let idx = cell.row.index;
            w.csv(&format!("series_cell{idx:03}.csv"), |b| write_series_csv(&report.series, b))?;
            w.json(
                &format!("summary_cell{idx:03}.json"),
                &json!({ "row": cell.row, "report": report, "classification": cell.classification }),
            )?;
        }
    }
    let summary = sweep::summarize(config, &cells);
    w.csv("sweep.csv", |b| sweep::write_sweep_csv(&summary.rows, b))?;
    w.json("summary_sweep.json", &summary)?;
    let all_infeasible = cells.iter().all(|c| c.row.outcome == Outcome::Infeasible.as_str());
    let code = if all_infeasible { EXIT_INFEASIBLE } else { EXIT_OK };
    let msg = format!(
        "{} cells; largest completed mass {:?}, smallest blow-up mass {:?}",
        cells.len(),
        summary.largest_completed_mass,
        summary.smallest_blowup_mass
    );
    Ok((code, msg))
}
