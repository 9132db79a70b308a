//! Mass sweeps across the critical threshold.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{is_moment_regime, MassSpec, ScenarioConfig, SweepSpec};
use super::{classify_with_initial, HarnessError};
use crate::momentflow::Classification;
use crate::radialsolver::{run, Outcome, RunReport};

/// Outcome label for rows that are classified but not simulated.
pub const CLASSIFIED_ONLY: &str = "classified";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub mass: f64,
    pub mass_input: MassSpec,
    pub mass_over_threshold: Option<f64>,
    pub outcome: String,
    pub t_detect: Option<f64>,
    pub u_max_final: Option<f64>,
    pub classification: String,
}

/// Per-cell result; `report` is present for simulated cells.
#[derive(Debug, Clone)]
pub struct Cell {
    pub row: SweepRow,
    pub report: Option<RunReport>,
    pub classification: Option<Classification>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub scenario: &'static str,
    pub seed: u64,
    pub threshold: Option<f64>,
    pub rows: Vec<SweepRow>,
    pub largest_completed_mass: Option<f64>,
    pub smallest_blowup_mass: Option<f64>,
    /// Every completed mass lies below every blown-up mass.
    pub dichotomy_sharp: Option<bool>,
    pub config: ScenarioConfig,
}

fn run_cell(config: &ScenarioConfig, index: usize, mass: f64, input: MassSpec) -> Result<Cell, HarnessError> {
    let base = config.initial.as_ref().expect("validated: sweeps carry an initial density");
    let initial = base.with_mass(mass);
    let classification = classify_with_initial(config, mass, Some(&initial))?;
    let class_label = classification.as_ref().map_or("none".to_string(), |c| c.certificate.as_str().to_string());
    let ratio = config.threshold.filter(|_| !is_moment_regime(config.n, &config.chi)).map(|t| mass / t);

    if is_moment_regime(config.n, &config.chi) {
        let row = SweepRow {
            index,
            mass,
            mass_input: input,
            mass_over_threshold: None,
            outcome: CLASSIFIED_ONLY.into(),
            t_detect: None,
            u_max_final: None,
            classification: class_label,
        };
        return Ok(Cell { row, report: None, classification });
    }

    let solver = config.solver.as_ref().expect("validated: simulated sweeps carry a solver config");
    let report = run(&initial, &config.grid, config.n, solver).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let simulated = report.outcome != Outcome::Infeasible;
    let row = SweepRow {
        index,
        mass,
        mass_input: input,
        mass_over_threshold: ratio,
        outcome: report.outcome.as_str().into(),
        t_detect: report.t_detect,
        u_max_final: simulated.then_some(report.u_max_final),
        classification: class_label,
    };
    Ok(Cell { row, report: Some(report), classification })
}

/// Runs every cell on a pool of `parallelism` workers. Cells come back in
/// mass order whatever the completion order.
pub fn sweep_mass(config: &ScenarioConfig) -> Result<Vec<Cell>, HarnessError> {
    let spec: &SweepSpec = config.sweep.as_ref().expect("validated: sweep section present");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("worker pool: {e}")))?;
    let jobs: Vec<(usize, f64, MassSpec)> =
        spec.masses.iter().zip(&spec.inputs).enumerate().map(|(i, (&m, &s))| (i, m, s)).collect();
    let mut cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter().map(|&(i, m, s)| run_cell(config, i, m, s)).collect::<Result<Vec<_>, _>>()
    })?;
    cells.sort_by(|a, b| a.row.mass.total_cmp(&b.row.mass));
    Ok(cells)
}

pub fn summarize(config: &ScenarioConfig, cells: &[Cell]) -> SweepSummary {
    let completed: Vec<f64> =
        cells.iter().filter(|c| c.row.outcome == Outcome::Completed.as_str()).map(|c| c.row.mass).collect();
    let blown: Vec<f64> =
        cells.iter().filter(|c| c.row.outcome == Outcome::NumericalBlowup.as_str()).map(|c| c.row.mass).collect();
    let largest_completed = completed.iter().copied().reduce(f64::max);
    let smallest_blowup = blown.iter().copied().reduce(f64::min);
    let dichotomy_sharp = match (largest_completed, smallest_blowup) {
        (Some(a), Some(b)) => Some(a < b),
        _ => None,
    };
    SweepSummary {
        scenario: "sweep-mass",
        seed: config.seed,
        threshold: config.threshold,
        rows: cells.iter().map(|c| c.row.clone()).collect(),
        largest_completed_mass: largest_completed,
        smallest_blowup_mass: smallest_blowup,
        dichotomy_sharp,
        config: config.clone(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:?}"))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "mass,mass_over_threshold,outcome,t_detect,u_max_final,classification")?;
    for r in rows {
        writeln!(
            out,
            "{:?},{},{},{},{},{}",
            r.mass,
            opt(r.mass_over_threshold),
            r.outcome,
            opt(r.t_detect),
            opt(r.u_max_final),
            r.classification
        )?;
    }
    Ok(())
}
