use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chemolab::harness::{
    resolve_output_dir, run_scenario, ConfigError, HarnessError, Overrides, Scenario, ScenarioConfig, SuiteName,
    EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "chemolab", version, about = "Chemotaxis thresholds: radial simulations, certificates and inequality checks")]
struct Cli {
    /// Output directory (overrides the config file and CHEMOLAB_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a sweep-mass config.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the verification suites.
    Verify {
        /// Suite to run; repeat for several. Defaults to all.
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Random draws per profile and dimension.
        #[arg(long)]
        draws: Option<usize>,
        /// Optional config file supplying defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
    Ok(ScenarioConfig::from_json_str(&text)?)
}

fn prepare(cli: Cli) -> Result<ScenarioConfig, HarnessError> {
    let (mut config, overrides) = match cli.command {
        Command::Run { config, seed } => (load(&config)?, Overrides { seed, ..Default::default() }),
        Command::Sweep { config, seed } => {
            let c = load(&config)?;
            if c.scenario != Scenario::SweepMass {
                return Err(ConfigError::new("scenario", "the sweep command needs scenario \"sweep-mass\"").into());
            }
            (c, Overrides { seed, ..Default::default() })
        }
        Command::Verify { suites, seed, draws, config } => {
            let c = match config {
                Some(p) => load(&p)?,
                None => ScenarioConfig::verify_default(),
            };
            if c.scenario != Scenario::VerifyInequalities {
                return Err(
                    ConfigError::new("scenario", "the verify command needs scenario \"verify-inequalities\"").into()
                );
            }
            let parsed = if suites.is_empty() {
                None
            } else {
                Some(
                    suites
                        .iter()
                        .map(|s| SuiteName::parse(s).ok_or_else(|| ConfigError::new("suite", format!("unknown suite {s:?}"))))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            };
            (c, Overrides { seed, suites: parsed, draws, ..Default::default() })
        }
    };
    let out = resolve_output_dir(cli.out, config.output_dir.as_deref());
    config.apply(&Overrides { output_dir: Some(out), ..overrides })?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = prepare(cli).and_then(|c| run_scenario(&c));
    match result {
        Ok(r) => {
            // a closed pipe (e.g. `| head`) is not an error worth panicking over
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", r.message);
            for a in &r.artifacts {
                let _ = writeln!(out, "wrote {}", a.display());
            }
            ExitCode::from(r.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            debug_assert!(code == EXIT_CONFIG || code == 3);
            ExitCode::from(code as u8)
        }
    }
}
