use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use relay_beamform_core::harness::{self, OutputFormat};
use relay_beamform_core::optimizer::{self, SolverSettings};
use relay_beamform_core::scenario::{self, ScenarioConfig};
use relay_beamform_core::signal::forms_for;
use relay_beamform_core::socp::ConeFactors;
use relay_beamform_core::units::db_to_linear;
use relay_beamform_core::Error;

const LOG_ENV: &str = "RELAY_BEAMFORM_LOG";

#[derive(Parser)]
#[command(name = "relay-beamform", version, about = "Max-min SINR relay beamforming for underlay cognitive radio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print the solution as JSON.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        /// Relative bisection tolerance on the worst-case SINR.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Also write the cone program at the final certified level.
        #[arg(long)]
        dump_cone: Option<PathBuf>,
    },
    /// Run the sweeps in a spec file, one output file per sweep.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; 0 uses every available core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Random-search lower bound for small scenarios (at most 3 relays).
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw a Rayleigh scenario and write it as a scenario file.
    Generate {
        #[arg(long)]
        relays: usize,
        #[arg(long)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Powers in dB relative to a unit noise floor.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        pu_power_db: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        su_power_db: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        cap_db: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        budget_db: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

enum Failure {
    Input(Error),
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverFailure { .. } | Error::Factorization { .. } => Failure::Solver(e),
            other => Failure::Input(other),
        }
    }
}

fn settings(tol: f64) -> Result<SolverSettings, Failure> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Failure::Input(Error::InvalidConfig(format!("--tol must lie in (0, 1), got {tol}"))));
    }
    Ok(SolverSettings {
        tol_gamma_rel: tol,
        ..SolverSettings::default()
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|source| {
        Failure::Input(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn solve(scenario_path: &Path, tol: f64, dump_cone: Option<&Path>) -> Result<(), Failure> {
    let settings = settings(tol)?;
    let (config, channels) = scenario::load_scenario(scenario_path)?;
    let forms = forms_for(&config, &channels)?;
    let sol = optimizer::maximize_min_sinr(&forms, config.interference_cap, config.power_budget, &settings)?;
    info!(
        "gamma* = {:.6e} after {} bisection steps ({:?})",
        sol.gamma_star, sol.bisection_steps, sol.status
    );
    if let Some(path) = dump_cone {
        let level = sol.bracket.0.max(0.0).sqrt();
        let program = ConeFactors::new(&forms)?.problem(level, config.interference_cap, config.power_budget, settings.anchor);
        write_file(path, &program.cone.to_json()?)?;
    }
    println!("{}", serde_json::to_string_pretty(&sol).map_err(Error::from)?);
    Ok(())
}

fn sweep(spec_path: &Path, out: &Path, format: OutputFormat, workers: usize, tol: f64) -> Result<(), Failure> {
    let settings = settings(tol)?;
    let specs = harness::load_specs(spec_path)?;
    fs::create_dir_all(out).map_err(|source| {
        Failure::Input(Error::Io {
            path: out.to_path_buf(),
            source,
        })
    })?;
    for spec in &specs {
        info!("sweep '{}': {} values x {} trials", spec.label, spec.values.len(), spec.trials);
        let result = harness::run_sweep(spec, &settings, workers)?;
        let path = out.join(format!("{}.{}", spec.label, format.extension()));
        harness::emit(&result, format, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn oracle(scenario_path: &Path, samples: usize, seed: u64) -> Result<(), Failure> {
    let (config, channels) = scenario::load_scenario(scenario_path)?;
    let forms = forms_for(&config, &channels)?;
    let result = optimizer::grid_oracle(&forms, config.interference_cap, config.power_budget, samples, seed)?;
    println!("{}", serde_json::to_string_pretty(&result).map_err(Error::from)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { scenario, tol, dump_cone } => solve(&scenario, tol, dump_cone.as_deref()),
        Command::Sweep {
            spec,
            out,
            format,
            workers,
            tol,
        } => sweep(&spec, &out, format.into(), workers, tol),
        Command::Oracle { scenario, samples, seed } => oracle(&scenario, samples, seed),
        Command::Generate {
            relays,
            pairs,
            seed,
            pu_power_db,
            su_power_db,
            cap_db,
            budget_db,
            out,
        } => {
            let config = ScenarioConfig {
                pu_power: db_to_linear(pu_power_db),
                su_power: db_to_linear(su_power_db),
                interference_cap: db_to_linear(cap_db),
                power_budget: db_to_linear(budget_db),
                seed,
                ..ScenarioConfig::new(relays, pairs)
            };
            config.validate()?;
            scenario::save_scenario(&config, &scenario::sample_channels(&config), &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e}");
            ExitCode::from(3)
        }
    }
}
