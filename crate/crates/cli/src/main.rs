//! Command-line front end: list and describe catalog entries, run scenario
//! files, sweep a parameter axis.
//!
//! Exit codes: `0` all requested checks passed, `1` an assertion failed,
//! `2` the scenario or invocation was invalid.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cglab_core::catalog;
use cglab_core::scenario::{self, ConfigError, Scenario};

#[derive(Debug, Parser)]
#[command(name = "cglab", version, about = "tangent-bundle conformality laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List catalog charts and maps
    List,
    /// Describe one catalog entry
    Describe { entry: String },
    /// Run the suites requested by a scenario file
    Run {
        /// Path to a scenario JSON file
        scenario: PathBuf,
        /// Override the sample count
        #[arg(long)]
        samples: Option<usize>,
        /// Override the RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the identity-residual tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Write the JSON report here (stdout always gets a summary)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one axis (t, p, q, alpha, r, s, beta) and emit CSV
    Sweep {
        /// Path to a scenario JSON file
        scenario: PathBuf,
        /// Axis to sweep
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Override the sample count
        #[arg(long)]
        samples: Option<usize>,
        /// Override the RNG seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the identity-residual tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, ConfigError> {
    match cli.command {
        Command::List => {
            println!("charts:");
            for e in catalog::chart_entries() {
                println!("  {:<26} {}", e.id, e.summary);
            }
            println!("maps:");
            for e in catalog::map_entries() {
                println!("  {:<26} {}", e.id, e.summary);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Describe { entry } => describe(&entry),
        Command::Run { scenario, samples, seed, tol, out } => {
            let sc = load_scenario(&scenario, samples, seed, tol)?;
            let report = scenario::run(&sc)?;
            println!("scenario:  {}", report.scenario);
            println!("aggregate: {}", report.aggregate);
            println!("predicted: {}", report.predicted);
            println!("agreement: {}", report.agreement);
            for (name, value) in &report.residual_summaries {
                println!("  {name:<32} {value:.6e}");
            }
            for failure in &report.suite_failures {
                println!("FAIL: {failure}");
            }
            if let Some(path) = out {
                fs::write(&path, report.to_json()).map_err(|e| ConfigError::Invalid {
                    field: "out".into(),
                    reason: e.to_string(),
                })?;
                println!("report written to {}", path.display());
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep { scenario, axis, grid, samples, seed, tol, out } => {
            let sc = load_scenario(&scenario, samples, seed, tol)?;
            let rows = scenario::sweep(&sc, &axis, &grid)?;
            let csv = scenario::sweep_csv(&rows);
            match out {
                Some(path) => {
                    fs::write(&path, &csv).map_err(|e| ConfigError::Invalid {
                        field: "out".into(),
                        reason: e.to_string(),
                    })?;
                    println!("sweep written to {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn describe(entry: &str) -> Result<ExitCode, ConfigError> {
    for e in catalog::chart_entries() {
        if e.id == entry {
            println!("chart {}", e.id);
            println!("  {}", e.summary);
            print_params(e.params);
            return Ok(ExitCode::SUCCESS);
        }
    }
    for e in catalog::map_entries() {
        if e.id == entry {
            println!("map {}", e.id);
            println!("  {}", e.summary);
            print_params(e.params);
            let (dom, cod) = catalog::expected_charts(e.id)?;
            println!("  domain chart:   {dom}");
            println!("  codomain chart: {cod}");
            let truth = catalog::ground_truth(e.id, &catalog::Params::new())?;
            println!("  declared flags (defaults): {truth:?}");
            return Ok(ExitCode::SUCCESS);
        }
    }
    Err(ConfigError::Invalid {
        field: "entry".into(),
        reason: format!("unknown catalog entry `{entry}`; try `cglab list`"),
    })
}

fn print_params(params: &[(&str, f64, &str)]) {
    if params.is_empty() {
        println!("  parameters: none");
    } else {
        println!("  parameters:");
        for (name, default, meaning) in params {
            println!("    {name:<8} default {default:<6} {meaning}");
        }
    }
}

fn load_scenario(
    path: &PathBuf,
    samples: Option<usize>,
    seed: Option<u64>,
    tol: Option<f64>,
) -> Result<Scenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Invalid {
        field: "scenario".into(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    let mut sc = Scenario::from_json(&text)?;
    if let Some(n) = samples {
        sc.samples = n;
    }
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(t) = tol {
        sc.tol.identity = t;
    }
    sc.validate()?;
    Ok(sc)
}
