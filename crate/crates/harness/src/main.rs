//! `cso`: run replication studies, scan objective landscapes, self-test.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cso_core::bench::{QueueModel, QueueOracle, SeparableModel};
use cso_harness::{
    landscape_csv, landscape_scan, line_points, run_experiment, run_selftest, seed_stream,
    ExperimentConfig, HarnessError,
};

#[derive(Parser)]
#[command(
    name = "cso",
    about = "Discrete convex simulation optimization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LandscapeModel {
    Separable,
    Queue,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replication study described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_path; CSV goes to stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Per-point means and 95% intervals over the whole line [1, N].
    Landscape {
        #[arg(long, value_enum, default_value = "queue")]
        model: LandscapeModel,
        #[arg(long, default_value_t = 150)]
        n: i64,
        #[arg(long, default_value_t = 200)]
        replications: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Separable model only: noise standard deviation.
        #[arg(long, default_value_t = 1.0)]
        noise_sigma: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Quick property checks.
    Selftest,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        HarnessError::Solver(_) => ExitCode::from(EXIT_SOLVER),
        _ => ExitCode::from(EXIT_CONFIG),
    }
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), HarnessError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(HarnessError::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(config: PathBuf, output: Option<PathBuf>) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let exp = match run_experiment(&cfg) {
        Ok(e) => e,
        Err(e) => return fail(&e),
    };
    if let Err(e) = emit(&exp.csv(), output.as_ref().or(cfg.output_path.as_ref())) {
        return fail(&e);
    }
    eprintln!("N,mean_cost,std_cost,coverage_rate,failures");
    for r in &exp.curve {
        let cov = r.coverage_rate.map_or("NA".to_string(), |c| c.to_string());
        eprintln!(
            "{},{},{},{},{}",
            r.n, r.mean_cost, r.std_cost, cov, r.failures
        );
    }
    if exp.failures() > 0 {
        for r in exp.records.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "N={} replicate={}: {}",
                r.n,
                r.replicate,
                r.error.as_deref().unwrap_or_default()
            );
        }
        return ExitCode::from(EXIT_SOLVER);
    }
    ExitCode::SUCCESS
}

fn landscape(
    model: LandscapeModel,
    n: i64,
    replications: usize,
    seed: u64,
    noise_sigma: f64,
    output: Option<PathBuf>,
) -> Result<(), HarnessError> {
    let rows = match model {
        LandscapeModel::Queue => {
            let oracle = QueueOracle::new(QueueModel::new(n)?, 0.0)?;
            landscape_scan(&oracle, &line_points(n), replications, seed)?
        }
        LandscapeModel::Separable => {
            let mut rng = seed_stream(seed, &["model", "SEPARABLE", "1", &n.to_string(), "0"]);
            let m = SeparableModel::random(1, n, noise_sigma, &mut rng)?;
            landscape_scan(&m, &line_points(n), replications, seed)?
        }
    };
    emit(&landscape_csv(&rows), output.as_ref())
}

fn selftest() -> ExitCode {
    let checks = run_selftest();
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SOLVER)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, output } => run(config, output),
        Command::Landscape {
            model,
            n,
            replications,
            seed,
            noise_sigma,
            output,
        } => landscape(model, n, replications, seed, noise_sigma, output)
            .map_or_else(|e| fail(&e), |_| ExitCode::SUCCESS),
        Command::Selftest => selftest(),
    }
}
