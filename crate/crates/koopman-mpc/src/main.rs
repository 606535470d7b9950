//! Command-line front end: fit surrogate models, run closed-loop
//! simulations, and reproduce the benchmark comparison suites.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use koopman_mpc::edmd::SurrogateModel;
use koopman_mpc::error::Error;
use koopman_mpc::harness::{self, Scenario};

#[derive(Parser)]
#[command(
    name = "koopman-mpc",
    version,
    about = "Bilinear Koopman surrogate identification and offset-free MPC benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the scenario's datasets, fit its model, write a model file.
    Fit {
        /// Scenario description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output model file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the closed loop and export the per-step trace as CSV.
    Simulate {
        /// Scenario description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Prefitted model file; omitted, the model is fitted inline from
        /// the scenario's data spec.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output trace (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a shipped comparison suite and write traces, summary and a
    /// gnuplot script.
    Benchmark {
        /// Suite name: "vdp" or "four-tanks".
        #[arg(long)]
        suite: String,
        /// Output directory.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Scenario::from_toml(&text)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit { config, out } => {
            let scenario = load_scenario(&config)?;
            let (model, resamples) = harness::fit_model(&scenario)?;
            model.save(&out)?;
            if resamples > 0 {
                eprintln!("note: {resamples} data points resampled after domain errors");
            }
            println!(
                "fitted {:?} model ({} observables) -> {}",
                scenario.model.kind,
                model.lifted_dim(),
                out.display()
            );
        }
        Command::Simulate { config, model, out } => {
            let scenario = load_scenario(&config)?;
            let trace = match model {
                Some(path) => {
                    let model = SurrogateModel::load(&path)?;
                    harness::run_closed_loop_with_model(&scenario, &model)?
                }
                None => harness::run_closed_loop(&scenario)?,
            };
            trace.write_csv(&out)?;
            println!(
                "{} steps -> {}  (final |x - xref| = {:.3e}, final |r(x) - y| = {:.3e})",
                trace.len(),
                out.display(),
                trace.final_err_state(),
                trace.final_err_output()
            );
        }
        Command::Benchmark { suite, out_dir } => {
            let summary = harness::run_benchmark_suite(&suite, &out_dir)?;
            print!("{}", summary.summary_text());
            println!("traces and plot script written to {}", out_dir.display());
        }
    }
    Ok(())
}

/// 0 on success, 1 for configuration problems, 2 for numerical failures.
fn classify(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::ModelFile(_)
        | Error::Dimension { .. }
        | Error::EmptyData
        | Error::DatasetCount { .. }
        | Error::BadBasisInput { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}
