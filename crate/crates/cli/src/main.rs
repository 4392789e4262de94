//! `toriclab`: configured experiment runs over the toric envelope library.
//!
//! Exit codes: `0` when every check passes, `2` when the run completes but a
//! tolerance check fails (the failures are listed in `report.json`), `1` on
//! configuration or I/O errors.

mod config;
mod describe;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Experiment;

#[derive(Parser)]
#[command(
    name = "toriclab",
    version,
    about = "Numerical laboratory for maximal envelopes, equilibrium measures, and \
             weighted section asymptotics on toric grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config; writes report.json and CSV tables.
    Run {
        /// Path to the experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path config override, e.g. `--override grid.points=257`;
        /// repeatable.
        #[arg(long = "override", value_name = "KEY=VAL")]
        overrides: Vec<String>,
    },
    /// Print what an experiment computes and which identity it checks.
    Describe {
        /// Experiment name, e.g. `envelope` or `suite`.
        experiment: String,
    },
}

/// Honor an explicit thread count before any parallel work starts.
fn init_threads() {
    if let Ok(raw) = std::env::var("TORICLAB_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!(
                "warning: TORICLAB_THREADS={raw:?} is not a positive integer; \
                 using all available cores"
            ),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match cli.command {
        Command::Run {
            config,
            out,
            overrides,
        } => {
            let cfg = match config::load_config(&config, &overrides) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("configuration error: {e:#}");
                    return ExitCode::from(1);
                }
            };
            let out_dir = experiments::output_dir(&cfg, out.as_deref());
            match experiments::run_single(&cfg, &out_dir) {
                Ok(report) if report.passed => {
                    println!(
                        "{}: all checks passed ({} -> {})",
                        report.experiment,
                        config.display(),
                        out_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Ok(report) => {
                    for failure in &report.failures {
                        eprintln!("check failed: {failure}");
                    }
                    eprintln!(
                        "{}: {} check(s) failed; see {}",
                        report.experiment,
                        report.failures.len(),
                        out_dir.join("report.json").display()
                    );
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("run error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Describe { experiment } => match Experiment::from_name(&experiment) {
            Some(exp) => {
                println!("{}", describe::describe(exp));
                ExitCode::SUCCESS
            }
            None => {
                eprintln!(
                    "unknown experiment {experiment:?}; known experiments: {}",
                    Experiment::ALL
                        .iter()
                        .map(|e| e.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                ExitCode::from(1)
            }
        },
    }
}
