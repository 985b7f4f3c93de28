use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bo3::expcli::plot::{plot, PlotSpec};
use bo3::expcli::{run, ExperimentConfig, EXIT_USAGE, VERSION};

#[derive(Parser)]
#[command(name = "bo3", version = VERSION, about = "Third-order Benjamin-Ono experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts and manifest.
    Run {
        config: PathBuf,
        /// Override a scalar field, e.g. `solver.dt=1e-4`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
    /// Plot CSV columns to an SVG next to the CSV.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, required = true)]
        y: Vec<String>,
        #[arg(long)]
        loglog: bool,
    },
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { code(EXIT_USAGE) } else { code(0) };
        }
    };
    match cli.command {
        Command::Run { config, set } => {
            let cfg = match ExperimentConfig::load(&config, &set) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_USAGE);
                }
            };
            match run(&cfg) {
                Ok((dir, manifest)) => {
                    for v in &manifest.outcome.verdicts {
                        println!("{} {} = {:e}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.measured);
                    }
                    for w in &manifest.outcome.warnings {
                        eprintln!("warning: {w}");
                    }
                    if let Some(e) = &manifest.outcome.error {
                        eprintln!("error: {e}");
                    }
                    println!("{:?}: {}", manifest.status, dir.display());
                    code(manifest.status.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_USAGE)
                }
            }
        }
        Command::Plot { csv, x, y, loglog } => match plot(&csv, &PlotSpec { x, y, loglog }) {
            Ok(out) => {
                println!("{}", out.display());
                code(0)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(EXIT_USAGE)
            }
        },
        Command::Validate { config, set } => {
            match ExperimentConfig::load(&config, &set).and_then(|c| c.validate()) {
                Ok(()) => {
                    println!("ok");
                    code(0)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_USAGE)
                }
            }
        }
    }
}
