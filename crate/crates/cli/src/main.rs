use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mixop_cli::config::{DOMAIN_EXAMPLES, KERNEL_EXAMPLES};
use mixop_cli::{exit, run_file, CliError, ExperimentConfig, Kind, RunOptions};

#[derive(Parser)]
#[command(
    name = "mixop",
    version,
    about = "Monte Carlo and grid experiments for mixed local-nonlocal operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write summary.json plus CSV files.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Print nothing but errors.
        #[arg(long)]
        quiet: bool,
    },
    /// Check a config against the schema without running it.
    Validate { config: PathBuf },
    /// List jump-kernel families and their parameters.
    ListKernels,
    /// List domain shapes and their parameters.
    ListDomains,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            quiet,
        } => {
            let outcome = run_file(&config, &RunOptions { out_dir: out, seed })?;
            if !quiet {
                for line in &outcome.report {
                    println!("{line}");
                }
                println!(
                    "wrote {} files to {}",
                    outcome.files.len(),
                    outcome.out_dir.display()
                );
            }
            Ok(if outcome.pass {
                exit::SUCCESS
            } else {
                exit::VERDICT_FAILED
            })
        }
        Command::Validate { config } => {
            let raw = std::fs::read(&config).map_err(|e| CliError::io(&config, e))?;
            let cfg = ExperimentConfig::from_json(&raw)?;
            println!("ok: kind {} in dimension {}", cfg.kind.name(), cfg.dim()?);
            Ok(exit::SUCCESS)
        }
        Command::ListKernels => {
            for (name, example) in KERNEL_EXAMPLES {
                println!("{name:<22} {example}");
            }
            Ok(exit::SUCCESS)
        }
        Command::ListDomains => {
            for (name, example) in DOMAIN_EXAMPLES {
                println!("{name:<10} {example}");
            }
            println!();
            let kinds: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
            println!("experiment kinds: {}", kinds.join(", "));
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
