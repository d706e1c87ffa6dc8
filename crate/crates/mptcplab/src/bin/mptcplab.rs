//! Command-line front end: config-driven runs, built-in reference
//! experiments, and config validation. Logging verbosity is controlled by
//! the `MPTCPLAB_LOG` environment variable.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use mptcplab::config::ExperimentConfig;
use mptcplab::experiments::{describe, EXPERIMENT_NAMES};
use mptcplab::runner::{exit_code_for, run_config, run_reproduce, write_diagnostic};

#[derive(Parser)]
#[command(name = "mptcplab", version, about = "Multipath TCP fluid/packet analysis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a config file.
    Run {
        /// Path to the TOML experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Seed override (takes precedence over the config's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for traces and summaries.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads for multi-run experiments.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run a built-in named experiment.
    Reproduce {
        /// One of the names printed by `list-experiments`.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the built-in experiments.
    ListExperiments,
    /// Parse and validate a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MPTCPLAB_LOG")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            jobs,
        } => {
            let cfg = match ExperimentConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(exit_code_for(&e) as u8);
                }
            };
            match run_config(&cfg, &out, seed, jobs) {
                Ok(arts) => {
                    for f in &arts.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    let code = exit_code_for(&e);
                    if code == 3 {
                        if let Ok(p) = write_diagnostic(&out, &e) {
                            eprintln!("diagnostic written to {}", p.display());
                        }
                    }
                    ExitCode::from(code as u8)
                }
            }
        }
        Command::Reproduce {
            name,
            seed,
            out,
            jobs,
        } => match run_reproduce(&name, &out, seed, jobs) {
            Ok(arts) => {
                for f in &arts.files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("reproduce failed: {e}");
                let code = exit_code_for(&e);
                if code == 3 {
                    if let Ok(p) = write_diagnostic(&out, &e) {
                        eprintln!("diagnostic written to {}", p.display());
                    }
                }
                ExitCode::from(code as u8)
            }
        },
        Command::ListExperiments => {
            for name in EXPERIMENT_NAMES {
                println!("{name}: {}", describe(name).unwrap_or(""));
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ExperimentConfig::from_file(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid config: {e}");
                ExitCode::from(exit_code_for(&e) as u8)
            }
        },
    }
}
