//! `spde`: run configured experiments and report on their outputs.
//!
//! Exit codes: 0 all gates passed, 2 a statistical gate failed, 1 a
//! configuration, runtime or integrity error.

mod config;
mod manifest;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::manifest::Status;

#[derive(Parser)]
#[command(name = "spde", version, about = "Monte Carlo experiments for slowly time-dependent SPDEs on the 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output.dir`.
        #[arg(long, env = "SPDE_OUT_DIR")]
        out_dir: Option<PathBuf>,
        /// Worker threads; 0 uses every core. Results do not depend on it.
        #[arg(long, env = "SPDE_THREADS")]
        threads: Option<usize>,
    },
    /// Verify checksums and summarise a run from its manifest or directory.
    Report { manifest: PathBuf },
    /// Built-in consistency checks.
    Selftest {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, env = "SPDE_THREADS", default_value_t = 0)]
        threads: usize,
    },
}

fn code(status: Status) -> ExitCode {
    match status {
        Status::Passed => ExitCode::SUCCESS,
        Status::GateFailed => ExitCode::from(2),
        Status::Running | Status::Error => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out_dir, threads } => {
            let mut cfg = match config::load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprint!("{e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(d) = out_dir {
                cfg.output.dir = d.to_string_lossy().into_owned();
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            match run::execute(&cfg) {
                Ok(status) => {
                    println!("{}: {:?}; artifacts in {}", cfg.kind.name(), status, cfg.output.dir);
                    code(status)
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Report { manifest } => match report::render(&manifest) {
            Ok((text, status)) => {
                print!("{text}");
                code(status)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Command::Selftest { quick, seed, threads } => match spde_core::experiments::run_selftest(quick, seed, threads) {
            Ok(r) => {
                for g in &r.gates {
                    println!("{} {:<44} {:>12.5e}  {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.value, g.detail);
                }
                code(if r.passed() { Status::Passed } else { Status::GateFailed })
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
