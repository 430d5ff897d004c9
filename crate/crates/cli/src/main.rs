//! `mt-branch`: positive radial critical points of the Moser–Trudinger
//! functional on the unit disk, from the command line.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Output;
use crate::config::{resolve, RunArgs, RunConfig, DEFAULT_ASYM_MU, DEFAULT_SOLVE_MU};

#[derive(Parser)]
#[command(name = "mt-branch", version, about = "Radial Moser–Trudinger branch on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one profile: profile.csv and solve.json.
    Solve(RunArgs),
    /// Sweep the branch over a mu grid: branch.csv and branch.json.
    Sweep(RunArgs),
    /// Sweep and refine the branch maximum: branch.csv and sharp.json.
    Sharp(RunArgs),
    /// Count branch points at the energy level --Lambda: count.json.
    Count(RunArgs),
    /// Blow-up checks at one mu: decomposition.csv, quantization.csv, asym.json.
    Asym(RunArgs),
}

const EXIT_NUMERIC: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("mt-branch: usage error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn write_all(out: &Output, cfg: &RunConfig) -> std::io::Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    for (path, contents) in &out.files {
        std::fs::write(path, contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    type Run = fn(&RunConfig) -> anyhow::Result<Output>;
    let (args, default_mu, run): (&RunArgs, Option<f64>, Run) = match &cli.command {
        Command::Solve(a) => (a, Some(DEFAULT_SOLVE_MU), commands::solve),
        Command::Sweep(a) => (a, None, commands::sweep),
        Command::Sharp(a) => (a, None, commands::sharp),
        Command::Count(a) => (a, None, commands::count),
        Command::Asym(a) => (a, Some(DEFAULT_ASYM_MU), commands::asym),
    };
    let cfg = match resolve(args, default_mu) {
        Ok(cfg) => cfg,
        Err(msg) => return usage_error(&msg),
    };
    if matches!(cli.command, Command::Count(_)) && cfg.level.is_none() {
        return usage_error("count needs --Lambda");
    }

    let out = match run(&cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("mt-branch: numerical failure: {e:#}");
            return ExitCode::from(EXIT_NUMERIC);
        }
    };
    if let Err(e) = write_all(&out, &cfg) {
        eprintln!("mt-branch: cannot write to {}: {e}", cfg.out.display());
        return ExitCode::from(EXIT_USAGE);
    }
    for line in &out.stdout {
        println!("{line}");
    }
    match &out.partial_failure {
        Some(note) => {
            eprintln!("mt-branch: {note}");
            ExitCode::from(EXIT_NUMERIC)
        }
        None => ExitCode::SUCCESS,
    }
}
