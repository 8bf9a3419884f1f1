//! Command-line entry point: dispatches config-driven experiment runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loclab::harness;

#[derive(Parser)]
#[command(
    name = "loclab",
    version,
    about = "Numerical laboratory for localization in one dimension",
    long_about = "Runs config-driven experiments: potential construction, \
                  spectra, correlator decay profiles, Diophantine tables, and \
                  a desk-scale verification suite. Each run writes CSV \
                  artifacts plus a manifest with file digests."
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir` from the config; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed override (recorded in the manifest).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scale/radius tables for the periodic-approximant construction.
    Sequences,
    /// Sample one potential window and write it as CSV.
    Construct,
    /// Diagonalize one sampled window; write potential and eigenvalues.
    Spectrum,
    /// Monte Carlo correlator decay profile (optionally with a rate fit).
    Decay,
    /// Desk-scale verification suite; exit 2 if any check fails.
    Verify,
    /// Continued-fraction convergents and orbit-gap scans.
    Diophantine,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sub = match cli.cmd {
        Cmd::Sequences => harness::Subcommand::Sequences,
        Cmd::Construct => harness::Subcommand::Construct,
        Cmd::Spectrum => harness::Subcommand::Spectrum,
        Cmd::Decay => harness::Subcommand::Decay,
        Cmd::Verify => harness::Subcommand::Verify,
        Cmd::Diophantine => harness::Subcommand::Diophantine,
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(1);
    };
    ExitCode::from(harness::execute(sub, &config, cli.out, cli.seed))
}
