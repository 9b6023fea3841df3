//! Command-line front end: argument parsing, runs and exit codes.

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod selftest;

use config::CommonArgs;

/// Exit code for a completed run whose verdicts all passed.
pub const EXIT_OK: i32 = 0;
/// Usage, configuration or I/O error.
pub const EXIT_ERROR: i32 = 1;
/// Completed run with at least one failed verdict.
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "srelab", version, about = "Perpetuities, SREs and critical GARCH: constants and limit-theorem experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// κ, tilted log-moments, D, c' and C_{λ,Z} for one law.
    Constants(CommonArgs),
    /// Simulate paths; the first is written to path.csv.
    Simulate(CommonArgs),
    /// Draw perpetuities and report quantiles.
    Perpetuity(CommonArgs),
    /// Truncated moments E U^κ I(U ≤ t) against D g_A(t).
    Truncmoment(CommonArgs),
    /// Weak law of large numbers for SRE or i.i.d. sums.
    Wlln(CommonArgs),
    /// Central limit theorem for GARCH partial sums.
    Clt(CommonArgs),
    /// Functional limit theorem for GARCH partial sums.
    Fclt(CommonArgs),
    /// Lag covariances of clipped stationary values.
    Covprobe(CommonArgs),
    /// Truncated means, tail ratios, b_n and slow-variation probes.
    Slowvary(CommonArgs),
    /// Fast checks with exact answers across all modules.
    Selftest(CommonArgs),
}

fn execute(command: &Command) -> srelab::Result<(commands::Outcome, std::path::PathBuf)> {
    let (args, outcome) = match command {
        Command::Constants(a) => {
            let (out, table) = commands::constants(a)?;
            println!("{}", serde_json::to_string_pretty(&table)?);
            (a, out)
        }
        Command::Simulate(a) => (a, commands::simulate(a)?),
        Command::Perpetuity(a) => (a, commands::perpetuity(a)?),
        Command::Truncmoment(a) => (a, commands::truncmoment(a)?),
        Command::Wlln(a) => (a, commands::wlln(a)?),
        Command::Clt(a) => (a, commands::clt(a)?),
        Command::Fclt(a) => (a, commands::fclt(a)?),
        Command::Covprobe(a) => (a, commands::covprobe(a)?),
        Command::Slowvary(a) => (a, commands::slowvary(a)?),
        Command::Selftest(a) => (a, commands::selftest(a)?),
    };
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| std::path::PathBuf::from("srelab-out").join(outcome.run.manifest.subcommand.as_str()));
    Ok((outcome, dir))
}

/// Parse `argv` (program name first), run, write outputs and return the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (outcome, dir) = match execute(&cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = outcome.write(&dir) {
        eprintln!("error: writing {}: {e}", dir.display());
        return EXIT_ERROR;
    }
    for r in &outcome.run.reports {
        for v in &r.verdicts {
            println!("{:<13} {} {} (observed {}, rule {})", format!("{:?}", v.status).to_uppercase(), r.scenario, v.rule, v.observed, v.threshold);
        }
    }
    println!("digest {} -> {}", outcome.run.manifest.digest, dir.display());
    if outcome.run.passed() {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}
