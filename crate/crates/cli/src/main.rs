//! `nlch`: simulate, solve and inspect the nonlocal Cahn-Hilliard equation.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlch_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "nlch",
    version,
    about = "Nonlocal Cahn-Hilliard simulator with a logarithmic potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the dynamics, writing a CSV time series and snapshots.
    Simulate {
        config: PathBuf,
        /// Overrides `output.directory`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve for a mass-constrained stationary state.
    Equilibrium {
        config: PathBuf,
        /// Snapshot used as initial guess instead of the configured initial data.
        #[arg(long)]
        guess: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Measure the De Giorgi sequence y_n on stored snapshots.
    Degiorgi {
        config: PathBuf,
        #[arg(long)]
        snapshots: PathBuf,
        /// Poincaré constant; estimated from the snapshots when omitted.
        #[arg(long = "c-p")]
        c_p: Option<f64>,
        /// L1 bound on F'(phi); estimated from the snapshots when omitted.
        #[arg(long = "c-tau")]
        c_tau: Option<f64>,
        /// Gagliardo-Nirenberg constant; estimated from the snapshots when omitted.
        #[arg(long = "c-hat")]
        c_hat: Option<f64>,
    },
    /// Print tau-tilde, the recursion coefficients and the y0 threshold.
    Constants {
        config: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long = "c-p")]
        c_p: f64,
        #[arg(long = "c-tau")]
        c_tau: f64,
        #[arg(long = "c-hat")]
        c_hat: f64,
        /// Overrides the kernel's L1 gradient norm.
        #[arg(long = "grad-j")]
        grad_j: Option<f64>,
    },
    /// Iterate y_{n+1} = C b^n y_n^{1+eps} and compare with theta b^{-n/eps}.
    Lemma {
        #[arg(long = "C")]
        c: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long)]
        n: usize,
    },
    /// Print the tail asymptotics of the logarithmic potential.
    PotentialCheck { config: PathBuf },
}

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_IO: u8 = 3;

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let one_line = message.split_whitespace().collect::<Vec<_>>().join(" ");
    eprintln!("error kind={kind} code={code} message={one_line:?}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = std::io::stdout().lock().write_all(e.to_string().as_bytes());
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", EXIT_USAGE, &e.to_string()),
    };
    let mut out = String::new();
    let result = match cli.command {
        Command::Simulate { config, output } => commands::simulate(&mut out, &config, output),
        Command::Equilibrium { config, guess, output } => commands::equilibrium(&mut out, &config, guess, output),
        Command::Degiorgi {
            config,
            snapshots,
            c_p,
            c_tau,
            c_hat,
        } => commands::degiorgi(&mut out, &config, &snapshots, c_p, c_tau, c_hat),
        Command::Constants {
            config,
            delta,
            c_p,
            c_tau,
            c_hat,
            grad_j,
        } => commands::constants(&mut out, &config, delta, c_p, c_tau, c_hat, grad_j),
        Command::Lemma { c, b, eps, y0, n } => commands::lemma(&mut out, c, b, eps, y0, n),
        Command::PotentialCheck { config } => commands::potential_check(&mut out, &config),
    };
    // A closed pipe (e.g. `| head`) is not a failure of the command.
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_numerical() => fail("numerical", EXIT_NUMERICAL, &e.to_string()),
        Err(e) if e.is_io() => fail("io", EXIT_IO, &e.to_string()),
        Err(e @ Error::GridMismatch { .. }) => fail("io", EXIT_IO, &e.to_string()),
        Err(e) => fail("usage", EXIT_USAGE, &e.to_string()),
    }
}
