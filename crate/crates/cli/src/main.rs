//! `lqr-landscape`: batch front end for the LQR solvers, certificates and
//! landscape studies. Every run writes `manifest.json` and stamps its hash
//! into each output file.
//!
//! Exit codes: 0 ok, 1 input, 2 assumption, 3 numerical, 4 acceptance.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lqr_core::LqrError;

#[derive(Debug, Parser)]
#[command(
    name = "lqr-landscape",
    version,
    about = "LQR policy-optimization landscape toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Instance selection and shared output flags.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in instance name (shorthand for --builtin).
    #[arg(value_name = "BUILTIN", conflicts_with_all = ["instance", "builtin"])]
    pub name: Option<String>,
    /// JSON instance file.
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    pub instance: Option<PathBuf>,
    /// Built-in instance: single-integrator, example-3-1, example-4-3, example-5-1.
    #[arg(long, value_name = "NAME")]
    pub builtin: Option<String>,
    /// Coupling `a` of the two-state built-ins.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Output directory.
    #[arg(long, default_value = "lqr-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance override (meaning depends on the subcommand).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Riccati solution: K*, P*, J* and residuals.
    Solve(Common),
    /// Duality certificate bundle; `--tol` scales the gap and slackness bounds (default 1e-7).
    Certify {
        #[command(flatten)]
        common: Common,
        /// Certify random plants instead: `--random n=4 m=2 seeds=100`.
        #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
        random: Option<Vec<String>>,
    },
    /// Cost over a grid of gains, written to grid.csv.
    Landscape {
        #[command(flatten)]
        common: Common,
        /// `full` (raw gain entries) or `b=VALUE` for K = [k, -b-k].
        #[arg(long, default_value = "full")]
        slice: String,
        /// First coordinate as `lo:hi:count`.
        #[arg(long, allow_hyphen_values = true)]
        k1: Option<String>,
        /// Second coordinate as `lo:hi:count` (full slice of a 2-entry gain).
        #[arg(long, allow_hyphen_values = true)]
        k2: Option<String>,
    },
    /// Gradient descent on J; `--tol` is the gradient-norm stopping tolerance.
    Pgd {
        #[command(flatten)]
        common: Common,
        /// Initial gain, row-major: `-0.5` or `1,2;3,4`. Defaults to a stabilizing gain.
        #[arg(long, allow_hyphen_values = true)]
        k0: Option<String>,
        /// `auto` (1/L) or a fixed step.
        #[arg(long, default_value = "auto")]
        step: String,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        /// Sublevel samples for the smoothness and PL estimates.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Gradient-dominance constants and sampled checks over {J <= nu-mult * J*}.
    Pl {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2.0)]
        nu_mult: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Closed-loop trajectory, its Gramian and the optimality sandwich; `--tol` is the V_sdp membership tolerance.
    Gramian {
        #[command(flatten)]
        common: Common,
        /// Gain, row-major. Defaults to K*.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<String>,
        /// Initial state, comma-separated. Defaults to the instance's x0, else a seeded random unit vector.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
        /// Horizon; chosen from the closed-loop decay when absent.
        #[arg(long)]
        horizon: Option<f64>,
        /// Step for a fixed horizon.
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
    },
    /// Run the built-in example checks and print a pass/fail table.
    Examples {
        #[command(flatten)]
        run: RunFlags,
        /// Restrict to modules or check names (comma-separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

/// A run finished but its pass/fail verdict was negative.
#[derive(Debug)]
pub struct AcceptanceFailure(pub String);

impl std::fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AcceptanceFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AcceptanceFailure>().is_some() {
        return 4;
    }
    match err.downcast_ref::<LqrError>() {
        Some(LqrError::Dimension(_) | LqrError::InvalidInput(_) | LqrError::Parameter(_)) => 1,
        Some(LqrError::Assumption(_)) => 2,
        Some(_) => 3,
        None => 1,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("LQR_LANDSCAPE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        anyhow::anyhow!("LQR_LANDSCAPE_THREADS must be a positive integer, got '{raw}'")
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Solve(c) => commands::solve(&c),
        Command::Certify { common, random } => commands::certify(&common, random.as_deref()),
        Command::Landscape {
            common,
            slice,
            k1,
            k2,
        } => commands::landscape(&common, &slice, k1.as_deref(), k2.as_deref()),
        Command::Pgd {
            common,
            k0,
            step,
            iters,
            samples,
        } => commands::pgd(&common, k0.as_deref(), &step, iters, samples),
        Command::Pl {
            common,
            nu_mult,
            samples,
        } => commands::pl(&common, nu_mult, samples),
        Command::Gramian {
            common,
            k,
            x0,
            horizon,
            dt,
        } => commands::gramian(&common, k.as_deref(), x0.as_deref(), horizon, dt),
        Command::Examples { run, only } => commands::examples(&run, &only),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
