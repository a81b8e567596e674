//! The `rank-recur` command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | file could not be read or written |
//! | 2 | bad command line |
//! | 3 | system file does not parse or does not describe a valid system |
//! | 4 | system is not certified contractive (and `--force` was not given) |
//! | 5 | non-finite or undefined value during iteration |
//! | 6 | no period detected, or the solver did not converge |
//! | 7 | a check failed (verify, shift check, closed-form discrepancy) |
//! | 8 | closed form not available for this system shape |

mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DEFINITION: u8 = 3;
pub const EXIT_CERTIFICATION: u8 = 4;
pub const EXIT_NUMERIC: u8 = 5;
pub const EXIT_DETECTION: u8 = 6;
pub const EXIT_CHECK: u8 = 7;
pub const EXIT_UNSUPPORTED: u8 = 8;

/// Overrides the default of every `--tol` flag.
pub const TOL_ENV: &str = "RANK_RECUR_DEFAULT_TOL";

#[derive(Debug, Parser)]
#[command(name = "rank-recur", version, about = "Periodically forced rank-type recurrences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate the recurrence and detect the asymptotic period.
    Simulate(SimulateArgs),
    /// Solve the block-map fixed point and extract the periodic orbit.
    Solve(SolveArgs),
    /// Compare an explicit limit formula with the solver and a simulation.
    ClosedForm(ClosedFormArgs),
    /// Run the randomized property suites, or a battery against one system.
    Verify(VerifyArgs),
    /// Report Lipschitz certificates for every function of a system.
    Lipschitz(LipschitzArgs),
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// System definition file (TOML).
    #[arg(long, value_name = "FILE")]
    system: PathBuf,
    /// Seed for every random choice; recorded in the report.
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Directory for the report and any data files.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Initial values x_1..x_M.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "seeds")]
    seed_values: Option<Vec<f64>>,
    /// Number of random initial conditions drawn uniformly from the domain.
    #[arg(long, value_name = "COUNT")]
    seeds: Option<usize>,
    /// Trajectory length N, initial values included.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Period detection tolerance [default: 1e-9].
    #[arg(long)]
    tol: Option<f64>,
    /// Largest period tried [default: 4 P].
    #[arg(long)]
    pmax: Option<usize>,
    /// Run systems that are not certified contractive.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Initial values x_1..x_M; the solver starts from their first block.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    seed_values: Option<Vec<f64>>,
    /// Sup-norm stopping tolerance [default: 1e-12].
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = crate::block_map::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ClosedFormArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Largest accepted discrepancy [default: 1e-9].
    #[arg(long)]
    tol: Option<f64>,
    /// Length of the cross-check simulation.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run only the named suite; repeatable.
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,
    /// Run the per-system battery on this file instead of the suites.
    #[arg(long, value_name = "FILE", conflicts_with = "suites")]
    system: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Shrink every sample count tenfold.
    #[arg(long)]
    quick: bool,
    /// Print the suite names and exit.
    #[arg(long)]
    list: bool,
    /// Initial values for the per-system battery.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "system")]
    seed_values: Option<Vec<f64>>,
    /// Trajectory length for the per-system battery.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LipschitzArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Derivative grid size; overrides the file.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Multiplier on sampled derivative maxima; overrides the file.
    #[arg(long)]
    safety_factor: Option<f64>,
    /// Pair count for block updates; overrides the file.
    #[arg(long)]
    pairs: Option<usize>,
}

/// A failed run: exit code plus a message naming the stage.
#[derive(Debug)]
pub(crate) struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn new(code: u8, msg: impl Into<String>) -> Self {
        Failure {
            code,
            msg: msg.into(),
        }
    }

    /// Classifies a library error raised in `stage`.
    pub fn at(stage: &str, e: Error) -> Self {
        let code = match &e {
            Error::Argument(_) => EXIT_USAGE,
            Error::Parse(_) | Error::Definition(_) => EXIT_DEFINITION,
            Error::NotContractive { .. } | Error::Sampling { .. } => EXIT_CERTIFICATION,
            Error::NonFinite { .. }
            | Error::Eval(_)
            | Error::BlockEval { .. }
            | Error::Simulation { .. } => EXIT_NUMERIC,
            Error::NoConvergence { .. } => EXIT_DETECTION,
            Error::Precondition(_) => EXIT_CHECK,
            Error::Unsupported(_) => EXIT_UNSUPPORTED,
        };
        Failure::new(code, format!("{stage}: {e}"))
    }
}

pub(crate) type CmdResult = std::result::Result<u8, Failure>;

/// Parses `args` (program name first) and runs the command, writing the
/// human summary to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let res = match cli.command {
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Solve(a) => commands::solve(a, out),
        Command::ClosedForm(a) => commands::closed_form(a, out),
        Command::Verify(a) => commands::verify(a, out),
        Command::Lipschitz(a) => commands::lipschitz(a, out),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}

pub fn main() -> std::process::ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::ExitCode::from(code)
}
