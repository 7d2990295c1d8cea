//! `twirlinv`: exact invariants, simulated randomized-measurement estimates,
//! Werner threshold sweeps and the self-test suite.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid state input, 3 numerical
//! failure (failed residual check or failing self-test).

mod commands;
mod output;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use output::Format;
use source::StateArgs;

#[derive(Debug, Parser)]
#[command(name = "twirlinv", version, about = "Local unitary invariants from randomized measurements")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "report")]
    format: Format,
    /// Worker threads for the outer loop (0 = one per core). Results do not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact invariants of a state and the criteria evaluated on them.
    Invariants {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
        order: u8,
    },
    /// Simulate the protocol, reconstruct the invariants, evaluate criteria.
    Estimate {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Werner-state criterion polynomials on a grid of p, plus thresholds.
    WernerSweep {
        /// Local dimension d of the [d, d] Werner family.
        #[arg(long)]
        d: usize,
        /// Number of grid points, including both ends.
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, default_value_t = 1.0)]
        p_max: f64,
        /// Highest criterion order to include (default: 3 when d >= 3).
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
        order: Option<u8>,
    },
    /// Weingarten identities, round trips and oracle agreement.
    Selftest {
        /// Add this to one Weingarten matrix entry (sensitivity check).
        #[arg(long, hide = true)]
        debug_perturb_w: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub order: u8,
    /// Outer-loop repetitions (independent local unitaries).
    #[arg(long, default_value_t = 1000)]
    pub unitaries: usize,
    /// Shots per repetition; 0 uses exact outcome probabilities.
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    #[arg(long, default_value_t = twirlinv::haar::DEFAULT_SEED)]
    pub seed: u64,
    /// Contiguous blocks of repetitions used for standard errors.
    #[arg(long, default_value_t = 32)]
    pub batches: usize,
    /// Products of empirical frequencies instead of distinct-shot tuples.
    /// Biased by O(1/shots).
    #[arg(long)]
    pub plug_in: bool,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn invalid_state(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<source::SourceError> for Failure {
    fn from(e: source::SourceError) -> Self {
        match e {
            source::SourceError::Usage(m) => Failure::usage(m),
            source::SourceError::Invalid(m) => Failure::invalid_state(m),
        }
    }
}

impl From<twirlinv::Error> for Failure {
    fn from(e: twirlinv::Error) -> Self {
        use twirlinv::Error as E;
        match e {
            E::Residual { .. } => Failure::numerical(e.to_string()),
            E::SingularWeingarten { d } => Failure::usage(format!(
                "order-3 reconstruction needs every local dimension >= 3 (got {d}): \
                 the third-order Weingarten matrix is singular at d = {d}"
            )),
            E::InvalidConfig(_) | E::InvalidParameter(_) | E::UnsupportedOrder(_) => {
                Failure::usage(e.to_string())
            }
            _ => Failure::numerical(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Invariants { state, order } => {
            let rho = source::resolve(&state)?;
            commands::invariants(&rho, order).map(|t| t.render(cli.format))
        }
        Command::Estimate { state, run } => {
            let rho = source::resolve(&state)?;
            commands::estimate(&rho, &run).map(|t| t.render(cli.format))
        }
        Command::WernerSweep {
            d,
            points,
            p_min,
            p_max,
            order,
        } => commands::werner_sweep(d, points, p_min, p_max, order).map(|t| t.render(cli.format)),
        Command::Selftest { debug_perturb_w } => {
            let (table, passed) = commands::selftest(debug_perturb_w);
            let text = table.render(cli.format);
            if passed {
                Ok(text)
            } else {
                emit(&cli.out, &text)?;
                Err(Failure::numerical("self-test failed"))
            }
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let out = cli.out.clone();
    match run(cli).and_then(|text| emit(&out, &text)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
