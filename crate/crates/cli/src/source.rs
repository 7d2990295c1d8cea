//! Resolves `--state FILE` or `--builtin NAME --params ...` into a state.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use twirlinv::states::{
    bell_diagonal, maximally_entangled, maximally_mixed, random_density, random_separable,
    werner_state, BellDiagonalSpectrum, DensityMatrix, DimsProfile,
};
use twirlinv::statefile::read_state;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// p P_+ + (1 - p) I / d^2 on [d, d]; params: p.
    Werner,
    /// Two-qubit mixture of Bell projectors; params: l1,l2,l3,l4.
    BellDiagonal,
    /// I / total on --dims.
    MaximallyMixed,
    /// Maximally entangled pure state on [d, d].
    MaximallyEntangled,
    /// Random density matrix on --dims; params: rank (default full). Uses --state-seed.
    Random,
    /// Mixture of random product states on --dims; params: terms (default 3).
    Separable,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// JSON state file with `dims` and `matrix`.
    #[arg(long, value_name = "FILE", conflicts_with = "builtin")]
    pub state: Option<PathBuf>,
    /// Built-in state generator.
    #[arg(long, value_enum, value_name = "NAME")]
    pub builtin: Option<Builtin>,
    /// Comma-separated numeric parameters of the builtin.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub params: Vec<f64>,
    /// Local dimensions, e.g. 3,3.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Seed for the random builtins.
    #[arg(long, default_value_t = 1)]
    pub state_seed: u64,
}

/// Why a state could not be produced.
#[derive(Debug)]
pub enum SourceError {
    /// Missing or inconsistent flags.
    Usage(String),
    /// The state itself is invalid or unreadable.
    Invalid(String),
}

fn param(args: &StateArgs, k: usize, name: &str) -> Result<f64, SourceError> {
    args.params
        .get(k)
        .copied()
        .ok_or_else(|| SourceError::Usage(format!("builtin needs --params {name}")))
}

fn local_dim(dims: &Option<Vec<usize>>, fallback: usize) -> Result<usize, SourceError> {
    match dims.as_deref() {
        None => Ok(fallback),
        Some([a, b]) if a == b => Ok(*a),
        Some(other) => Err(SourceError::Usage(format!(
            "this builtin needs --dims d,d, got {other:?}"
        ))),
    }
}

fn profile(dims: &Option<Vec<usize>>) -> Result<DimsProfile, SourceError> {
    let dims = dims
        .clone()
        .ok_or_else(|| SourceError::Usage("this builtin needs --dims".into()))?;
    DimsProfile::new(dims).map_err(|e| SourceError::Invalid(e.to_string()))
}

pub fn resolve(args: &StateArgs) -> Result<DensityMatrix, SourceError> {
    let invalid = |e: twirlinv::Error| SourceError::Invalid(e.to_string());
    if let Some(path) = &args.state {
        let rho = read_state(path).map_err(invalid)?;
        if let Some(dims) = &args.dims {
            if rho.dims().dims() != dims.as_slice() {
                return Err(SourceError::Invalid(format!(
                    "state file has dims {:?}, --dims says {dims:?}",
                    rho.dims().dims()
                )));
            }
        }
        return Ok(rho);
    }
    let builtin = args
        .builtin
        .ok_or_else(|| SourceError::Usage("give --state FILE or --builtin NAME".into()))?;
    match builtin {
        Builtin::Werner => {
            let d = local_dim(&args.dims, 2)?;
            werner_state(d, param(args, 0, "p")?).map_err(invalid)
        }
        Builtin::BellDiagonal => {
            if let Some(d) = &args.dims {
                if d.as_slice() != [2, 2] {
                    return Err(SourceError::Usage("bell-diagonal states live on --dims 2,2".into()));
                }
            }
            if args.params.len() != 4 {
                return Err(SourceError::Usage("bell-diagonal needs --params l1,l2,l3,l4".into()));
            }
            let l = [args.params[0], args.params[1], args.params[2], args.params[3]];
            let spec = BellDiagonalSpectrum::new(l).map_err(invalid)?;
            Ok(bell_diagonal(&spec))
        }
        Builtin::MaximallyMixed => Ok(maximally_mixed(&profile(&args.dims)?)),
        Builtin::MaximallyEntangled => {
            maximally_entangled(local_dim(&args.dims, 2)?).map_err(invalid)
        }
        Builtin::Random => {
            let dims = profile(&args.dims)?;
            let rank = match args.params.first() {
                Some(&r) => as_count(r, "rank")?,
                None => dims.total(),
            };
            random_density(&dims, rank, args.state_seed).map_err(invalid)
        }
        Builtin::Separable => {
            let dims = profile(&args.dims)?;
            let terms = match args.params.first() {
                Some(&t) => as_count(t, "terms")?,
                None => 3,
            };
            random_separable(&dims, terms, args.state_seed).map_err(invalid)
        }
    }
}

fn as_count(v: f64, name: &str) -> Result<usize, SourceError> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(SourceError::Usage(format!("{name} must be a positive integer, got {v}")))
    }
}
