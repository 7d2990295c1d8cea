//! Local unitary invariants of multipartite density matrices reconstructed
//! from randomized measurements, and the separability criteria built on them.
//!
//! The crate is organised bottom-up:
//!
//! - [`states`]: density matrices, partial traces and transposes, test states.
//! - [`haar`]: seedable Haar-random unitaries on independent substreams.
//! - [`weingarten`]: permutations of S2/S3, Weingarten values, the equality
//!   (`S`) and Weingarten (`W`) matrices and the diagram-contraction oracle.
//! - [`twirl`]: the inner/outer measurement loops producing the measurable
//!   `y` statistics at orders 2 and 3.
//! - [`reconstruct`]: forward maps `y = M x` and their inverses.
//! - [`criteria`]: the purity criterion, the third-order reduction-map
//!   criterion, and the analytic Werner / Bell-diagonal thresholds.
//! - [`statefile`]: the JSON state file format read by the CLI.
//! - [`selftest`]: the consistency suite behind `twirlinv selftest`.
//!
//! Multi-indices are flattened with subsystem 1 slowest:
//! `index = sum_l i_l * stride_l`, `stride_l = prod_{m > l} d_m`. Subsets of
//! parties use the same convention as bit masks, party 1 being the most
//! significant bit, so a bipartite purity vector reads
//! `(1, Tr rho_B^2, Tr rho_A^2, Tr rho^2)`.

#![forbid(unsafe_code)]

pub mod criteria;
mod error;
pub mod haar;
pub mod reconstruct;
pub mod selftest;
pub mod statefile;
pub mod states;
mod sum;
pub mod twirl;
pub mod weingarten;

pub use error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
pub use num_complex::Complex64;
