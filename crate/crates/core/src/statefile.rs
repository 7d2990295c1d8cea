//! JSON state files.
//!
//! ```json
//! { "dims": [2, 2],
//!   "matrix": [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0], ...] }
//! ```
//!
//! `matrix` holds `total * total` entries `[re, im]` in row-major order,
//! either as one flat list or as a list of `total` rows. The matrix must be a
//! valid density matrix on `dims` (see [`crate::states::make_state`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::states::{make_state, DensityMatrix, DimsProfile};
use crate::{CMatrix, Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub matrix: MatrixEntries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixEntries {
    Flat(Vec<[f64; 2]>),
    Rows(Vec<Vec<[f64; 2]>>),
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let n = m.nrows();
        let entries = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| [m[(r, c)].re, m[(r, c)].im])
            .collect();
        Self {
            dims: rho.dims().dims().to_vec(),
            matrix: MatrixEntries::Flat(entries),
        }
    }

    pub fn into_state(self) -> Result<DensityMatrix> {
        let dims = DimsProfile::new(self.dims)?;
        let total = dims.total();
        let flat: Vec<[f64; 2]> = match self.matrix {
            MatrixEntries::Flat(v) => v,
            MatrixEntries::Rows(rows) => {
                if rows.len() != total {
                    return Err(Error::DimensionMismatch {
                        expected: total,
                        found: rows.len(),
                    });
                }
                if let Some(bad) = rows.iter().find(|r| r.len() != total) {
                    return Err(Error::NonSquare {
                        rows: total,
                        cols: bad.len(),
                    });
                }
                rows.into_iter().flatten().collect()
            }
        };
        if flat.len() != total * total {
            return Err(Error::DimensionMismatch {
                expected: total * total,
                found: flat.len(),
            });
        }
        if flat.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::StateFile("non-finite matrix entry".into()));
        }
        let m = CMatrix::from_row_iterator(
            total,
            total,
            flat.iter().map(|[re, im]| Complex64::new(*re, *im)),
        );
        make_state(m, dims)
    }
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let file: StateFile =
        serde_json::from_str(text).map_err(|e| Error::StateFile(e.to_string()))?;
    file.into_state()
}

pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::StateFile(format!("{}: {e}", path.display())))?;
    parse_state(&text)
}

/// Compact JSON; floats are written with shortest round-trip precision.
pub fn to_json(rho: &DensityMatrix) -> String {
    serde_json::to_string(&StateFile::from_state(rho)).expect("plain data serializes")
}
