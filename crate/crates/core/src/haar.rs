//! Haar-random unitaries on reproducible, independent random substreams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, Complex64, Error, Result};

/// Master seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 0x005E_ED0F_7A1D;

/// One substream of a master seed. Streams with distinct indices are
/// independent ChaCha keystreams; the same pair always replays the same draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Draws a `d x d` Haar unitary from `stream`.
pub fn sample_haar(d: usize, stream: RngStream) -> Result<CMatrix> {
    let mut rng = stream.rng();
    sample_haar_with(d, &mut rng)
}

/// QR of a complex Ginibre matrix with the phases of `R`'s diagonal moved
/// into `Q`; without that correction the distribution is not Haar.
pub fn sample_haar_with<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<CMatrix> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "Haar sampling needs d >= 2, got {d}"
        )));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal) * scale,
            rng.sample::<f64, _>(StandardNormal) * scale,
        )
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let norm = rjj.norm();
        let phase = if norm > 0.0 {
            rjj / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// `max |(U^dagger U - I)_ij|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u - CMatrix::identity(n, n);
    g.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
