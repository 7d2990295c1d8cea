//! Multipartite density matrices and the trace-polynomial building blocks
//! (marginals, partial transposes, moments) used by the invariants.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::haar::RngStream;
use crate::{CMatrix, Complex64, Error, Result};

/// Largest tolerated `|rho_ij - conj(rho_ji)|`.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Largest tolerated `|Tr rho - 1|`.
pub const TRACE_TOL: f64 = 1e-9;
/// Smallest tolerated eigenvalue.
pub const PSD_TOL: f64 = 1e-9;

/// Ordered local dimensions of an N-partite system.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DimsProfile {
    dims: Vec<usize>,
}

impl DimsProfile {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidDims(dims));
        }
        Ok(Self { dims })
    }

    /// Zero parties, total dimension 1. Only produced by tracing out everything.
    pub fn trivial() -> Self {
        Self { dims: Vec::new() }
    }

    pub fn bipartite(d_a: usize, d_b: usize) -> Result<Self> {
        Self::new(vec![d_a, d_b])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self, party: usize) -> usize {
        self.dims[party]
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flattened-index stride of `party` (party 0 is slowest).
    pub fn stride(&self, party: usize) -> usize {
        self.dims[party + 1..].iter().product()
    }

    /// Local index of `party` inside the flattened multi-index.
    pub fn digit(&self, index: usize, party: usize) -> usize {
        (index / self.stride(party)) % self.dims[party]
    }

    /// Bit of `party` in a subset mask (party 0 is the most significant bit).
    pub fn party_bit(&self, party: usize) -> usize {
        1 << (self.parties() - 1 - party)
    }

    /// Number of subsets of parties, `2^N`.
    pub fn subsets(&self) -> usize {
        1 << self.parties()
    }

    /// Parties contained in a subset mask, in increasing order.
    pub fn members(&self, mask: usize) -> Vec<usize> {
        (0..self.parties())
            .filter(|&l| mask & self.party_bit(l) != 0)
            .collect()
    }

    /// Product of local dimensions over a subset mask.
    pub fn subset_total(&self, mask: usize) -> usize {
        self.members(mask).iter().map(|&l| self.dims[l]).product()
    }

    fn check_party(&self, party: usize) -> Result<()> {
        if party >= self.parties() {
            return Err(Error::InvalidSubsystem {
                index: party,
                parties: self.parties(),
            });
        }
        Ok(())
    }
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: DimsProfile,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn dims(&self) -> &DimsProfile {
        &self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Skips validation; callers guarantee the invariants hold.
    pub(crate) fn from_parts_unchecked(dims: DimsProfile, matrix: CMatrix) -> Self {
        Self { dims, matrix }
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        trace_power(&self.matrix, 2).expect("density matrices are square")
    }

    /// Marginal on the parties in `mask` (see [`DimsProfile::party_bit`]).
    pub fn marginal(&self, mask: usize) -> DensityMatrix {
        let keep = self.dims.members(mask);
        partial_trace(self, &keep).expect("members are valid parties")
    }
}

/// Validates `entries` as a density matrix on `dims`.
pub fn make_state(entries: CMatrix, dims: DimsProfile) -> Result<DensityMatrix> {
    if !entries.is_square() {
        return Err(Error::NonSquare {
            rows: entries.nrows(),
            cols: entries.ncols(),
        });
    }
    if entries.nrows() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: entries.nrows(),
        });
    }
    let deviation = hermiticity_deviation(&entries);
    if deviation > HERMITICITY_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let trace = entries.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::TraceViolation { trace });
    }
    let min_eigenvalue = min_hermitian_eigenvalue(&entries);
    if min_eigenvalue < -PSD_TOL {
        return Err(Error::NotPositive { min_eigenvalue });
    }
    Ok(DensityMatrix {
        dims,
        matrix: entries,
    })
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part is used.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)[0]
}

/// Reduced state on the parties listed in `keep` (0-based, any order, no
/// duplicates). An empty `keep` yields the 1x1 matrix `[Tr rho]`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    for (k, &l) in kept.iter().enumerate() {
        dims.check_party(l)?;
        if k > 0 && kept[k - 1] == l {
            return Err(Error::InvalidSubsystem {
                index: l,
                parties: dims.parties(),
            });
        }
    }
    let traced: Vec<usize> = (0..dims.parties()).filter(|l| !kept.contains(l)).collect();
    let kept_offsets = offsets(dims, &kept);
    let traced_offsets = offsets(dims, &traced);
    let n = kept_offsets.len();
    let mut out = CMatrix::zeros(n, n);
    for (r, &row) in kept_offsets.iter().enumerate() {
        for (c, &col) in kept_offsets.iter().enumerate() {
            out[(r, c)] = traced_offsets
                .iter()
                .map(|&t| rho.matrix[(row + t, col + t)])
                .sum();
        }
    }
    let out_dims = if kept.is_empty() {
        DimsProfile::trivial()
    } else {
        DimsProfile {
            dims: kept.iter().map(|&l| dims.dim(l)).collect(),
        }
    };
    Ok(DensityMatrix::from_parts_unchecked(out_dims, out))
}

/// Full-space offsets of every multi-index restricted to `parties`, enumerated
/// in the sub-system's own slowest-first order.
fn offsets(dims: &DimsProfile, parties: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &l in parties {
        let stride = dims.stride(l);
        out = out
            .iter()
            .flat_map(|&base| (0..dims.dim(l)).map(move |i| base + i * stride))
            .collect();
    }
    out
}

/// Transposes the indices of one subsystem. The result is Hermitian with unit
/// trace but may have negative eigenvalues, so it is returned as a bare matrix.
pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<CMatrix> {
    let dims = rho.dims();
    dims.check_party(subsystem)?;
    let stride = dims.stride(subsystem);
    let n = dims.total();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        let di = dims.digit(i, subsystem);
        let base_i = i - di * stride;
        for j in 0..n {
            let dj = dims.digit(j, subsystem);
            let base_j = j - dj * stride;
            out[(base_i + dj * stride, base_j + di * stride)] = rho.matrix[(i, j)];
        }
    }
    Ok(out)
}

/// `Tr(m^k)` including any imaginary part.
pub fn trace_power_complex(m: &CMatrix, k: usize) -> Result<Complex64> {
    if !m.is_square() {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidParameter("trace power needs k >= 1".into()));
    }
    let mut power = m.clone();
    for _ in 1..k {
        power = &power * m;
    }
    Ok(power.trace())
}

/// Real part of `Tr(m^k)`. For Hermitian input the discarded imaginary part
/// is at rounding level.
pub fn trace_power(m: &CMatrix, k: usize) -> Result<f64> {
    trace_power_complex(m, k).map(|t| t.re)
}

/// `p P_+ + (1 - p) I / d^2` with `P_+` the projector on `sum_i |ii> / sqrt(d)`.
///
/// The literature often calls this the isotropic state; the name follows the
/// usage of the criteria derived here.
pub fn werner_state(d: usize, p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "Werner weight p must lie in [0, 1], got {p}"
        )));
    }
    let dims = DimsProfile::bipartite(d, d)?;
    let n = d * d;
    let mut m = CMatrix::identity(n, n).scale((1.0 - p) / n as f64);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] += Complex64::new(p / d as f64, 0.0);
        }
    }
    make_state(m, dims)
}

/// Probability weights on the four Bell states `Phi+, Phi-, Psi+, Psi-`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellDiagonalSpectrum {
    lambdas: [f64; 4],
}

impl BellDiagonalSpectrum {
    pub fn new(lambdas: [f64; 4]) -> Result<Self> {
        if lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidSpectrum(format!(
                "weights must lie in [0, 1], got {lambdas:?}"
            )));
        }
        let sum: f64 = lambdas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpectrum(format!("weights sum to {sum}")));
        }
        Ok(Self { lambdas })
    }

    pub fn lambdas(&self) -> [f64; 4] {
        self.lambdas
    }
}

/// Two-qubit state diagonal in the Bell basis.
pub fn bell_diagonal(spec: &BellDiagonalSpectrum) -> DensityMatrix {
    let [l1, l2, l3, l4] = spec.lambdas;
    let c = |v: f64| Complex64::new(0.5 * v, 0.0);
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c(l1 + l2);
    m[(3, 3)] = c(l1 + l2);
    m[(0, 3)] = c(l1 - l2);
    m[(3, 0)] = c(l1 - l2);
    m[(1, 1)] = c(l3 + l4);
    m[(2, 2)] = c(l3 + l4);
    m[(1, 2)] = c(l3 - l4);
    m[(2, 1)] = c(l3 - l4);
    DensityMatrix::from_parts_unchecked(DimsProfile { dims: vec![2, 2] }, m)
}

pub fn maximally_mixed(dims: &DimsProfile) -> DensityMatrix {
    let n = dims.total();
    DensityMatrix::from_parts_unchecked(
        dims.clone(),
        CMatrix::identity(n, n).scale(1.0 / n as f64),
    )
}

/// `|psi><psi| / <psi|psi>`.
pub fn pure_state(psi: &[Complex64], dims: DimsProfile) -> Result<DensityMatrix> {
    if psi.len() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: psi.len(),
        });
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("zero state vector".into()));
    }
    let v = nalgebra::DVector::from_column_slice(psi);
    let m = (&v * v.adjoint()).scale(1.0 / norm);
    make_state(m, dims)
}

/// `sum_i |ii> / sqrt(d)` projector on `C^d (x) C^d`.
pub fn maximally_entangled(d: usize) -> Result<DensityMatrix> {
    let mut psi = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        psi[i * d + i] = Complex64::new(1.0, 0.0);
    }
    pure_state(&psi, DimsProfile::bipartite(d, d)?)
}

/// Tensor product of states, parties concatenated in order.
pub fn tensor(factors: &[&DensityMatrix]) -> DensityMatrix {
    let mut dims = Vec::new();
    let mut m = CMatrix::identity(1, 1);
    for f in factors {
        dims.extend_from_slice(f.dims.dims());
        m = m.kronecker(f.matrix());
    }
    DensityMatrix::from_parts_unchecked(DimsProfile { dims }, m)
}

/// `(U_1 (x) ... (x) U_N) rho (U_1 (x) ... (x) U_N)^dagger`.
pub fn conjugate_local(rho: &DensityMatrix, unitaries: &[CMatrix]) -> Result<DensityMatrix> {
    let u = local_product(rho.dims(), unitaries)?;
    let m = &u * rho.matrix() * u.adjoint();
    Ok(DensityMatrix::from_parts_unchecked(rho.dims.clone(), m))
}

/// Kronecker product of one unitary per party, checked against `dims`.
pub fn local_product(dims: &DimsProfile, unitaries: &[CMatrix]) -> Result<CMatrix> {
    if unitaries.len() != dims.parties() {
        return Err(Error::DimensionMismatch {
            expected: dims.parties(),
            found: unitaries.len(),
        });
    }
    let mut u = CMatrix::identity(1, 1);
    for (l, local) in unitaries.iter().enumerate() {
        if local.nrows() != dims.dim(l) || !local.is_square() {
            return Err(Error::DimensionMismatch {
                expected: dims.dim(l),
                found: local.nrows(),
            });
        }
        u = u.kronecker(local);
    }
    Ok(u)
}

/// `G G^dagger / Tr(G G^dagger)` for a complex Gaussian `total x rank` matrix `G`.
pub fn random_density(dims: &DimsProfile, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let total = dims.total();
    if rank == 0 || rank > total {
        return Err(Error::RankOutOfRange { rank, total });
    }
    let mut rng = RngStream::new(seed, 0).rng();
    let g = CMatrix::from_fn(total, rank, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let gg = &g * g.adjoint();
    let gg = (&gg + gg.adjoint()).scale(0.5);
    let tr = gg.trace().re;
    Ok(DensityMatrix::from_parts_unchecked(
        dims.clone(),
        gg.scale(1.0 / tr),
    ))
}

/// Convex mixture of `terms` random product states with random weights.
pub fn random_separable(dims: &DimsProfile, terms: usize, seed: u64) -> Result<DensityMatrix> {
    if terms == 0 {
        return Err(Error::InvalidParameter("need at least one product term".into()));
    }
    let mut rng = RngStream::new(seed, u64::MAX).rng();
    let n = dims.total();
    let mut acc = CMatrix::zeros(n, n);
    let mut weight_sum = 0.0;
    for t in 0..terms {
        let mut factors = Vec::with_capacity(dims.parties());
        for (l, &d) in dims.dims().iter().enumerate() {
            let rank = rng.random_range(1..=d);
            let local = DimsProfile::new(vec![d])?;
            let stream_seed = seed ^ ((t as u64) << 32 | l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            factors.push(random_density(&local, rank, stream_seed)?);
        }
        let refs: Vec<&DensityMatrix> = factors.iter().collect();
        let w: f64 = rng.random_range(0.05..1.0);
        weight_sum += w;
        acc += tensor(&refs).matrix().scale(w);
    }
    let acc = acc.scale(1.0 / weight_sum);
    Ok(DensityMatrix::from_parts_unchecked(dims.clone(), acc))
}
