//! Forward maps `y = M x` between local invariants and twirl statistics, and
//! their inverses.
//!
//! Order 2 works for any number of parties and local dimensions. The map is
//! a tensor product over parties of `[1 1; d -1]` acting on class sums of
//! `y`, so inversion never needs a generic solver.
//!
//! Order 3 is bipartite with `d_A, d_B >= 3`. The eleven invariants are the
//! contractions of `rho^{(x)3}` indexed by pairs of permutations
//! `(tau_A, tau_B)`:
//!
//! | k  | invariant                        | k  | invariant                        |
//! |----|----------------------------------|----|----------------------------------|
//! | 0  | `(Tr rho)^3`                     | 6  | `Tr(Tr_A(rho^2) rho_B)`          |
//! | 1  | `Tr rho_B^2 Tr rho`              | 7  | `Tr rho_A^3`                     |
//! | 2  | `Tr rho_B^3`                     | 8  | `Tr(Tr_B(rho^2) rho_A)`          |
//! | 3  | `Tr rho_A^2 Tr rho`              | 9  | `Tr rho^3`                       |
//! | 4  | `Tr((rho_A (x) rho_B) rho)`      | 10 | `Tr (rho^Gamma)^3`               |
//! | 5  | `Tr rho^2 Tr rho`                |    |                                  |
//!
//! `x9` comes from equal three-cycles on both sides and `x10` from mutually
//! inverse ones. The measurable statistics only see `x_S = (x9 + x10) / 2`.

use nalgebra::{DMatrix, DVector};

use crate::states::{
    partial_trace, partial_transpose, trace_power, DensityMatrix, DimsProfile,
};
use crate::twirl::{y3_component, YVector2, YVector3};
use crate::weingarten::{diagram_contract, s_matrix, symmetric_group, w_matrix};
use crate::{CMatrix, Error, Result};

/// Residual `max |forward(x_hat) - y|` above which an inversion is rejected.
pub const RESIDUAL_LIMIT: f64 = 1e-6;

/// Marginal purities `Tr rho_P^2` indexed by subset mask `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct XVector2 {
    pub dims: DimsProfile,
    pub purities: Vec<f64>,
}

impl XVector2 {
    /// Exact purities of every marginal.
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let dims = rho.dims().clone();
        let purities = (0..dims.subsets())
            .map(|p| if p == 0 { 1.0 } else { rho.marginal(p).purity() })
            .collect();
        Self { dims, purities }
    }

    pub fn purity(&self, mask: usize) -> f64 {
        self.purities[mask]
    }

    /// `Tr rho^2` of the whole state.
    pub fn global(&self) -> f64 {
        self.purities[self.dims.subsets() - 1]
    }
}

/// `S W` at order 2 for one party: rows (equal, distinct), columns (e, (12)).
fn sw2(d: usize) -> Result<DMatrix<f64>> {
    Ok(s_matrix(2)? * w_matrix(2, d)?)
}

/// Expected order-2 statistics. On a party the diagram for the identity is
/// `Tr rho_P` with that party traced out, the transposition keeps it.
pub fn forward_2(x: &XVector2) -> Result<YVector2> {
    let dims = &x.dims;
    let n = dims.parties();
    let sws: Vec<DMatrix<f64>> =
        dims.dims().iter().map(|&d| sw2(d)).collect::<Result<_>>()?;
    let values = (0..dims.subsets())
        .map(|q| {
            (0..dims.subsets())
                .map(|p| {
                    let weight: f64 = (0..n)
                        .map(|l| {
                            let bit = dims.party_bit(l);
                            let row = usize::from(q & bit != 0);
                            let col = usize::from(p & bit != 0);
                            sws[l][(row, col)]
                        })
                        .product();
                    weight * x.purities[p]
                })
                .sum()
        })
        .collect();
    Ok(YVector2 {
        dims: dims.clone(),
        values,
    })
}

/// Purities from order-2 statistics: `x = (⊗_l [1 1; d_l -1]) T` with `T`
/// the class sums of `y`.
pub fn invert_2(y: &YVector2) -> Result<XVector2> {
    let dims = &y.dims;
    if y.values.len() != dims.subsets() {
        return Err(Error::DimensionMismatch {
            expected: dims.subsets(),
            found: y.values.len(),
        });
    }
    let mut kron = DMatrix::from_element(1, 1, 1.0);
    for &d in dims.dims() {
        let factor = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, d as f64, -1.0]);
        kron = kron.kronecker(&factor);
    }
    let sums = DVector::from_vec(y.class_sums());
    let x = kron * sums;
    Ok(XVector2 {
        dims: dims.clone(),
        purities: x.iter().copied().collect(),
    })
}

/// `Tr rho_P^2 = prod_{l in P} d_l * sum_Q prod_{l in P & Q} (-1/d_l) T(Q)`.
pub fn purity_marginal(y: &YVector2, p: usize) -> Result<f64> {
    let dims = &y.dims;
    if p >= dims.subsets() {
        return Err(Error::InvalidSubsystem {
            index: p,
            parties: dims.parties(),
        });
    }
    let members = dims.members(p);
    let scale: f64 = members.iter().map(|&l| dims.dim(l) as f64).product();
    let sums = y.class_sums();
    let total: f64 = sums
        .iter()
        .enumerate()
        .map(|(q, t)| {
            let sign: f64 = members
                .iter()
                .filter(|&&l| q & dims.party_bit(l) != 0)
                .map(|&l| -1.0 / dims.dim(l) as f64)
                .product();
            sign * t
        })
        .sum();
    Ok(scale * total)
}

/// Equal-dimension form
/// `Tr rho_P^2 = d^{|P|} sum_{I1, I2} (-d)^{-D(I1, I2)} <p_P(I1) p_P(I2)>`
/// over marginal outcome pairs on `P`, `D` the Hamming distance.
pub fn purity_marginal_hamming(y: &YVector2, p: usize) -> Result<f64> {
    let dims = &y.dims;
    let d = dims.dim(0);
    if dims.dims().iter().any(|&dl| dl != d) {
        return Err(Error::InvalidDims(dims.dims().to_vec()));
    }
    if p >= dims.subsets() {
        return Err(Error::InvalidSubsystem {
            index: p,
            parties: dims.parties(),
        });
    }
    let members = dims.members(p);
    let outside = (dims.subsets() - 1) & !p;
    let df = d as f64;
    let k = members.len();
    let marginal_outcomes = d.pow(k as u32);
    let mut acc = 0.0;
    for i1 in 0..marginal_outcomes {
        for i2 in 0..marginal_outcomes {
            // difference set of the marginal pair, as a subset of P
            let mut differ = 0usize;
            let (mut a, mut b) = (i1, i2);
            for &l in members.iter().rev() {
                if a % d != b % d {
                    differ |= dims.party_bit(l);
                }
                a /= d;
                b /= d;
            }
            // expected product of marginal probabilities: sum over full-index
            // completions outside P, grouped by their difference set
            let mut r = outside;
            let mut expected = 0.0;
            loop {
                expected += pairs_with_difference(dims, outside, r) * y.values[differ | r];
                if r == 0 {
                    break;
                }
                r = (r - 1) & outside;
            }
            let hamming = differ.count_ones() as i32;
            acc += (-df).powi(-hamming) * expected;
        }
    }
    Ok(df.powi(k as i32) * acc)
}

/// Ordered index pairs on the parties of `within` whose difference set is
/// exactly `r` (a subset of `within`).
fn pairs_with_difference(dims: &DimsProfile, within: usize, r: usize) -> f64 {
    dims.members(within)
        .iter()
        .map(|&l| {
            let d = dims.dim(l) as f64;
            if r & dims.party_bit(l) != 0 {
                d * (d - 1.0)
            } else {
                d
            }
        })
        .product()
}

/// The eleven order-3 invariants. Reconstruction from `y` yields only
/// `x_S`, so the individual `x9, x10` are present only for exact inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XVector3 {
    /// `x0..x8`.
    pub head: [f64; 9],
    pub x_s: f64,
    pub split: Option<(f64, f64)>,
}

impl XVector3 {
    pub fn from_values(values: [f64; 11]) -> Self {
        let mut head = [0.0; 9];
        head.copy_from_slice(&values[..9]);
        Self {
            head,
            x_s: 0.5 * (values[9] + values[10]),
            split: Some((values[9], values[10])),
        }
    }

    /// Closed-form trace expressions (see the module table).
    pub fn from_traces(rho: &DensityMatrix) -> Result<Self> {
        let dims = rho.dims();
        if dims.parties() != 2 {
            return Err(Error::InvalidParameter(format!(
                "order-3 invariants need a bipartite state, got {} parties",
                dims.parties()
            )));
        }
        let m = rho.matrix();
        let tr = m.trace().re;
        let rho_a = partial_trace(rho, &[0])?;
        let rho_b = partial_trace(rho, &[1])?;
        let sq = DensityMatrix::from_parts_unchecked(dims.clone(), m * m);
        // Tr_B(rho^2) lives on A, Tr_A(rho^2) on B
        let sq_on_a = partial_trace(&sq, &[0])?;
        let sq_on_b = partial_trace(&sq, &[1])?;
        let real_trace = |z: CMatrix| z.trace().re;
        let product = rho_a.matrix().kronecker(rho_b.matrix());
        let pt = partial_transpose(rho, 1)?;
        Ok(Self::from_values([
            tr * tr * tr,
            rho_b.purity() * tr,
            trace_power(rho_b.matrix(), 3)?,
            rho_a.purity() * tr,
            real_trace(&product * m),
            trace_power(m, 2)? * tr,
            real_trace(sq_on_b.matrix() * rho_b.matrix()),
            trace_power(rho_a.matrix(), 3)?,
            real_trace(sq_on_a.matrix() * rho_a.matrix()),
            trace_power(m, 3)?,
            trace_power(&pt, 3)?,
        ]))
    }

    /// The same invariants by direct contraction of three copies of `rho`.
    pub fn from_diagrams(rho: &DensityMatrix) -> Result<Self> {
        let group = symmetric_group(3)?;
        let mut values = [0.0; 11];
        for (k, &(i, j)) in REPRESENTATIVES.iter().enumerate() {
            values[k] = diagram_contract(rho, &group[i], &group[j])?;
        }
        Ok(Self::from_values(values))
    }

    /// `x0..x8` followed by `x_S`.
    pub fn reduced(&self) -> [f64; 10] {
        let mut out = [0.0; 10];
        out[..9].copy_from_slice(&self.head);
        out[9] = self.x_s;
        out
    }

    pub fn delta(&self) -> f64 {
        self.head[4] - self.head[5]
    }

    /// `Tr rho^3 + Tr (rho^Gamma)^3`.
    pub fn x9_plus_x10(&self) -> f64 {
        2.0 * self.x_s
    }
}

/// One `(tau_A, tau_B)` pair per invariant, as indices into
/// [`symmetric_group`]`(3)`.
pub const REPRESENTATIVES: [(usize, usize); 11] = [
    (0, 0),
    (0, 1),
    (0, 4),
    (1, 0),
    (1, 2),
    (1, 1),
    (1, 4),
    (4, 0),
    (4, 1),
    (4, 4),
    (4, 5),
];

/// Invariant index of the contraction `(tau_A, tau_B)`.
pub fn invariant_of(tau_a: usize, tau_b: usize) -> usize {
    let class = |t: usize| match t {
        0 => 0,
        1..=3 => 1,
        _ => 2,
    };
    match (class(tau_a), class(tau_b)) {
        (0, cb) => cb,
        (1, 0) => 3,
        (1, 1) => {
            if tau_a == tau_b {
                5
            } else {
                4
            }
        }
        (1, _) => 6,
        (_, 0) => 7,
        (_, 1) => 8,
        _ => {
            if tau_a == tau_b {
                9
            } else {
                10
            }
        }
    }
}

/// Pattern codes `(code_A, code_B)` representing each [`YVector3`] component.
const ROW_CODES: [(usize, usize); 10] = [
    (0, 0),
    (0, 1),
    (0, 4),
    (1, 0),
    (1, 1),
    (1, 2),
    (1, 4),
    (4, 0),
    (4, 1),
    (4, 4),
];

/// Weingarten coefficients of one subsystem and the combinations built
/// from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideCoefficients {
    /// `Wg(e, d)`.
    pub i: f64,
    /// `Wg((12), d)`.
    pub t: f64,
    /// `Wg((123), d)`.
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub f: f64,
}

impl SideCoefficients {
    pub fn new(d: usize) -> Result<Self> {
        let w = w_matrix(3, d)?;
        let (i, t, c) = (w[(0, 0)], w[(0, 1)], w[(0, 4)]);
        let a = t + i;
        let b = c + t;
        Ok(Self {
            i,
            t,
            c,
            a,
            b,
            f: a + 2.0 * b,
        })
    }
}

/// The order-3 forward model for given local dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel3 {
    pub d_a: usize,
    pub d_b: usize,
    pub side_a: SideCoefficients,
    pub side_b: SideCoefficients,
    pub eps1: f64,
    pub eps2: f64,
    /// `y4 - y5 = eta (x4 - x5)`.
    pub eta: f64,
    /// 10 x 11 map onto all eleven invariants.
    pub full: DMatrix<f64>,
    /// 10 x 10 map onto `(x0..x8, x_S)`.
    pub matrix: DMatrix<f64>,
}

impl ForwardModel3 {
    pub fn new(d_a: usize, d_b: usize) -> Result<Self> {
        for d in [d_a, d_b] {
            if d < 3 {
                return Err(Error::SingularWeingarten { d });
            }
        }
        let sw_a = s_matrix(3)? * w_matrix(3, d_a)?;
        let sw_b = s_matrix(3)? * w_matrix(3, d_b)?;
        let mut full = DMatrix::zeros(10, 11);
        for (r, &(ga, gb)) in ROW_CODES.iter().enumerate() {
            debug_assert_eq!(y3_component(ga, gb), r);
            for ta in 0..6 {
                for tb in 0..6 {
                    full[(r, invariant_of(ta, tb))] += sw_a[(ga, ta)] * sw_b[(gb, tb)];
                }
            }
        }
        let mut matrix = full.columns(0, 10).into_owned();
        for r in 0..10 {
            matrix[(r, 9)] += full[(r, 10)];
        }
        let side_a = SideCoefficients::new(d_a)?;
        let side_b = SideCoefficients::new(d_b)?;
        Ok(Self {
            d_a,
            d_b,
            side_a,
            side_b,
            eps1: 2.0 * side_a.b * side_b.b + (side_a.a + side_b.a) * (side_a.b + side_b.b),
            eps2: side_a.a * side_b.a + side_a.b * side_b.b,
            eta: (side_a.b - side_a.a) * (side_b.a - side_b.b),
            full,
            matrix,
        })
    }

    pub fn forward(&self, x: &XVector3) -> YVector3 {
        let xr = x.reduced();
        let mut values = [0.0; 10];
        for (r, v) in values.iter_mut().enumerate() {
            *v = (0..10).map(|c| self.matrix[(r, c)] * xr[c]).sum();
        }
        YVector3 {
            d_a: self.d_a,
            d_b: self.d_b,
            values,
        }
    }

    /// Closed-form factor `Q_d^{-1}` of the reduced system on one side.
    /// Rows and columns are ordered (identity, transpositions, cycles) by
    /// (distinct, pair, equal).
    pub fn q_inverse(d: usize) -> DMatrix<f64> {
        let d = d as f64;
        let u = (d - 2.0) * (d - 1.0);
        d * DMatrix::from_row_slice(
            3,
            3,
            &[
                u,
                3.0 * (d - 1.0),
                1.0,
                -u,
                u,
                d,
                u,
                -1.5 * (d - 1.0) * (d - 1.0),
                0.5 * (d * d + 1.0),
            ],
        )
    }

    /// `(Q_A^{-1} (x) Q_B^{-1})` applied to the `x4` column of the kept rows.
    pub fn delta_correction(&self) -> [f64; 9] {
        let (da, db) = (self.d_a as f64, self.d_b as f64);
        let s = 1.0 / ((da + 1.0) * (db + 1.0));
        [
            3.0 * s,
            (db - 2.0) * s,
            -1.5 * (db - 1.0) * s,
            (da - 2.0) * s,
            (da * db + 2.0) * s,
            -0.5 * (da - 2.0) * (db - 1.0) * s,
            -1.5 * (da - 1.0) * s,
            -0.5 * (da - 1.0) * (db - 2.0) * s,
            0.75 * (da - 1.0) * (db - 1.0) * s,
        ]
    }

    fn check(&self, y: &YVector3) -> Result<()> {
        if (y.d_a, y.d_b) != (self.d_a, self.d_b) {
            return Err(Error::DimensionMismatch {
                expected: self.d_a * self.d_b,
                found: y.d_a * y.d_b,
            });
        }
        Ok(())
    }

    fn with_residual(&self, x: XVector3, y: &YVector3) -> Result<XVector3> {
        let back = self.forward(&x);
        let residual = back
            .values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, |acc: f64, d| if d.is_nan() { f64::INFINITY } else { acc.max(d) });
        if residual > RESIDUAL_LIMIT {
            return Err(Error::Residual {
                residual,
                limit: RESIDUAL_LIMIT,
            });
        }
        Ok(x)
    }

    /// Separates `x4 - x5` through the aligned/misaligned difference, then
    /// solves the remaining tensor-product system in closed form.
    pub fn invert(&self, y: &YVector3) -> Result<XVector3> {
        self.check(y)?;
        let delta = (y.values[4] - y.values[5]) / self.eta;
        let kept: Vec<f64> = KEPT_ROWS.iter().map(|&r| y.values[r]).collect();
        let qinv = Self::q_inverse(self.d_a).kronecker(&Self::q_inverse(self.d_b));
        let solved = qinv * DVector::from_vec(kept);
        let corr = self.delta_correction();
        let t: Vec<f64> = (0..9).map(|k| solved[k] - delta * corr[k]).collect();
        let head = [t[0], t[1], t[2], t[3], t[4] + delta, t[4], t[5], t[6], t[7]];
        self.with_residual(
            XVector3 {
                head,
                x_s: t[8],
                split: None,
            },
            y,
        )
    }

    /// Generic LU solve of the 10 x 10 system; the closed form must agree.
    pub fn invert_numeric(&self, y: &YVector3) -> Result<XVector3> {
        self.check(y)?;
        let rhs = DVector::from_column_slice(&y.values);
        let sol = self
            .matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::Residual {
                residual: f64::INFINITY,
                limit: RESIDUAL_LIMIT,
            })?;
        let mut head = [0.0; 9];
        head.copy_from_slice(&sol.as_slice()[..9]);
        self.with_residual(
            XVector3 {
                head,
                x_s: sol[9],
                split: None,
            },
            y,
        )
    }
}

/// Components of `y` entering the reduced 9 x 9 system (the aligned row is
/// consumed by the `x4 - x5` separation).
const KEPT_ROWS: [usize; 9] = [0, 1, 2, 3, 5, 6, 7, 8, 9];

/// Expected order-3 statistics of the invariants `x`.
pub fn forward_3(x: &XVector3, d_a: usize, d_b: usize) -> Result<YVector3> {
    Ok(ForwardModel3::new(d_a, d_b)?.forward(x))
}

/// Invariants from order-3 statistics, closed form.
pub fn invert_3(y: &YVector3) -> Result<XVector3> {
    ForwardModel3::new(y.d_a, y.d_b)?.invert(y)
}

/// Invariants from order-3 statistics via a generic linear solve.
pub fn invert_3_numeric(y: &YVector3) -> Result<XVector3> {
    ForwardModel3::new(y.d_a, y.d_b)?.invert_numeric(y)
}

/// Exact order-2 statistics of `rho` on its own dimension profile.
pub fn exact_y2(rho: &DensityMatrix) -> Result<YVector2> {
    forward_2(&XVector2::from_state(rho))
}

/// Exact order-3 statistics of a bipartite `rho`.
pub fn exact_y3(rho: &DensityMatrix) -> Result<YVector3> {
    let dims = rho.dims();
    forward_3(&XVector3::from_traces(rho)?, dims.dim(0), dims.dim(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{
        maximally_entangled, maximally_mixed, random_density, tensor, werner_state,
    };

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn mixed_qubits_order2() {
        let dims = DimsProfile::bipartite(2, 2).unwrap();
        let x = XVector2::from_state(&maximally_mixed(&dims));
        let y = forward_2(&x).unwrap();
        assert!(max_diff(&y.values, &[1.0 / 16.0; 4]) < 1e-15);
        let back = invert_2(&y).unwrap();
        assert!(max_diff(&back.purities, &[1.0, 0.5, 0.5, 0.25]) < 1e-14);
    }

    #[test]
    fn bell_round_trip_order2() {
        let y = exact_y2(&maximally_entangled(2).unwrap()).unwrap();
        let x = invert_2(&y).unwrap();
        assert!(max_diff(&x.purities, &[1.0, 0.5, 0.5, 1.0]) < 1e-14);
    }

    #[test]
    fn werner_global_purity() {
        for p in [0.0, 0.3, 0.8, 1.0] {
            let x = invert_2(&exact_y2(&werner_state(2, p).unwrap()).unwrap()).unwrap();
            assert!((x.purities[3] - (1.0 + 3.0 * p * p) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn marginal_formulas_agree() {
        for (k, dims) in [vec![3, 3], vec![2, 2, 2], vec![3, 3, 3]].into_iter().enumerate() {
            let dims = DimsProfile::new(dims).unwrap();
            let rho = random_density(&dims, 3, 40 + k as u64).unwrap();
            let y = exact_y2(&rho).unwrap();
            let x = XVector2::from_state(&rho);
            for p in 0..dims.subsets() {
                let prod = purity_marginal(&y, p).unwrap();
                let ham = purity_marginal_hamming(&y, p).unwrap();
                assert!((prod - ham).abs() < 1e-12, "P={p}");
                assert!((prod - x.purities[p]).abs() < 1e-12, "P={p}");
            }
        }
    }

    #[test]
    fn empty_marginal_is_one() {
        let dims = DimsProfile::bipartite(2, 3).unwrap();
        let y = exact_y2(&random_density(&dims, 2, 1).unwrap()).unwrap();
        assert!((purity_marginal(&y, 0).unwrap() - 1.0).abs() < 1e-13);
        let mixed = exact_y2(&maximally_mixed(&DimsProfile::bipartite(2, 2).unwrap())).unwrap();
        assert!((purity_marginal(&mixed, 2).unwrap() - 0.5).abs() < 1e-14);
        assert!(purity_marginal(&mixed, 4).is_err());
    }

    #[test]
    fn hamming_form_rejects_unequal_dims() {
        let dims = DimsProfile::bipartite(2, 3).unwrap();
        let y = exact_y2(&maximally_mixed(&dims)).unwrap();
        assert!(purity_marginal_hamming(&y, 1).is_err());
    }

    #[test]
    fn trace_and_diagram_invariants_agree() {
        for (da, db, seed) in [(3, 3, 1), (3, 4, 2), (2, 2, 3)] {
            let dims = DimsProfile::bipartite(da, db).unwrap();
            let rho = random_density(&dims, 2, seed).unwrap();
            let a = XVector3::from_traces(&rho).unwrap();
            let b = XVector3::from_diagrams(&rho).unwrap();
            assert!(max_diff(&a.head, &b.head) < 1e-12);
            let (s, t) = (a.split.unwrap(), b.split.unwrap());
            assert!((s.0 - t.0).abs() < 1e-12 && (s.1 - t.1).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_state_order3() {
        let dims = DimsProfile::bipartite(3, 3).unwrap();
        let rho = maximally_mixed(&dims);
        let x = XVector3::from_traces(&rho).unwrap();
        let y = exact_y3(&rho).unwrap();
        for v in y.values {
            assert!((v - 1.0 / 729.0).abs() < 1e-17);
        }
        let back = invert_3(&y).unwrap();
        assert!(max_diff(&back.reduced(), &x.reduced()) < 1e-12);
        assert!((back.head[0] - 1.0).abs() < 1e-12);
        assert!((back.head[5] - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn eta_relation() {
        for (da, db) in [(3, 3), (3, 5), (4, 4)] {
            let model = ForwardModel3::new(da, db).unwrap();
            let (fa, fb) = (da as f64, db as f64);
            let expect = -1.0 / (fa * (fa * fa - 1.0) * fb * (fb * fb - 1.0));
            assert!((model.eta - expect).abs() < 1e-15);
            for c in 0..11 {
                let diff = model.full[(4, c)] - model.full[(5, c)];
                let want = match c {
                    4 => model.eta,
                    5 => -model.eta,
                    _ => 0.0,
                };
                assert!((diff - want).abs() < 1e-15, "column {c}");
            }
        }
    }

    #[test]
    fn components_are_independent_of_representative() {
        let model = ForwardModel3::new(3, 4).unwrap();
        let sw_a = s_matrix(3).unwrap() * w_matrix(3, 3).unwrap();
        let sw_b = s_matrix(3).unwrap() * w_matrix(3, 4).unwrap();
        for ga in 0..5 {
            for gb in 0..5 {
                let r = y3_component(ga, gb);
                let mut row = [0.0; 11];
                for ta in 0..6 {
                    for tb in 0..6 {
                        row[invariant_of(ta, tb)] += sw_a[(ga, ta)] * sw_b[(gb, tb)];
                    }
                }
                let stored: Vec<f64> = model.full.row(r).iter().copied().collect();
                assert!(max_diff(&row, &stored) < 1e-16, "codes {ga},{gb}");
            }
        }
    }

    /// Polynomial form of the order-3 map: each row is a product of
    /// per-class multiplicities and an integer polynomial matrix, with the
    /// aligned (pair, pair) row listed first.
    fn polynomial_oracle(da: f64, db: f64) -> DMatrix<f64> {
        let diag = [
            1.0,
            db - 2.0,
            (db - 2.0) * (db - 1.0),
            da - 2.0,
            (da - 2.0) * (db - 2.0),
            (da - 2.0) * (db - 2.0),
            (da - 2.0) * (db - 2.0) * (db - 1.0),
            (da - 2.0) * (da - 1.0),
            (da - 2.0) * (da - 1.0) * (db - 2.0),
            (da - 2.0) * (da - 1.0) * (db - 2.0) * (db - 1.0),
        ];
        let (a2, b2) = (da * da, db * db);
        #[rustfmt::skip]
        let rows: [[f64; 11]; 10] = [
            [(a2 - 2.0) * (b2 - 2.0), 3.0 * db * (2.0 - a2), 4.0 * a2 - 8.0, 3.0 * da * (2.0 - b2), 6.0 * da * db, 3.0 * da * db, -12.0 * da, 4.0 * b2 - 8.0, -12.0 * db, 8.0, 8.0],
            [(a2 - 2.0) * (db + 1.0), (a2 - 2.0) * (db - 1.0), 4.0 - 2.0 * a2, -3.0 * da * (db + 1.0), 2.0 * da * (1.0 - db), da * (1.0 - db), 6.0 * da, 4.0 * db + 4.0, 4.0 * db - 4.0, -4.0, -4.0],
            [a2 - 2.0, 3.0 * a2 - 6.0, 2.0 * a2 - 4.0, -3.0 * da, -6.0 * da, -3.0 * da, -6.0 * da, 4.0, 12.0, 4.0, 4.0],
            [(da + 1.0) * (b2 - 2.0), -3.0 * db * (da + 1.0), 4.0 * da + 4.0, (da - 1.0) * (b2 - 2.0), 2.0 * db * (1.0 - da), db * (1.0 - da), 4.0 * da - 4.0, 4.0 - 2.0 * b2, 6.0 * db, -4.0, -4.0],
            [da * db + da + db + 1.0, da * db - da + db - 1.0, -2.0 * da - 2.0, da * db + da - db - 1.0, -2.0 * da - 2.0 * db - 2.0, da * db + da + db + 3.0, 2.0 - 2.0 * da, -2.0 * db - 2.0, 2.0 - 2.0 * db, 2.0, 2.0],
            [da * db + da + db + 1.0, da * db - da + db - 1.0, -2.0 * da - 2.0, da * db + da - db - 1.0, da * db + 2.0, -da - db - 1.0, 2.0 - 2.0 * da, -2.0 * db - 2.0, 2.0 - 2.0 * db, 2.0, 2.0],
            [da + 1.0, 3.0 * da + 3.0, 2.0 * da + 2.0, da - 1.0, 2.0 * da - 2.0, da - 1.0, 2.0 * da - 2.0, -2.0, -6.0, -2.0, -2.0],
            [b2 - 2.0, -3.0 * db, 4.0, 3.0 * b2 - 6.0, -6.0 * db, -3.0 * db, 12.0, 2.0 * b2 - 4.0, -6.0 * db, 4.0, 4.0],
            [db + 1.0, db - 1.0, -2.0, 3.0 * db + 3.0, 2.0 * db - 2.0, db - 1.0, -6.0, 2.0 * db + 2.0, 2.0 * db - 2.0, -2.0, -2.0],
            [1.0, 3.0, 2.0, 3.0, 6.0, 3.0, 6.0, 2.0, 6.0, 2.0, 2.0],
        ];
        let norm = da * (a2 - 1.0) * (a2 - 4.0) * db * (b2 - 1.0) * (b2 - 4.0);
        DMatrix::from_fn(10, 11, |r, c| diag[r] * rows[r][c] / norm)
    }

    #[test]
    fn forward_model_matches_polynomial_form() {
        for (da, db) in [(3, 3), (3, 4), (4, 5), (5, 3)] {
            let model = ForwardModel3::new(da, db).unwrap();
            let oracle = polynomial_oracle(da as f64, db as f64);
            let diff = (&model.full - &oracle).abs().max();
            assert!(diff < 1e-14, "dims {da},{db}: {diff}");
        }
    }

    #[test]
    fn closed_form_factors_invert_reduced_system() {
        for (da, db) in [(3, 3), (3, 4), (5, 4)] {
            let model = ForwardModel3::new(da, db).unwrap();
            let mut reduced = DMatrix::zeros(9, 9);
            for (ri, &r) in KEPT_ROWS.iter().enumerate() {
                let src = [0, 1, 2, 3, 5, 6, 7, 8, 9];
                for (ci, &c) in src.iter().enumerate() {
                    reduced[(ri, ci)] = model.matrix[(r, c)];
                    if c == 5 {
                        reduced[(ri, ci)] += model.matrix[(r, 4)];
                    }
                }
            }
            let qinv = ForwardModel3::q_inverse(da).kronecker(&ForwardModel3::q_inverse(db));
            let id = &qinv * &reduced;
            assert!((id - DMatrix::identity(9, 9)).abs().max() < 1e-10);
            let m4 = DVector::from_iterator(9, KEPT_ROWS.iter().map(|&r| model.matrix[(r, 4)]));
            let c = qinv * m4;
            let corr = model.delta_correction();
            assert!(max_diff(c.as_slice(), &corr) < 1e-12);
        }
    }

    #[test]
    fn order3_round_trips() {
        for (da, db, seed) in [(3, 3, 11), (3, 4, 12), (4, 4, 13), (4, 3, 14)] {
            let dims = DimsProfile::bipartite(da, db).unwrap();
            let rho = random_density(&dims, 3, seed).unwrap();
            let x = XVector3::from_diagrams(&rho).unwrap();
            let y = forward_3(&x, da, db).unwrap();
            let closed = invert_3(&y).unwrap();
            let numeric = invert_3_numeric(&y).unwrap();
            assert!(max_diff(&closed.reduced(), &x.reduced()) < 1e-9);
            assert!(max_diff(&numeric.reduced(), &closed.reduced()) < 1e-9);
        }
    }

    #[test]
    fn product_states_have_zero_delta() {
        let a = random_density(&DimsProfile::new(vec![3]).unwrap(), 2, 5).unwrap();
        let b = random_density(&DimsProfile::new(vec![4]).unwrap(), 3, 6).unwrap();
        let rho = tensor(&[&a, &b]);
        let y = exact_y3(&rho).unwrap();
        let x = invert_3(&y).unwrap();
        assert!(x.delta().abs() < 1e-10);
    }

    #[test]
    fn order3_rejects_qubits_and_bad_residuals() {
        assert_eq!(
            ForwardModel3::new(2, 3),
            Err(Error::SingularWeingarten { d: 2 })
        );
        let y = YVector3 {
            d_a: 3,
            d_b: 3,
            values: [0.0; 10],
        };
        assert!(invert_3(&y).is_ok());
        let mut nan = y;
        nan.values[0] = f64::NAN;
        assert!(matches!(invert_3(&nan), Err(Error::Residual { .. })));
    }
}
