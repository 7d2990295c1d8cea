//! Permutations of S1..S3, Weingarten values and the equality/Weingarten
//! matrices of the twirl expansion, plus the explicit diagram contraction that
//! maps a pair of permutations to a local unitary invariant.
//!
//! Every matrix indexed by permutations uses the order returned by
//! [`symmetric_group`]: for S3 that is `e, (12), (23), (13), (312), (231)`,
//! where the 3-cycles are written in one-line notation (`(312)` sends
//! 1 -> 3, 2 -> 1, 3 -> 2).

use std::fmt;

use nalgebra::DMatrix;

use crate::states::DensityMatrix;
use crate::{Complex64, Error, Result};

/// A bijection on `{0, .., n-1}` stored as its image list.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

/// Cycle lengths of a permutation, sorted in decreasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleType(pub Vec<usize>);

impl CycleType {
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn cycles(&self) -> usize {
        self.0.len()
    }

    pub fn identity(n: usize) -> Self {
        CycleType(vec![1; n])
    }

    pub fn transposition(n: usize) -> Self {
        let mut parts = vec![2];
        parts.extend(std::iter::repeat_n(1, n.saturating_sub(2)));
        CycleType(parts)
    }

    pub fn full_cycle(n: usize) -> Self {
        CycleType(vec![n])
    }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "{images:?} is not a permutation"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, k: usize) -> usize {
        self.images[k]
    }

    /// `self o other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.n() != other.n() {
            return Err(Error::OrderMismatch(self.n(), other.n()));
        }
        Ok(Permutation {
            images: other.images.iter().map(|&k| self.images[k]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.n()];
        for (k, &v) in self.images.iter().enumerate() {
            images[v] = k;
        }
        Permutation { images }
    }

    pub fn cycle_type(&self) -> CycleType {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut lengths = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                k = self.images[k];
                len += 1;
            }
            lengths.push(len);
        }
        lengths.sort_unstable_by(|a, b| b.cmp(a));
        CycleType(lengths)
    }

    pub fn cycles(&self) -> usize {
        self.cycle_type().cycles()
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ct = self.cycle_type();
        if ct.cycles() == self.n() {
            return write!(f, "e");
        }
        if self.n() == 3 && ct.cycles() == 1 {
            // one-line notation for 3-cycles
            let s: String = self.images.iter().map(|i| char::from(b'1' + *i as u8)).collect();
            return write!(f, "({s})");
        }
        let moved: String = (0..self.n())
            .filter(|&k| self.images[k] != k)
            .map(|k| char::from(b'1' + k as u8))
            .collect();
        write!(f, "({moved})")
    }
}

/// Elements of `S_n` in the canonical order, `n <= 3`.
pub fn symmetric_group(n: usize) -> Result<Vec<Permutation>> {
    let lists: Vec<Vec<usize>> = match n {
        1 => vec![vec![0]],
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![
            vec![0, 1, 2],
            vec![1, 0, 2],
            vec![0, 2, 1],
            vec![2, 1, 0],
            vec![2, 0, 1],
            vec![1, 2, 0],
        ],
        _ => return Err(Error::UnsupportedOrder(n)),
    };
    Ok(lists.into_iter().map(|images| Permutation { images }).collect())
}

/// Weingarten value on a conjugacy class, from the closed forms for `n <= 3`.
pub fn wg(cycle_type: &CycleType, d: usize, n: usize) -> Result<f64> {
    if cycle_type.order() != n {
        return Err(Error::OrderMismatch(cycle_type.order(), n));
    }
    let df = d as f64;
    match n {
        1 => Ok(1.0 / df),
        2 => {
            if d < 2 {
                return Err(Error::InvalidParameter(format!("Wg at n = 2 needs d >= 2, got {d}")));
            }
            let denom = df * (df * df - 1.0);
            match cycle_type.cycles() {
                2 => Ok(df / denom),
                _ => Ok(-1.0 / denom),
            }
        }
        3 => {
            if d < 3 {
                return Err(Error::SingularWeingarten { d });
            }
            let denom = df * (df * df - 1.0) * (df * df - 4.0);
            match cycle_type.cycles() {
                3 => Ok((df * df - 2.0) / denom),
                2 => Ok(-df / denom),
                _ => Ok(2.0 / denom),
            }
        }
        _ => Err(Error::UnsupportedOrder(n)),
    }
}

/// `Wg(sigma tau^-1, d)`.
pub fn wg_pair(sigma: &Permutation, tau: &Permutation, d: usize) -> Result<f64> {
    let p = sigma.compose(&tau.inverse())?;
    wg(&p.cycle_type(), d, p.n())
}

/// `d^{#cycles(sigma tau^-1)}`.
pub fn gram(sigma: &Permutation, tau: &Permutation, d: usize) -> Result<f64> {
    let p = sigma.compose(&tau.inverse())?;
    Ok((d as f64).powi(p.cycles() as i32))
}

/// `W[sigma][tau] = Wg(sigma tau^-1, d)` over the canonical order of `S_n`.
pub fn w_matrix(n: usize, d: usize) -> Result<DMatrix<f64>> {
    if !(2..=3).contains(&n) {
        return Err(Error::UnsupportedOrder(n));
    }
    let group = symmetric_group(n)?;
    let mut w = DMatrix::zeros(group.len(), group.len());
    for (i, s) in group.iter().enumerate() {
        for (j, t) in group.iter().enumerate() {
            w[(i, j)] = wg_pair(s, t, d)?;
        }
    }
    Ok(w)
}

/// Gram matrix `G[sigma][tau] = d^{#cycles(sigma tau^-1)}`.
pub fn gram_matrix(n: usize, d: usize) -> Result<DMatrix<f64>> {
    let group = symmetric_group(n)?;
    let mut g = DMatrix::zeros(group.len(), group.len());
    for (i, s) in group.iter().enumerate() {
        for (j, t) in group.iter().enumerate() {
            g[(i, j)] = gram(s, t, d)?;
        }
    }
    Ok(g)
}

/// Which measurement rounds share an outcome index. Stored as canonical block
/// labels: `labels[k]` is the block of round `k`, numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EqualityPattern {
    labels: Vec<usize>,
}

impl EqualityPattern {
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = raw
            .iter()
            .map(|v| match map.iter().find(|(k, _)| k == v) {
                Some(&(_, l)) => l,
                None => {
                    let l = map.len();
                    map.push((*v, l));
                    l
                }
            })
            .collect();
        Self { labels }
    }

    /// Pattern of a concrete tuple of outcome indices.
    pub fn of_indices(indices: &[usize]) -> Self {
        Self::from_labels(indices)
    }

    pub fn rounds(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// `prod_k delta(i_k, i_{sigma(k)})` evaluated on any tuple of this pattern.
    pub fn admits(&self, sigma: &Permutation) -> bool {
        (0..self.rounds()).all(|k| self.labels[k] == self.labels[sigma.apply(k)])
    }

    /// Number of ordered index tuples over `[d]` with exactly this pattern.
    pub fn tuple_count(&self, d: usize) -> usize {
        (0..self.blocks()).map(|b| d.saturating_sub(b)).product()
    }
}

/// Row order of [`s_matrix`]: for `n = 2` `{equal, distinct}`; for `n = 3`
/// `{all distinct, 1=2, 2=3, 1=3, all equal}`.
pub fn equality_patterns(n: usize) -> Result<Vec<EqualityPattern>> {
    let raw: Vec<Vec<usize>> = match n {
        2 => vec![vec![0, 0], vec![0, 1]],
        3 => vec![
            vec![0, 1, 2],
            vec![0, 0, 1],
            vec![0, 1, 1],
            vec![0, 1, 0],
            vec![0, 0, 0],
        ],
        _ => return Err(Error::UnsupportedOrder(n)),
    };
    Ok(raw.iter().map(|r| EqualityPattern::from_labels(r)).collect())
}

/// Equality matrix: `S[g][sigma] = 1` iff every delta of `sigma` holds on pattern `g`.
pub fn s_matrix(n: usize) -> Result<DMatrix<f64>> {
    let patterns = equality_patterns(n)?;
    let group = symmetric_group(n)?;
    Ok(DMatrix::from_fn(patterns.len(), group.len(), |g, s| {
        if patterns[g].admits(&group[s]) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Contracts `n` copies of a bipartite `rho`, wiring the A row index of copy
/// `k` to the A column index of copy `tau_a(k)` and likewise for B.
pub fn diagram_contract_complex(
    rho: &DensityMatrix,
    tau_a: &Permutation,
    tau_b: &Permutation,
) -> Result<Complex64> {
    if tau_a.n() != tau_b.n() {
        return Err(Error::OrderMismatch(tau_a.n(), tau_b.n()));
    }
    let dims = rho.dims();
    if dims.parties() != 2 {
        return Err(Error::InvalidParameter(format!(
            "diagram contraction needs a bipartite state, got {} parties",
            dims.parties()
        )));
    }
    let n = tau_a.n();
    if n == 0 || n > 3 {
        return Err(Error::UnsupportedOrder(n));
    }
    let d_b = dims.dim(1);
    let total = dims.total();
    let m = rho.matrix();
    let mut cols = vec![0usize; n];
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut term = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let a = cols[tau_a.apply(k)] / d_b;
            let b = cols[tau_b.apply(k)] % d_b;
            term *= m[(a * d_b + b, cols[k])];
        }
        acc += term;
        // odometer over column tuples
        let mut k = 0;
        loop {
            if k == n {
                return Ok(acc);
            }
            cols[k] += 1;
            if cols[k] < total {
                break;
            }
            cols[k] = 0;
            k += 1;
        }
    }
}

/// Real value of [`diagram_contract_complex`]; the imaginary part vanishes for
/// Hermitian input.
pub fn diagram_contract(
    rho: &DensityMatrix,
    tau_a: &Permutation,
    tau_b: &Permutation,
) -> Result<f64> {
    diagram_contract_complex(rho, tau_a, tau_b).map(|z| z.re)
}

/// All `S_n x S_n` contractions, rows indexed by `tau_a`, columns by `tau_b`.
pub fn diagram_table(rho: &DensityMatrix, n: usize) -> Result<DMatrix<f64>> {
    let group = symmetric_group(n)?;
    let mut out = DMatrix::zeros(group.len(), group.len());
    for (i, ta) in group.iter().enumerate() {
        for (j, tb) in group.iter().enumerate() {
            out[(i, j)] = diagram_contract(rho, ta, tb)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{maximally_entangled, random_density, DimsProfile};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn group_listing_and_names() {
        let g = symmetric_group(3).unwrap();
        let names: Vec<String> = g.iter().map(|p| p.to_string()).collect();
        assert_eq!(names, ["e", "(12)", "(23)", "(13)", "(312)", "(231)"]);
        assert_eq!(g[4].cycle_type(), CycleType(vec![3]));
        assert_eq!(g[2].cycle_type(), CycleType(vec![2, 1]));
        assert_eq!(g[4].inverse(), g[5]);
        assert!(symmetric_group(4).is_err());
        assert!(Permutation::from_images(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn wg_closed_form_values() {
        assert!(close(wg(&CycleType::identity(1), 5, 1).unwrap(), 0.2, 1e-16));
        assert!(close(wg(&CycleType::identity(2), 2, 2).unwrap(), 1.0 / 3.0, 1e-16));
        assert!(close(wg(&CycleType::transposition(2), 2, 2).unwrap(), -1.0 / 6.0, 1e-16));
        assert!(close(wg(&CycleType::full_cycle(3), 3, 3).unwrap(), 1.0 / 60.0, 1e-16));
        assert!(close(wg(&CycleType::transposition(3), 3, 3).unwrap(), -1.0 / 40.0, 1e-16));
        assert!(close(wg(&CycleType::identity(3), 3, 3).unwrap(), 7.0 / 120.0, 1e-16));
    }

    #[test]
    fn wg_errors() {
        assert_eq!(
            wg(&CycleType::identity(3), 2, 3),
            Err(Error::SingularWeingarten { d: 2 })
        );
        assert!(matches!(
            wg(&CycleType::identity(4), 5, 4),
            Err(Error::UnsupportedOrder(4))
        ));
        assert!(wg(&CycleType::identity(2), 3, 3).is_err());
    }

    #[test]
    fn gram_examples() {
        let s2 = symmetric_group(2).unwrap();
        assert_eq!(gram(&s2[0], &s2[0], 3).unwrap(), 9.0);
        assert_eq!(gram(&s2[0], &s2[1], 2).unwrap(), 2.0);
        let s3 = symmetric_group(3).unwrap();
        assert!(gram(&s2[0], &s3[0], 2).is_err());
        // (1/3) * 4 + (-1/6) * 2 = 1
        let lhs = wg_pair(&s2[0], &s2[0], 2).unwrap() * gram(&s2[0], &s2[0], 2).unwrap()
            + wg_pair(&s2[0], &s2[1], 2).unwrap() * gram(&s2[1], &s2[0], 2).unwrap();
        assert!(close(lhs, 1.0, 1e-15));
    }

    #[test]
    fn w_matrix_examples() {
        let w = w_matrix(2, 2).unwrap();
        let expect = [[2.0 / 6.0, -1.0 / 6.0], [-1.0 / 6.0, 2.0 / 6.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(w[(i, j)], expect[i][j], 1e-16));
            }
        }
        for d in 3..=6 {
            let df = d as f64;
            let w = w_matrix(3, d).unwrap();
            let denom = df * (df * df - 1.0) * (df * df - 4.0);
            assert!(close(w[(0, 0)], (df * df - 2.0) / denom, 1e-16));
            assert!((w.clone() - w.transpose()).abs().max() == 0.0);
            let target = 1.0 / (df * (df + 1.0) * (df + 2.0));
            for r in 0..6 {
                assert!(close(w.row(r).sum(), target, 1e-15), "d={d} row {r}");
            }
        }
        assert!(w_matrix(3, 2).is_err());
        assert!(w_matrix(1, 2).is_err());
    }

    #[test]
    fn s_matrix_shapes() {
        let s2 = s_matrix(2).unwrap();
        assert_eq!(s2, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]));
        let s3 = s_matrix(3).unwrap();
        assert_eq!(s3.shape(), (5, 6));
        assert_eq!(s3.row(0).iter().copied().collect::<Vec<_>>(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(s3.row(4).iter().all(|&v| v == 1.0));
        // one-pair rows: identity plus the matching transposition
        for (row, t) in [(1, 1), (2, 2), (3, 3)] {
            let r: Vec<f64> = s3.row(row).iter().copied().collect();
            let mut expect = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
            expect[t] = 1.0;
            assert_eq!(r, expect);
        }
        assert!(s_matrix(4).is_err());
    }

    #[test]
    fn pattern_tuple_counts() {
        let p = equality_patterns(3).unwrap();
        assert_eq!(p[0].tuple_count(4), 24);
        assert_eq!(p[1].tuple_count(4), 12);
        assert_eq!(p[4].tuple_count(4), 4);
        assert_eq!(EqualityPattern::of_indices(&[5, 2, 5]), p[3]);
    }

    #[test]
    fn contractions_of_simple_wirings() {
        let dims = DimsProfile::bipartite(3, 2).unwrap();
        let rho = random_density(&dims, 3, 5).unwrap();
        let g = symmetric_group(3).unwrap();
        assert!(close(diagram_contract(&rho, &g[0], &g[0]).unwrap(), 1.0, 1e-12));
        let x5 = diagram_contract(&rho, &g[1], &g[1]).unwrap();
        assert!(close(x5, rho.purity(), 1e-12));
        let z = diagram_contract_complex(&rho, &g[4], &g[5]).unwrap();
        assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn bell_state_opposite_cycles_give_partial_transpose_cube() {
        let phi = maximally_entangled(2).unwrap();
        let g = symmetric_group(3).unwrap();
        assert!(close(diagram_contract(&phi, &g[4], &g[5]).unwrap(), 0.25, 1e-14));
        assert!(close(diagram_contract(&phi, &g[4], &g[4]).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn contract_rejects_mismatched_orders() {
        let phi = maximally_entangled(2).unwrap();
        let s2 = symmetric_group(2).unwrap();
        let s3 = symmetric_group(3).unwrap();
        assert!(diagram_contract(&phi, &s2[0], &s3[0]).is_err());
    }
}
