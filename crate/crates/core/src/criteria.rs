//! Separability criteria evaluated on invariant vectors, and analytic
//! results for Werner and Bell-diagonal states.
//!
//! Both criteria are necessary conditions for separability: a separable state
//! never violates them, so a violation certifies entanglement. Each report
//! carries `margin = rhs - lhs`; the verdict is "detected" when the margin is
//! below `-TIE_TOLERANCE`. Margins within the tolerance of zero are treated as
//! boundary cases and report not-detected.

use crate::reconstruct::{XVector2, XVector3};
use crate::states::{
    bell_diagonal, min_hermitian_eigenvalue, partial_transpose, BellDiagonalSpectrum,
};
use crate::{Error, Result};

/// Margins closer to zero than this count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub detected: bool,
    pub inputs: Vec<f64>,
}

impl CriterionReport {
    /// Detection means `lhs > rhs` beyond the tie tolerance.
    pub fn new(name: &'static str, lhs: f64, rhs: f64, inputs: Vec<f64>) -> Self {
        let margin = rhs - lhs;
        Self {
            name,
            lhs,
            rhs,
            margin,
            detected: margin < -TIE_TOLERANCE,
            inputs,
        }
    }
}

/// Bipartite purity criterion `Tr rho^2 <= min(Tr rho_A^2, Tr rho_B^2)`.
pub fn purity_criterion(x: &XVector2) -> Result<CriterionReport> {
    if x.dims.parties() != 2 {
        return Err(Error::InvalidParameter(format!(
            "bipartite purity criterion got {} parties",
            x.dims.parties()
        )));
    }
    let (b, a, global) = (x.purities[1], x.purities[2], x.purities[3]);
    Ok(CriterionReport::new(
        "purity",
        global,
        a.min(b),
        x.purities.clone(),
    ))
}

/// A pair of marginals `Q ⊂ P` with `Tr rho_P^2 > Tr rho_Q^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityViolation {
    pub larger: usize,
    pub smaller: usize,
    pub margin: f64,
}

/// Every violated inclusion `Q ⊂ P` among nonempty marginals of an
/// `N`-party state. Separable states satisfy `Tr rho_P^2 <= Tr rho_Q^2`.
pub fn purity_violations(x: &XVector2) -> Vec<PurityViolation> {
    let n = x.purities.len();
    let mut out = Vec::new();
    for p in 1..n {
        // nonempty proper subsets q of p
        let mut q = (p - 1) & p;
        while q != 0 {
            let margin = x.purities[q] - x.purities[p];
            if margin < -TIE_TOLERANCE {
                out.push(PurityViolation {
                    larger: p,
                    smaller: q,
                    margin,
                });
            }
            q = (q - 1) & p;
        }
    }
    out
}

/// Reduction-map criterion at third order,
/// `Tr rho^3 + Tr (rho^Gamma)^3 <= 2 Tr(rho_A Tr_B rho^2)`, i.e. `x_S <= x8`.
pub fn third_order_criterion(x: &XVector3) -> CriterionReport {
    let mut inputs = x.reduced().to_vec();
    if let Some((x9, x10)) = x.split {
        inputs.extend([x9, x10]);
    }
    CriterionReport::new("third-order", x.x9_plus_x10(), 2.0 * x.head[8], inputs)
}

/// `-(d+1) p^2 + 1`, the purity criterion on Werner states up to a positive
/// factor; negative means detected.
pub fn werner_poly_2(d: usize, p: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("needs d >= 2, got {d}")));
    }
    Ok(1.0 - (d as f64 + 1.0) * p * p)
}

pub fn werner_threshold_2(d: usize) -> Result<f64> {
    werner_poly_2(d, 0.0)?;
    Ok(1.0 / (d as f64 + 1.0).sqrt())
}

/// `-(d^2-4)(d+1) p^3 + 2(d+1)(d-3) p^2 + 2`, the third-order criterion on
/// Werner states up to a positive factor.
pub fn werner_poly_3(d: usize, p: f64) -> Result<f64> {
    if d < 3 {
        return Err(Error::SingularWeingarten { d });
    }
    let d = d as f64;
    Ok(-(d * d - 4.0) * (d + 1.0) * p.powi(3) + 2.0 * (d + 1.0) * (d - 3.0) * p * p + 2.0)
}

/// Real root of [`werner_poly_3`] in `(0, 1)` by Cardano's formula on the
/// monic cubic `p^3 + a p^2 + b`.
pub fn werner_threshold_3(d: usize) -> Result<f64> {
    werner_poly_3(d, 0.0)?;
    let df = d as f64;
    let a = -2.0 * (df - 3.0) / ((df - 2.0) * (df + 2.0));
    let b = -2.0 / ((df - 2.0) * (df + 2.0) * (df + 1.0));
    let q = -a * a / 3.0;
    let r = 2.0 * a.powi(3) / 27.0 + b;
    let disc = (r / 2.0).powi(2) + (q / 3.0).powi(3);
    if disc < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cubic for d = {d} has three real roots"
        )));
    }
    let s = disc.sqrt();
    Ok((-r / 2.0 + s).cbrt() + (-r / 2.0 - s).cbrt() - a / 3.0)
}

/// The same root by bisection on `[0, 1]`.
pub fn werner_threshold_3_bisection(d: usize) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if werner_poly_3(d, lo)? <= 0.0 || werner_poly_3(d, hi)? >= 0.0 {
        return Err(Error::InvalidParameter(format!("no sign change for d = {d}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if werner_poly_3(d, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Werner states are NPT, hence entangled, exactly for `p > 1/(d+1)`.
pub fn ppt_threshold(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("needs d >= 2, got {d}")));
    }
    Ok(1.0 / (d as f64 + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellDiagonalReport {
    /// `lhs = -lambda_min(rho^Gamma)`, `rhs = 0`.
    pub npt: CriterionReport,
    pub purity: CriterionReport,
    pub third_order: CriterionReport,
}

/// Evaluates the partial-transpose test and both criteria on the exact
/// Bell-diagonal state.
pub fn bell_diagonal_report(spec: &BellDiagonalSpectrum) -> Result<BellDiagonalReport> {
    let rho = bell_diagonal(spec);
    let pt = partial_transpose(&rho, 1)?;
    let lambdas = spec.lambdas().to_vec();
    let npt = CriterionReport::new("npt", -min_hermitian_eigenvalue(&pt), 0.0, lambdas);
    let purity = purity_criterion(&XVector2::from_state(&rho))?;
    let third_order = third_order_criterion(&XVector3::from_traces(&rho)?);
    Ok(BellDiagonalReport {
        npt,
        purity,
        third_order,
    })
}
