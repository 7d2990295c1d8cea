//! Internal consistency suite: Weingarten inverses, forward/inverse round
//! trips, and agreement of the trace formulas with the diagram oracle.

use std::fmt;

use nalgebra::DMatrix;

use crate::criteria::{werner_threshold_3, werner_threshold_3_bisection};
use crate::reconstruct::{
    exact_y2, invert_2, invert_3, invert_3_numeric, purity_marginal, purity_marginal_hamming,
    ForwardModel3, XVector2, XVector3,
};
use crate::states::{
    maximally_entangled, partial_transpose, random_density, trace_power, DimsProfile,
};
use crate::weingarten::{diagram_contract, gram_matrix, symmetric_group, w_matrix};
use crate::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelftestOptions {
    /// Added to `W[0][0]` before the Weingarten checks; a sensitivity hook.
    pub w_perturbation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "ok  " } else { "FAIL" };
        write!(
            f,
            "{status} {:<44} worst {:.3e} (tol {:.0e})",
            self.name, self.worst, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
    /// Which contraction carries which cubic invariant.
    pub identification: Vec<String>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Recorder(Vec<Check>);

impl Recorder {
    fn record(&mut self, name: impl Into<String>, tolerance: f64, worst: Result<f64>) {
        let (worst, passed) = match worst {
            Ok(w) => (w, w <= tolerance),
            Err(_) => (f64::INFINITY, false),
        };
        self.0.push(Check {
            name: name.into(),
            passed,
            worst,
            tolerance,
        });
    }
}

pub fn run(options: SelftestOptions) -> SelftestReport {
    let mut rec = Recorder(Vec::new());

    for (n, dims) in [(2usize, 2usize..=6), (3, 3..=6)] {
        rec.record(format!("Weingarten inverts Gram, n = {n}"), 1e-12, {
            dims.map(|d| {
                let mut w = w_matrix(n, d)?;
                if let Some(eps) = options.w_perturbation {
                    w[(0, 0)] += eps;
                }
                let g = gram_matrix(n, d)?;
                let k = g.nrows();
                Ok((w * g - DMatrix::<f64>::identity(k, k)).abs().max())
            })
            .try_fold(0.0f64, |acc, r: Result<f64>| r.map(|v| acc.max(v)))
        });
    }

    let second_order_dims = [vec![2, 2], vec![2, 3], vec![3, 3], vec![2, 2, 2], vec![2, 3, 2]];
    rec.record("order-2 invert(forward(x)) = x", 1e-12, {
        second_order_dims.iter().enumerate().try_fold(0.0f64, |acc, (k, d)| {
            let dims = DimsProfile::new(d.clone())?;
            let rho = random_density(&dims, 2, 100 + k as u64)?;
            let x = XVector2::from_state(&rho);
            let back = invert_2(&exact_y2(&rho)?)?;
            Ok(acc.max(max_abs_diff(&x.purities, &back.purities)))
        })
    });
    rec.record("Hamming form = product form", 1e-12, {
        [vec![3, 3], vec![2, 2, 2]].iter().enumerate().try_fold(0.0f64, |acc, (k, d)| {
            let dims = DimsProfile::new(d.clone())?;
            let y = exact_y2(&random_density(&dims, 3, 200 + k as u64)?)?;
            (0..dims.subsets()).try_fold(acc, |acc, p| {
                Ok(acc.max((purity_marginal(&y, p)? - purity_marginal_hamming(&y, p)?).abs()))
            })
        })
    });

    let third_order_dims = [(2, 2), (3, 3), (3, 4), (4, 3)];
    rec.record("trace formulas = diagram oracle", 1e-10, {
        third_order_dims.iter().enumerate().try_fold(0.0f64, |acc, (k, &(a, b))| {
            let rho = random_density(&DimsProfile::bipartite(a, b)?, 3, 300 + k as u64)?;
            let t = XVector3::from_traces(&rho)?;
            let o = XVector3::from_diagrams(&rho)?;
            let (ts, os) = (t.split.unwrap_or_default(), o.split.unwrap_or_default());
            Ok(acc
                .max(max_abs_diff(&t.head, &o.head))
                .max((ts.0 - os.0).abs())
                .max((ts.1 - os.1).abs()))
        })
    });
    rec.record("order-3 invert(forward(x)) = x", 1e-9, {
        third_order_dims[1..].iter().enumerate().try_fold(0.0f64, |acc, (k, &(a, b))| {
            let rho = random_density(&DimsProfile::bipartite(a, b)?, 3, 400 + k as u64)?;
            let x = XVector3::from_diagrams(&rho)?;
            let y = ForwardModel3::new(a, b)?.forward(&x);
            Ok(acc.max(max_abs_diff(&invert_3(&y)?.reduced(), &x.reduced())))
        })
    });
    rec.record("order-3 closed form = numeric solve", 1e-9, {
        [(3, 3), (3, 4), (4, 5), (5, 5)].iter().enumerate().try_fold(0.0f64, |acc, (k, &(a, b))| {
            let rho = random_density(&DimsProfile::bipartite(a, b)?, 2, 500 + k as u64)?;
            let y = ForwardModel3::new(a, b)?.forward(&XVector3::from_traces(&rho)?);
            Ok(acc.max(max_abs_diff(&invert_3(&y)?.reduced(), &invert_3_numeric(&y)?.reduced())))
        })
    });
    rec.record("Cardano root = bisection root, d = 3..10", 1e-9, {
        (3..=10).try_fold(0.0f64, |acc, d| {
            Ok(acc.max((werner_threshold_3(d)? - werner_threshold_3_bisection(d)?).abs()))
        })
    });

    let mut identification = Vec::new();
    rec.record("cubic contractions identified", 1e-12, {
        identify_cubic(&mut identification)
    });

    SelftestReport {
        checks: rec.0,
        identification,
    }
}

/// Compares the two three-cycle contractions against `Tr rho^3` and
/// `Tr (rho^Gamma)^3` on the Bell state, where they differ (1 vs 1/4), and
/// on a random state.
fn identify_cubic(lines: &mut Vec<String>) -> Result<f64> {
    let group = symmetric_group(3)?;
    let (c1, c2) = (&group[4], &group[5]);
    let mut worst = 0.0f64;
    let bell = maximally_entangled(2)?;
    let random = random_density(&DimsProfile::bipartite(3, 3)?, 3, 600)?;
    for (label, rho) in [("Bell state", &bell), ("random [3,3] state", &random)] {
        let same = diagram_contract(rho, c1, c1)?;
        let opposite = diagram_contract(rho, c1, c2)?;
        let cube = trace_power(rho.matrix(), 3)?;
        let pt_cube = trace_power(&partial_transpose(rho, 1)?, 3)?;
        worst = worst.max((same - cube).abs()).max((opposite - pt_cube).abs());
        lines.push(format!(
            "{label}: ({c1},{c1}) = {same:.6} vs Tr rho^3 = {cube:.6}; \
             ({c1},{c2}) = {opposite:.6} vs Tr (rho^Gamma)^3 = {pt_cube:.6}"
        ));
    }
    lines.push(format!(
        "x9 = ({c1},{c1}) = Tr rho^3 [equal cycles], \
         x10 = ({c1},{c2}) = Tr (rho^Gamma)^3 [inverse cycles]"
    ));
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let report = run(SelftestOptions::default());
        for c in &report.checks {
            assert!(c.passed, "{c}");
        }
        assert!(report.identification.last().unwrap().contains("Tr rho^3"));
    }

    #[test]
    fn perturbed_weingarten_fails() {
        let report = run(SelftestOptions {
            w_perturbation: Some(1e-3),
        });
        assert!(!report.passed());
        assert!(report.failures().all(|c| c.name.starts_with("Weingarten")));
    }
}
