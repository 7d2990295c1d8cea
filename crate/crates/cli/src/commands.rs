//! Subcommand bodies. Each returns a [`Table`]; `main` renders and writes it.
//!
//! CSV schemas:
//! - `invariants`: `quantity,value`
//! - `estimate`: `quantity,estimate,std_error,exact`
//! - `werner-sweep`: `kind,p,poly2,poly3,detected2,detected3` with `kind` one
//!   of `grid`, `threshold2`, `threshold3`, `ppt`
//! - `selftest`: `check,passed,worst,tolerance`

use twirlinv::criteria::{
    ppt_threshold, purity_criterion, purity_violations, third_order_criterion, werner_poly_2,
    werner_poly_3, werner_threshold_2, werner_threshold_3, CriterionReport, TIE_TOLERANCE,
};
use twirlinv::reconstruct::{invert_2, invert_3, ForwardModel3, XVector2, XVector3};
use twirlinv::selftest::{self, SelftestOptions};
use twirlinv::states::{DensityMatrix, DimsProfile};
use twirlinv::twirl::{EstimatorConfig, ProductEstimator, Simulator};
use twirlinv::weingarten::{diagram_contract, symmetric_group};

use crate::output::{Cell, Table};
use crate::{Failure, RunArgs};

/// `purity[AB]`-style label, parties lettered from `A`.
fn subset_label(dims: &DimsProfile, mask: usize) -> String {
    let letters: String = dims
        .members(mask)
        .iter()
        .map(|&l| {
            if l < 26 {
                char::from(b'A' + l as u8).to_string()
            } else {
                format!("P{}", l + 1)
            }
        })
        .collect();
    format!("purity[{letters}]")
}

fn criterion_rows(table: &mut Table, r: &CriterionReport) {
    for (field, value) in [("lhs", r.lhs), ("rhs", r.rhs), ("margin", r.margin)] {
        table.push(vec![format!("{}.{field}", r.name).into(), value.into()]);
    }
    table.push(vec![format!("{}.detected", r.name).into(), r.detected.into()]);
}

pub fn invariants(rho: &DensityMatrix, order: u8) -> Result<Table, Failure> {
    let dims = rho.dims();
    let mut table = Table::new(
        format!("exact order-{order} invariants, dims {:?}", dims.dims()),
        vec!["quantity", "value"],
    );
    if order == 2 {
        let x = XVector2::from_state(rho);
        for (mask, v) in x.purities.iter().enumerate() {
            table.push(vec![subset_label(dims, mask).into(), (*v).into()]);
        }
        if dims.parties() == 2 {
            let group = symmetric_group(2)?;
            // (e,e), (e,(12)), ((12),e), ((12),(12)) match the purity order
            let mut residual = 0.0f64;
            for (k, (a, b)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                let v = diagram_contract(rho, &group[a], &group[b])?;
                residual = residual.max((v - x.purities[k]).abs());
            }
            table.push(vec!["oracle_residual".into(), residual.into()]);
            criterion_rows(&mut table, &purity_criterion(&x)?);
        } else {
            let violations = purity_violations(&x);
            table.push(vec!["purity_violations".into(), (violations.len() as f64).into()]);
            for v in violations {
                table.note(format!(
                    "violated: {} > {} by {:.3e}",
                    subset_label(dims, v.larger),
                    subset_label(dims, v.smaller),
                    -v.margin
                ));
            }
        }
    } else {
        if dims.parties() != 2 {
            return Err(Failure::usage("order 3 needs a bipartite state"));
        }
        let traces = XVector3::from_traces(rho)?;
        let diagrams = XVector3::from_diagrams(rho)?;
        for (k, v) in traces.head.iter().enumerate() {
            table.push(vec![format!("x{k}").into(), (*v).into()]);
        }
        let (x9, x10) = traces.split.expect("exact invariants carry x9, x10");
        table.push(vec!["x9".into(), x9.into()]);
        table.push(vec!["x10".into(), x10.into()]);
        table.push(vec!["x_S".into(), traces.x_s.into()]);
        let (o9, o10) = diagrams.split.expect("exact invariants carry x9, x10");
        let residual = traces
            .head
            .iter()
            .zip(&diagrams.head)
            .map(|(a, b)| (a - b).abs())
            .chain([(x9 - o9).abs(), (x10 - o10).abs()])
            .fold(0.0, f64::max);
        table.push(vec!["oracle_residual".into(), residual.into()]);
        criterion_rows(&mut table, &third_order_criterion(&traces));
    }
    Ok(table)
}

fn std_error(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((var / n).sqrt())
}

fn estimate_row(name: String, estimate: f64, batches: &[f64], exact: Option<f64>) -> Vec<Cell> {
    vec![name.into(), estimate.into(), std_error(batches).into(), exact.into()]
}

pub fn estimate(rho: &DensityMatrix, run: &RunArgs) -> Result<Table, Failure> {
    let dims = rho.dims();
    if run.order == 3 {
        if dims.parties() != 2 {
            return Err(Failure::usage("order 3 needs a bipartite state"));
        }
        // refuse before simulating
        ForwardModel3::new(dims.dim(0), dims.dim(1))?;
    }
    let cfg = EstimatorConfig {
        n_unitaries: run.unitaries,
        shots: run.shots,
        master_seed: run.seed,
        product_estimator: if run.plug_in {
            ProductEstimator::PlugIn
        } else {
            ProductEstimator::DistinctShots
        },
        batches: run.batches,
    };
    let out = Simulator::new(rho, true, run.order == 3)?.run(&cfg)?;
    let mut table = Table::new(
        format!(
            "order-{} estimate, dims {:?}, {} unitaries, {} shots, seed {}",
            run.order,
            dims.dims(),
            run.unitaries,
            run.shots,
            run.seed
        ),
        vec!["quantity", "estimate", "std_error", "exact"],
    );

    let y2 = out.y2.expect("order 2 always simulated");
    let x2 = invert_2(&y2.mean)?;
    let x2_batches: Vec<XVector2> = y2
        .batch_means
        .iter()
        .map(invert_2)
        .collect::<Result<_, _>>()?;
    let exact2 = XVector2::from_state(rho);
    for mask in 0..dims.subsets() {
        let b: Vec<f64> = x2_batches.iter().map(|x| x.purities[mask]).collect();
        table.push(estimate_row(
            subset_label(dims, mask),
            x2.purities[mask],
            &b,
            Some(exact2.purities[mask]),
        ));
    }
    if dims.parties() == 2 {
        let report = purity_criterion(&x2)?;
        let b: Vec<f64> = x2_batches
            .iter()
            .map(|x| purity_criterion(x).map(|r| r.margin))
            .collect::<Result<_, _>>()?;
        let exact = purity_criterion(&exact2)?;
        table.push(estimate_row("purity.margin".into(), report.margin, &b, Some(exact.margin)));
        table.push(vec![
            "purity.detected".into(),
            report.detected.into(),
            Cell::Empty,
            exact.detected.into(),
        ]);
    }

    if let Some(y3) = out.y3 {
        let x3 = invert_3(&y3.mean)?;
        let x3_batches: Vec<XVector3> = y3
            .batch_means
            .iter()
            .map(invert_3)
            .collect::<Result<_, _>>()?;
        let exact3 = XVector3::from_traces(rho)?;
        let names = ["x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x_S"];
        let (est, ex) = (x3.reduced(), exact3.reduced());
        for (k, name) in names.iter().enumerate() {
            let b: Vec<f64> = x3_batches.iter().map(|x| x.reduced()[k]).collect();
            table.push(estimate_row(name.to_string(), est[k], &b, Some(ex[k])));
        }
        let b: Vec<f64> = x3_batches.iter().map(|x| x.delta()).collect();
        table.push(estimate_row("delta".into(), x3.delta(), &b, Some(exact3.delta())));
        let report = third_order_criterion(&x3);
        let exact = third_order_criterion(&exact3);
        let b: Vec<f64> = x3_batches
            .iter()
            .map(|x| third_order_criterion(x).margin)
            .collect();
        table.push(estimate_row(
            "third-order.margin".into(),
            report.margin,
            &b,
            Some(exact.margin),
        ));
        table.push(vec![
            "third-order.detected".into(),
            report.detected.into(),
            Cell::Empty,
            exact.detected.into(),
        ]);
        let model = ForwardModel3::new(dims.dim(0), dims.dim(1))?;
        let back = model.forward(&x3);
        let residual = back
            .values
            .iter()
            .zip(&y3.mean.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        table.push(vec!["residual".into(), residual.into(), Cell::Empty, Cell::Empty]);
    }
    table.note(format!(
        "standard errors from {} batches; criteria detect when margin < -{TIE_TOLERANCE:e}",
        y2.batch_sizes.len()
    ));
    Ok(table)
}

fn detected(poly: f64) -> bool {
    poly < -TIE_TOLERANCE
}

pub fn werner_sweep(
    d: usize,
    points: usize,
    p_min: f64,
    p_max: f64,
    order: Option<u8>,
) -> Result<Table, Failure> {
    if d < 2 {
        return Err(Failure::usage(format!("--d must be >= 2, got {d}")));
    }
    if points < 2 || !(0.0..=1.0).contains(&p_min) || !(0.0..=1.0).contains(&p_max) || p_min >= p_max
    {
        return Err(Failure::usage(
            "invalid grid: need --points >= 2 and 0 <= p-min < p-max <= 1",
        ));
    }
    let third = match order {
        Some(3) if d < 3 => {
            return Err(Failure::usage(
                "order-3 columns need d >= 3 (singular Weingarten matrix at d = 2)",
            ))
        }
        Some(o) => o == 3,
        None => d >= 3,
    };
    let mut table = Table::new(
        format!("Werner [{d},{d}] sweep"),
        vec!["kind", "p", "poly2", "poly3", "detected2", "detected3"],
    );
    let row = |kind: &str, p: f64, flags: bool| -> Result<Vec<Cell>, Failure> {
        let p2 = werner_poly_2(d, p)?;
        let p3 = if third { Some(werner_poly_3(d, p)?) } else { None };
        let flag = |v: Option<f64>| -> Cell {
            match (flags, v) {
                (true, Some(v)) => detected(v).into(),
                _ => Cell::Empty,
            }
        };
        Ok(vec![kind.into(), p.into(), p2.into(), p3.into(), flag(Some(p2)), flag(p3)])
    };
    for k in 0..points {
        let p = p_min + (p_max - p_min) * k as f64 / (points - 1) as f64;
        table.push(row("grid", p, true)?);
    }
    let t2 = werner_threshold_2(d)?;
    table.push(row("threshold2", t2, false)?);
    table.note(format!("purity criterion detects for p > {t2}"));
    if third {
        let t3 = werner_threshold_3(d)?;
        table.push(row("threshold3", t3, false)?);
        table.note(format!("third-order criterion detects for p > {t3}"));
    }
    let ppt = ppt_threshold(d)?;
    table.push(row("ppt", ppt, false)?);
    table.note(format!("entangled (NPT) for p > {ppt}"));
    Ok(table)
}

pub fn selftest(perturb: Option<f64>) -> (Table, bool) {
    let report = selftest::run(SelftestOptions {
        w_perturbation: perturb,
    });
    let mut table = Table::new("self-test", vec!["check", "passed", "worst", "tolerance"]);
    for c in &report.checks {
        table.push(vec![
            c.name.clone().into(),
            c.passed.into(),
            c.worst.into(),
            c.tolerance.into(),
        ]);
    }
    for line in &report.identification {
        table.note(line.clone());
    }
    let passed = report.passed();
    if !passed {
        for c in report.failures() {
            table.note(format!("FAILED: {c}"));
        }
    }
    (table, passed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use twirlinv::states::werner_state;

    fn value(table: &Table, name: &str) -> Cell {
        let row = table.rows.iter().find(|r| r[0] == Cell::Text(name.into()));
        row.unwrap_or_else(|| panic!("no row {name}"))[1].clone()
    }

    #[test]
    fn subset_labels_follow_party_letters() {
        let dims = DimsProfile::new(vec![2, 3, 2]).unwrap();
        assert_eq!(subset_label(&dims, 0), "purity[]");
        assert_eq!(subset_label(&dims, 0b100), "purity[A]");
        assert_eq!(subset_label(&dims, 0b011), "purity[BC]");
    }

    #[test]
    fn std_error_of_constant_is_zero() {
        assert_eq!(std_error(&[1.0]), None);
        assert_eq!(std_error(&[2.0, 2.0, 2.0]), Some(0.0));
        assert!((std_error(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn order_three_invariants_of_werner_qutrits() {
        let rho = werner_state(3, 0.48).unwrap();
        let t = invariants(&rho, 3).unwrap();
        assert_eq!(value(&t, "x0"), Cell::Num(1.0));
        assert_eq!(value(&t, "third-order.detected"), Cell::Flag(true));
        match value(&t, "oracle_residual") {
            Cell::Num(r) => assert!(r < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        assert!(werner_sweep(3, 1, 0.0, 1.0, None).is_err());
        assert!(werner_sweep(3, 5, 0.5, 0.2, None).is_err());
        assert!(werner_sweep(3, 5, 0.0, 1.5, None).is_err());
        assert!(werner_sweep(2, 5, 0.0, 1.0, Some(3)).is_err());
        let t = werner_sweep(2, 5, 0.0, 1.0, None).unwrap();
        assert_eq!(t.rows.len(), 5 + 2);
    }
}
