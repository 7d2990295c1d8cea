//! Inner loop (outcome statistics at fixed local unitaries) and outer loop
//! (Haar averaging) of the randomized measurement protocol.
//!
//! Order 2 collects, for every subset `Q` of parties, the average of
//! `p(I1|U) p(I2|U)` over index pairs that differ exactly on `Q`. Order 3
//! (bipartite only) collects ten averages of `p(I1|U) p(I2|U) p(I3|U)`,
//! one per class of equality patterns on the two sides. Classes are listed
//! A-major: `y0..y2 = (distinct, {distinct, pair, equal})`,
//! `y3 = (pair, distinct)`, `y4 = (pair, pair)` with the same rounds
//! coinciding on both sides, `y5 = (pair, pair)` with different rounds,
//! `y6 = (pair, equal)`, `y7..y9 = (equal, {distinct, pair, equal})`.
//!
//! Each component is an average over every representative index tuple of its
//! class, not a sum, so a maximally mixed state gives `1 / total^n` everywhere.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rayon::prelude::*;

use crate::haar::{sample_haar_with, RngStream};
use crate::states::{local_product, DensityMatrix, DimsProfile};
use crate::sum::CompensatedSum;
use crate::{CMatrix, Error, Result};

/// `p(I | U_1 (x) ... (x) U_N)` over all multi-indices `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    pub dims: DimsProfile,
    pub probs: Vec<f64>,
}

/// Outcome probabilities `<I| U^dagger rho U |I>` for `U` the product of the
/// local unitaries.
pub fn outcome_distribution(
    rho: &DensityMatrix,
    unitaries: &[CMatrix],
) -> Result<OutcomeDistribution> {
    let u = local_product(rho.dims(), unitaries)?;
    Ok(OutcomeDistribution {
        dims: rho.dims().clone(),
        probs: diagonal_in_basis(rho.matrix(), &u),
    })
}

fn diagonal_in_basis(rho: &CMatrix, u: &CMatrix) -> Vec<f64> {
    let v = rho * u;
    (0..u.ncols())
        .map(|i| {
            let p: f64 = u
                .column(i)
                .iter()
                .zip(v.column(i).iter())
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            // rounding can push tiny probabilities below zero
            if p < 0.0 {
                0.0
            } else {
                p
            }
        })
        .collect()
}

/// Second-order twirl statistics, indexed by the subset mask `Q` of parties
/// whose outcomes differ.
#[derive(Debug, Clone, PartialEq)]
pub struct YVector2 {
    pub dims: DimsProfile,
    pub values: Vec<f64>,
}

impl YVector2 {
    /// Number of ordered index pairs with difference set exactly `q`.
    pub fn class_count(dims: &DimsProfile, q: usize) -> f64 {
        (0..dims.parties())
            .map(|l| {
                let d = dims.dim(l) as f64;
                if q & dims.party_bit(l) != 0 {
                    d * (d - 1.0)
                } else {
                    d
                }
            })
            .product()
    }

    /// Per-class sums `count(Q) * y(Q)`.
    pub fn class_sums(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(q, v)| v * Self::class_count(&self.dims, q))
            .collect()
    }
}

/// Third-order twirl statistics of a bipartite system (see module docs for
/// the component order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YVector3 {
    pub d_a: usize,
    pub d_b: usize,
    pub values: [f64; 10],
}

/// Pattern code of three local outcomes: 0 all distinct, 1 (`i1 = i2`),
/// 2 (`i2 = i3`), 3 (`i1 = i3`), 4 all equal. Matches the row order of
/// [`crate::weingarten::s_matrix`] at `n = 3`.
pub fn triple_code(i1: usize, i2: usize, i3: usize) -> usize {
    match (i1 == i2, i2 == i3, i1 == i3) {
        (true, true, _) => 4,
        (true, false, _) => 1,
        (false, true, _) => 2,
        (false, false, true) => 3,
        (false, false, false) => 0,
    }
}

/// Component of [`YVector3`] receiving a pair of side pattern codes.
pub fn y3_component(code_a: usize, code_b: usize) -> usize {
    let class = |c: usize| match c {
        0 => 0,
        4 => 2,
        _ => 1,
    };
    match (class(code_a), class(code_b)) {
        (0, cb) => cb,
        (1, 0) => 3,
        (1, 1) => {
            if code_a == code_b {
                4
            } else {
                5
            }
        }
        (1, _) => 6,
        (_, cb) => 7 + cb,
    }
}

/// Ordered index triples in each [`YVector3`] component.
pub fn y3_counts(d_a: usize, d_b: usize) -> [f64; 10] {
    let side = |d: usize| {
        let d = d as f64;
        [d * (d - 1.0) * (d - 2.0), d * (d - 1.0), d * (d - 1.0), d * (d - 1.0), d]
    };
    let (sa, sb) = (side(d_a), side(d_b));
    let mut out = [0.0; 10];
    for ca in 0..5 {
        for cb in 0..5 {
            out[y3_component(ca, cb)] += sa[ca] * sb[cb];
        }
    }
    out
}

/// How a product of probabilities is estimated from finite shot counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProductEstimator {
    /// Ordered tuples of distinct shots; unbiased for every tuple.
    #[default]
    DistinctShots,
    /// Products of empirical frequencies. Biased at order `1 / shots` for
    /// tuples with repeated indices.
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub n_unitaries: usize,
    /// 0 means exact outcome probabilities (no shot noise).
    pub shots: usize,
    pub master_seed: u64,
    pub product_estimator: ProductEstimator,
    /// Contiguous blocks of outer-loop repetitions used for standard errors
    /// and as the unit of parallel work.
    pub batches: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_unitaries: 1000,
            shots: 0,
            master_seed: crate::haar::DEFAULT_SEED,
            product_estimator: ProductEstimator::DistinctShots,
            batches: 32,
        }
    }
}

impl EstimatorConfig {
    pub fn analytic(n_unitaries: usize, master_seed: u64) -> Self {
        Self {
            n_unitaries,
            master_seed,
            ..Self::default()
        }
    }

    fn validate(&self, max_order: usize) -> Result<()> {
        if self.n_unitaries == 0 {
            return Err(Error::InvalidConfig("n_unitaries must be >= 1".into()));
        }
        if self.batches == 0 {
            return Err(Error::InvalidConfig("batches must be >= 1".into()));
        }
        if self.shots != 0
            && self.shots < max_order
            && self.product_estimator == ProductEstimator::DistinctShots
        {
            return Err(Error::InvalidConfig(format!(
                "order {max_order} needs shots = 0 or shots >= {max_order}, got {}",
                self.shots
            )));
        }
        Ok(())
    }
}

/// Mean over all unitaries plus the means of each contiguous batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batched<T> {
    pub mean: T,
    pub batch_means: Vec<T>,
    pub batch_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub y2: Option<Batched<YVector2>>,
    pub y3: Option<Batched<YVector3>>,
}

/// Read-only simulator of the outer loop; shareable across worker threads.
#[derive(Debug)]
pub struct Simulator<'a> {
    rho: &'a DensityMatrix,
    order2: Option<Order2Plan>,
    order3: Option<Order3Plan>,
}

#[derive(Debug)]
struct Order2Plan {
    /// For each subset `R`, the flattened index with the digits of `R` zeroed.
    keys: Vec<Vec<usize>>,
    counts: Vec<f64>,
}

#[derive(Debug)]
struct Order3Plan {
    d_a: usize,
    d_b: usize,
    /// `y3_component` of every ordered triple of flattened outcomes.
    component: Vec<u8>,
}

impl<'a> Simulator<'a> {
    pub fn new(rho: &'a DensityMatrix, order2: bool, order3: bool) -> Result<Self> {
        let dims = rho.dims();
        let order2 = order2.then(|| Order2Plan::new(dims));
        let order3 = if order3 {
            Some(Order3Plan::new(dims)?)
        } else {
            None
        };
        Ok(Self {
            rho,
            order2,
            order3,
        })
    }

    pub fn run(&self, cfg: &EstimatorConfig) -> Result<SimulationOutput> {
        let max_order = if self.order3.is_some() { 3 } else { 2 };
        cfg.validate(max_order)?;
        let n = cfg.n_unitaries;
        let batches = cfg.batches.min(n);
        let ranges: Vec<(usize, usize)> = (0..batches)
            .map(|b| (b * n / batches, (b + 1) * n / batches))
            .collect();
        let width2 = self.order2.as_ref().map_or(0, |p| p.counts.len());
        let width3 = if self.order3.is_some() { 10 } else { 0 };
        let sums: Vec<Vec<CompensatedSum>> = ranges
            .par_iter()
            .map(|&(lo, hi)| {
                let mut acc = vec![CompensatedSum::default(); width2 + width3];
                let mut scratch2 = vec![0.0; width2];
                let mut scratch3 = [0.0; 10];
                for u in lo..hi {
                    let stats = self.repetition(u, cfg)?;
                    if let Some(plan) = &self.order2 {
                        plan.accumulate(&stats, self.rho.dims(), &mut scratch2);
                        for (a, v) in acc.iter_mut().zip(&scratch2) {
                            a.add(*v);
                        }
                    }
                    if let Some(plan) = &self.order3 {
                        plan.accumulate(&stats, &mut scratch3);
                        for (a, v) in acc[width2..].iter_mut().zip(&scratch3) {
                            a.add(*v);
                        }
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;

        let sizes: Vec<usize> = ranges.iter().map(|(lo, hi)| hi - lo).collect();
        let mut total = vec![CompensatedSum::default(); width2 + width3];
        for batch in &sums {
            for (t, s) in total.iter_mut().zip(batch) {
                t.add(s.value());
            }
        }
        let mean_of = |sums: &[CompensatedSum], size: usize| -> Vec<f64> {
            sums.iter().map(|s| s.value() / size as f64).collect()
        };
        let overall: Vec<f64> = total.iter().map(|s| s.value() / n as f64).collect();
        let per_batch: Vec<Vec<f64>> = sums
            .iter()
            .zip(&sizes)
            .map(|(s, &size)| mean_of(s, size))
            .collect();

        let dims = self.rho.dims().clone();
        let y2 = self.order2.as_ref().map(|_| {
            let wrap = |v: &[f64]| YVector2 {
                dims: dims.clone(),
                values: v[..width2].to_vec(),
            };
            Batched {
                mean: wrap(&overall),
                batch_means: per_batch.iter().map(|b| wrap(b)).collect(),
                batch_sizes: sizes.clone(),
            }
        });
        let y3 = self.order3.as_ref().map(|plan| {
            let wrap = |v: &[f64]| {
                let mut values = [0.0; 10];
                values.copy_from_slice(&v[width2..]);
                YVector3 {
                    d_a: plan.d_a,
                    d_b: plan.d_b,
                    values,
                }
            };
            Batched {
                mean: wrap(&overall),
                batch_means: per_batch.iter().map(|b| wrap(b)).collect(),
                batch_sizes: sizes.clone(),
            }
        });
        Ok(SimulationOutput { y2, y3 })
    }

    /// One outer-loop repetition: fresh local unitaries, then either exact
    /// probabilities or shot counts.
    fn repetition(&self, u: usize, cfg: &EstimatorConfig) -> Result<RoundStatistics> {
        let dims = self.rho.dims();
        let parties = dims.parties() as u64;
        let base = u as u64 * (parties + 1);
        let locals: Vec<CMatrix> = (0..dims.parties())
            .map(|l| {
                let mut rng = RngStream::new(cfg.master_seed, base + l as u64).rng();
                sample_haar_with(dims.dim(l), &mut rng)
            })
            .collect::<Result<_>>()?;
        let dist = outcome_distribution(self.rho, &locals)?;
        if cfg.shots == 0 {
            return Ok(RoundStatistics::Probabilities(dist.probs));
        }
        let mut rng = RngStream::new(cfg.master_seed, base + parties).rng();
        let sampler = WeightedIndex::new(&dist.probs)
            .map_err(|e| Error::InvalidConfig(format!("outcome distribution: {e}")))?;
        let mut counts = vec![0.0; dist.probs.len()];
        for _ in 0..cfg.shots {
            counts[sampler.sample(&mut rng)] += 1.0;
        }
        let m = cfg.shots as f64;
        Ok(match cfg.product_estimator {
            ProductEstimator::PlugIn => {
                RoundStatistics::Probabilities(counts.iter().map(|c| c / m).collect())
            }
            ProductEstimator::DistinctShots => RoundStatistics::Counts { counts, shots: m },
        })
    }
}

/// Outcome data of one outer-loop repetition.
#[derive(Debug, Clone, PartialEq)]
pub enum RoundStatistics {
    /// Probabilities (exact or plug-in frequencies); products use them directly.
    Probabilities(Vec<f64>),
    /// Raw counts over flattened outcomes; products use ordered tuples of
    /// distinct shots.
    Counts { counts: Vec<f64>, shots: f64 },
}

impl RoundStatistics {
    pub fn from_counts(counts: &[u64]) -> Self {
        Self::Counts {
            counts: counts.iter().map(|&c| c as f64).collect(),
            shots: counts.iter().sum::<u64>() as f64,
        }
    }

    fn len(&self) -> usize {
        match self {
            Self::Probabilities(p) => p.len(),
            Self::Counts { counts, .. } => counts.len(),
        }
    }
}

/// Order-2 statistics of a single repetition, e.g. from recorded counts.
pub fn round_y2(dims: &DimsProfile, stats: &RoundStatistics) -> Result<YVector2> {
    if stats.len() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: stats.len(),
        });
    }
    if let RoundStatistics::Counts { shots, .. } = stats {
        if *shots < 2.0 {
            return Err(Error::InvalidConfig("need at least 2 shots".into()));
        }
    }
    let plan = Order2Plan::new(dims);
    let mut values = vec![0.0; dims.subsets()];
    plan.accumulate(stats, dims, &mut values);
    Ok(YVector2 {
        dims: dims.clone(),
        values,
    })
}

/// Order-3 statistics of a single repetition of a bipartite system.
pub fn round_y3(dims: &DimsProfile, stats: &RoundStatistics) -> Result<YVector3> {
    let plan = Order3Plan::new(dims)?;
    if stats.len() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: stats.len(),
        });
    }
    if let RoundStatistics::Counts { shots, .. } = stats {
        if *shots < 3.0 {
            return Err(Error::InvalidConfig("need at least 3 shots".into()));
        }
    }
    let mut values = [0.0; 10];
    plan.accumulate(stats, &mut values);
    Ok(YVector3 {
        d_a: plan.d_a,
        d_b: plan.d_b,
        values,
    })
}

impl Order2Plan {
    fn new(dims: &DimsProfile) -> Self {
        let total = dims.total();
        let keys = (0..dims.subsets())
            .map(|r| {
                (0..total)
                    .map(|i| {
                        dims.members(r)
                            .iter()
                            .fold(i, |acc, &l| acc - dims.digit(i, l) * dims.stride(l))
                    })
                    .collect()
            })
            .collect();
        let counts = (0..dims.subsets())
            .map(|q| YVector2::class_count(dims, q))
            .collect();
        Self { keys, counts }
    }

    /// Per-class averages for one repetition. `S(R)`, the sum over pairs that
    /// agree outside `R`, is a sum of squared marginals; Moebius inversion
    /// over subsets turns it into sums over exact difference sets.
    fn accumulate(&self, stats: &RoundStatistics, dims: &DimsProfile, out: &mut [f64]) {
        let subsets = self.counts.len();
        let total = dims.total();
        let mut at_most = vec![0.0; subsets];
        let mut marginal = vec![0.0; total];
        for (r, keys) in self.keys.iter().enumerate() {
            marginal.iter_mut().for_each(|m| *m = 0.0);
            let (weights, diagonal, norm) = match stats {
                RoundStatistics::Probabilities(p) => (p, 0.0, 1.0),
                RoundStatistics::Counts { counts, shots } => (counts, *shots, shots * (shots - 1.0)),
            };
            for (i, &key) in keys.iter().enumerate() {
                marginal[key] += weights[i];
            }
            let squares: f64 = marginal.iter().map(|m| m * m).sum();
            at_most[r] = (squares - diagonal) / norm;
        }
        for (q, slot) in out.iter_mut().enumerate().take(subsets) {
            let mut exact = 0.0;
            // iterate over subsets r of q
            let mut r = q;
            loop {
                let sign = if (q & !r).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                exact += sign * at_most[r];
                if r == 0 {
                    break;
                }
                r = (r - 1) & q;
            }
            *slot = exact / self.counts[q];
        }
    }
}

impl Order3Plan {
    fn new(dims: &DimsProfile) -> Result<Self> {
        if dims.parties() != 2 {
            return Err(Error::InvalidParameter(format!(
                "order-3 statistics need a bipartite state, got {} parties",
                dims.parties()
            )));
        }
        let (d_a, d_b) = (dims.dim(0), dims.dim(1));
        for d in [d_a, d_b] {
            if d < 3 {
                return Err(Error::SingularWeingarten { d });
            }
        }
        let total = d_a * d_b;
        let mut component = Vec::with_capacity(total * total * total);
        for i1 in 0..total {
            for i2 in 0..total {
                for i3 in 0..total {
                    let ca = triple_code(i1 / d_b, i2 / d_b, i3 / d_b);
                    let cb = triple_code(i1 % d_b, i2 % d_b, i3 % d_b);
                    component.push(y3_component(ca, cb) as u8);
                }
            }
        }
        Ok(Self {
            d_a,
            d_b,
            component,
        })
    }

    fn accumulate(&self, stats: &RoundStatistics, out: &mut [f64; 10]) {
        let total = self.d_a * self.d_b;
        let mut sums = [0.0; 10];
        match stats {
            RoundStatistics::Probabilities(p) => {
                for i1 in 0..total {
                    for i2 in 0..total {
                        let p12 = p[i1] * p[i2];
                        let row = &self.component[(i1 * total + i2) * total..][..total];
                        for (i3, &c) in row.iter().enumerate() {
                            sums[c as usize] += p12 * p[i3];
                        }
                    }
                }
            }
            RoundStatistics::Counts { counts, shots } => {
                let norm = shots * (shots - 1.0) * (shots - 2.0);
                for i1 in 0..total {
                    for i2 in 0..total {
                        let c12 = counts[i1] * (counts[i2] - f64::from(u8::from(i1 == i2)));
                        let row = &self.component[(i1 * total + i2) * total..][..total];
                        for (i3, &c) in row.iter().enumerate() {
                            let c3 = counts[i3]
                                - f64::from(u8::from(i3 == i1))
                                - f64::from(u8::from(i3 == i2));
                            sums[c as usize] += c12 * c3 / norm;
                        }
                    }
                }
            }
        }
        let counts = y3_counts(self.d_a, self.d_b);
        for k in 0..10 {
            out[k] = sums[k] / counts[k];
        }
    }
}

/// Outer-loop average of the second-order statistics.
pub fn estimate_y2(rho: &DensityMatrix, cfg: &EstimatorConfig) -> Result<YVector2> {
    let out = Simulator::new(rho, true, false)?.run(cfg)?;
    Ok(out.y2.expect("order 2 requested").mean)
}

/// Outer-loop average of the third-order statistics (bipartite, `d >= 3`).
pub fn estimate_y3(rho: &DensityMatrix, cfg: &EstimatorConfig) -> Result<YVector3> {
    let out = Simulator::new(rho, false, true)?.run(cfg)?;
    Ok(out.y3.expect("order 3 requested").mean)
}
