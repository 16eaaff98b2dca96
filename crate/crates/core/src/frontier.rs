//! Closed-form privacy/utility/fairness bounds and Pareto analysis.
//!
//! The utility and fairness bounds are asymptotic statements whose constants
//! are left free; [`BoundConstants`] pins them (both default to 1) so every
//! number produced here is reproducible.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casestudy::{self, SyntheticSpec, TrainConfig};
use crate::error::{ensure_non_negative, ensure_open_unit, ensure_positive, Error, Result};
use crate::mechanisms::SensitivityBound;
use crate::rng::derive_seed;

/// One achievable (privacy, utility, fairness) operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub epsilon: f64,
    pub utility: f64,
    pub fairness_violation: f64,
    pub n: u64,
    pub p: f64,
    pub d: u64,
}

impl TradeoffPoint {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("epsilon", self.epsilon)?;
        if !self.utility.is_finite() {
            return Err(Error::NonFinite("utility".into()));
        }
        ensure_non_negative("fairness_violation", self.fairness_violation)?;
        ensure_open_unit("p", self.p)?;
        if self.n == 0 || self.d == 0 {
            return Err(Error::invalid("n/d", "must be positive"));
        }
        Ok(())
    }

    /// Smaller ε, higher utility and lower violation are all better; at least
    /// one comparison must be strict.
    pub fn dominates(&self, other: &TradeoffPoint) -> bool {
        let weakly = self.epsilon <= other.epsilon
            && self.utility >= other.utility
            && self.fairness_violation <= other.fairness_violation;
        let strictly = self.epsilon < other.epsilon
            || self.utility > other.utility
            || self.fairness_violation < other.fairness_violation;
        weakly && strictly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_utility: f64,
    pub c_fairness: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c_utility: 1.0,
            c_fairness: 1.0,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("c_utility", self.c_utility)?;
        ensure_positive("c_fairness", self.c_fairness)
    }
}

/// Targets for the joint utility/fairness feasibility question.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySpec {
    /// Utility achievable without privacy.
    pub u0: f64,
    pub u_threshold: f64,
    pub f_target: f64,
    pub d: u64,
    /// Minority share of the population.
    pub p: f64,
}

impl FeasibilitySpec {
    pub const DEFAULT_U_THRESHOLD: f64 = 0.5;

    pub fn new(u0: f64, f_target: f64, d: u64, p: f64) -> Result<Self> {
        let spec = Self {
            u0,
            u_threshold: Self::DEFAULT_U_THRESHOLD,
            f_target,
            d,
            p,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.u0.is_finite() || !self.u_threshold.is_finite() {
            return Err(Error::NonFinite("utility target".into()));
        }
        ensure_positive("f_target", self.f_target)?;
        ensure_open_unit("p", self.p)?;
        if self.d == 0 {
            return Err(Error::invalid("d", "must be positive"));
        }
        Ok(())
    }
}

fn ensure_count(name: &'static str, n: f64) -> Result<()> {
    if n.is_finite() && n >= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be >= 1, got {n}")))
    }
}

/// Lower bound on the mean squared error of a private mean estimate:
/// sampling variance `σ²/n` plus privacy noise `Δ²/(ε²n)`.
pub fn mse_lower_bound(sigma2_theta: f64, n: f64, sens: SensitivityBound, epsilon: f64) -> Result<f64> {
    ensure_non_negative("sigma2_theta", sigma2_theta)?;
    ensure_count("n", n)?;
    ensure_positive("epsilon", epsilon)?;
    let delta = sens.l1();
    Ok(sigma2_theta / n + delta * delta / (epsilon * epsilon * n))
}

/// `u0 − c_utility · d / (ε n)`.
pub fn utility_bound(u0: f64, d: f64, epsilon: f64, n: f64, consts: BoundConstants) -> Result<f64> {
    if !u0.is_finite() {
        return Err(Error::NonFinite("u0".into()));
    }
    ensure_count("d", d)?;
    ensure_positive("epsilon", epsilon)?;
    ensure_count("n", n)?;
    consts.validate()?;
    Ok(u0 - utility_penalty(d, epsilon, n, consts))
}

fn utility_penalty(d: f64, epsilon: f64, n: f64, consts: BoundConstants) -> f64 {
    consts.c_utility * d / (epsilon * n)
}

/// `c_fairness / (ε √(n p))`: the fairness violation floor for a subgroup of
/// expected size `n p`.
pub fn fairness_bound(epsilon: f64, n: f64, p: f64, consts: BoundConstants) -> Result<f64> {
    ensure_positive("epsilon", epsilon)?;
    ensure_count("n", n)?;
    ensure_open_unit("p", p)?;
    consts.validate()?;
    Ok(fairness_term(epsilon, n, p, consts))
}

fn fairness_term(epsilon: f64, n: f64, p: f64, consts: BoundConstants) -> f64 {
    consts.c_fairness / (epsilon * (n * p).sqrt())
}

/// Sampling and DP-noise standard errors of a subgroup proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub se_sampling: f64,
    pub se_dp: f64,
    pub ratio: f64,
}

/// Standard errors for estimating a proportion `q` from `n_p` subgroup
/// records, with and without Laplace noise at level ε.
pub fn se_ratio(q: f64, n_p: f64, epsilon: f64) -> Result<StandardErrors> {
    ensure_open_unit("q", q)?;
    ensure_count("n_p", n_p)?;
    ensure_positive("epsilon", epsilon)?;
    let se_sampling = (q * (1.0 - q) / n_p).sqrt();
    let se_dp = std::f64::consts::SQRT_2 / (epsilon * n_p);
    Ok(StandardErrors {
        se_sampling,
        se_dp,
        ratio: se_dp / se_sampling,
    })
}

/// Group-level estimation error `1/√(n_a ε²)`, with unit proportionality constant.
pub fn group_noise_se(n_a: f64, epsilon: f64) -> Result<f64> {
    ensure_count("n_a", n_a)?;
    ensure_positive("epsilon", epsilon)?;
    Ok(1.0 / (n_a * epsilon * epsilon).sqrt())
}

/// Whether both the utility clause and the fairness clause hold at (ε, n).
pub fn feasible(spec: &FeasibilitySpec, epsilon: f64, n: f64, consts: BoundConstants) -> Result<bool> {
    spec.validate()?;
    consts.validate()?;
    ensure_positive("epsilon", epsilon)?;
    ensure_count("n", n)?;
    let d = spec.d as f64;
    let utility_ok = utility_penalty(d, epsilon, n, consts) < spec.u0 - spec.u_threshold;
    let fairness_ok = fairness_term(epsilon, n, spec.p, consts) < spec.f_target;
    Ok(utility_ok && fairness_ok)
}

/// Smallest n at which both clauses of [`feasible`] hold (they hold for every
/// n strictly above it): the larger of the utility-derived and the
/// fairness-derived thresholds.
pub fn critical_sample_size(spec: &FeasibilitySpec, epsilon: f64, consts: BoundConstants) -> Result<f64> {
    spec.validate()?;
    consts.validate()?;
    ensure_positive("epsilon", epsilon)?;
    let margin = spec.u0 - spec.u_threshold;
    if margin <= 0.0 {
        return Err(Error::Infeasible(format!(
            "u0 = {} does not exceed the utility threshold {}",
            spec.u0, spec.u_threshold
        )));
    }
    let from_utility = consts.c_utility * spec.d as f64 / (epsilon * margin);
    let from_fairness =
        consts.c_fairness.powi(2) / (epsilon.powi(2) * spec.p * spec.f_target.powi(2));
    Ok(from_utility.max(from_fairness))
}

/// Returns the nondominated points, in input order. Exact duplicates of a
/// nondominated point are all kept.
pub fn pareto_front(points: &[TradeoffPoint]) -> Result<Vec<TradeoffPoint>> {
    Ok(pareto_mask(points)?
        .into_iter()
        .zip(points)
        .filter_map(|(keep, p)| keep.then_some(*p))
        .collect())
}

/// Per-point nondominated flags.
///
/// Points are visited in lexicographic order (ε ascending, utility
/// descending, violation ascending). Any dominator of a point precedes it in
/// that order, and by transitivity some nondominated dominator does, so each
/// point only needs checking against the front accepted so far.
pub fn pareto_mask(points: &[TradeoffPoint]) -> Result<Vec<bool>> {
    if points.is_empty() {
        return Err(Error::EmptyInput("points"));
    }
    for p in points {
        p.validate()?;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pa.epsilon
            .total_cmp(&pb.epsilon)
            .then(pb.utility.total_cmp(&pa.utility))
            .then(pa.fairness_violation.total_cmp(&pb.fairness_violation))
    });
    let mut front: Vec<usize> = Vec::new();
    let mut mask = vec![false; points.len()];
    for i in order {
        if !front.iter().any(|&f| points[f].dominates(&points[i])) {
            front.push(i);
            mask[i] = true;
        }
    }
    Ok(mask)
}

/// Grid of privacy levels and sample sizes to sweep; also the JSON grid-file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub epsilon: Vec<f64>,
    pub n: Vec<u64>,
}

/// Settings for the simulation-backed evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSettings {
    /// Template for the synthetic data; group sizes are overwritten per cell
    /// from (n, p), and `d` from the feasibility spec.
    pub synthetic: SyntheticSpec,
    pub train: TrainConfig,
    pub target_delta: f64,
    pub seeds: u32,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluator {
    /// Utility from the utility bound, violation from the fairness bound.
    Analytic,
    /// Mean test accuracy and demographic-parity gap of DP-trained models.
    Empirical(EmpiricalSettings),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: TradeoffPoint,
    pub feasible: bool,
    pub pareto: bool,
}

/// Evaluates every (ε, n) cell of `grid` (ε-major order) and tags each point
/// as feasible and/or on the Pareto front of the sweep.
pub fn sweep(
    grid: &SweepGrid,
    spec: &FeasibilitySpec,
    evaluator: &Evaluator,
    consts: BoundConstants,
) -> Result<Vec<SweepRow>> {
    if grid.epsilon.is_empty() || grid.n.is_empty() {
        return Err(Error::EmptyInput("sweep grid"));
    }
    spec.validate()?;
    consts.validate()?;
    let cells: Vec<(f64, u64)> = grid
        .epsilon
        .iter()
        .flat_map(|&e| grid.n.iter().map(move |&n| (e, n)))
        .collect();

    let points: Vec<TradeoffPoint> = match evaluator {
        Evaluator::Analytic => cells
            .iter()
            .map(|&(epsilon, n)| {
                Ok(TradeoffPoint {
                    epsilon,
                    utility: utility_bound(spec.u0, spec.d as f64, epsilon, n as f64, consts)?,
                    fairness_violation: fairness_bound(epsilon, n as f64, spec.p, consts)?,
                    n,
                    p: spec.p,
                    d: spec.d,
                })
            })
            .collect::<Result<_>>()?,
        Evaluator::Empirical(settings) => cells
            .par_iter()
            .enumerate()
            .map(|(index, &(epsilon, n))| empirical_cell(settings, spec, epsilon, n, index as u64))
            .collect::<Result<_>>()?,
    };

    let mask = pareto_mask(&points)?;
    points
        .into_iter()
        .zip(mask)
        .map(|(point, pareto)| {
            Ok(SweepRow {
                feasible: feasible(spec, point.epsilon, point.n as f64, consts)?,
                point,
                pareto,
            })
        })
        .collect()
}

fn empirical_cell(
    settings: &EmpiricalSettings,
    spec: &FeasibilitySpec,
    epsilon: f64,
    n: u64,
    cell: u64,
) -> Result<TradeoffPoint> {
    if settings.seeds == 0 {
        return Err(Error::invalid("seeds", "must be at least 1"));
    }
    let n1 = ((n as f64 * spec.p).round() as usize).max(1);
    let n0 = (n as usize).saturating_sub(n1).max(1);
    let synthetic = SyntheticSpec {
        n0,
        n1,
        d: spec.d as usize,
        ..settings.synthetic
    };
    let cell_seed = derive_seed(settings.master_seed, cell);
    let mut utility = 0.0;
    let mut violation = 0.0;
    for s in 0..settings.seeds {
        let seed = derive_seed(cell_seed, s as u64);
        let outcome = casestudy::run_private_trial(
            &synthetic,
            &settings.train,
            epsilon,
            settings.target_delta,
            seed,
        )?;
        utility += outcome.overall_accuracy;
        violation += outcome.demographic_parity_gap;
    }
    let k = settings.seeds as f64;
    Ok(TradeoffPoint {
        epsilon,
        utility: utility / k,
        fairness_violation: violation / k,
        n,
        p: spec.p,
        d: spec.d,
    })
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,n,p,d,utility,fairness_violation,feasible,pareto";

/// Writes sweep rows as CSV, reals with six decimals.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let p = &row.point;
        writeln!(
            out,
            "{:.6},{},{:.6},{},{:.6},{:.6},{},{}",
            p.epsilon, p.n, p.p, p.d, p.utility, p.fairness_violation, row.feasible, row.pareto
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn c1() -> BoundConstants {
        BoundConstants::default()
    }

    fn pt(epsilon: f64, utility: f64, fairness_violation: f64) -> TradeoffPoint {
        TradeoffPoint {
            epsilon,
            utility,
            fairness_violation,
            n: 100,
            p: 0.5,
            d: 1,
        }
    }

    /// All-pairs domination check, independent of the sorted sweep.
    fn brute_front(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
        points
            .iter()
            .filter(|a| !points.iter().any(|b| b.dominates(a)))
            .copied()
            .collect()
    }

    #[test]
    fn mse_bound() {
        let one = SensitivityBound::COUNTING;
        assert!((mse_lower_bound(1.0, 100.0, one, 1.0).unwrap() - 0.02).abs() < 1e-15);
        let zero = SensitivityBound::new(0.0).unwrap();
        assert_eq!(mse_lower_bound(3.0, 7.0, zero, 0.2).unwrap(), 3.0 / 7.0);
        let grid = [0.1, 0.2, 0.5, 1.0, 2.0, 8.0];
        for w in grid.windows(2) {
            assert!(mse_lower_bound(1.0, 50.0, one, w[0]).unwrap() > mse_lower_bound(1.0, 50.0, one, w[1]).unwrap());
        }
        assert!(mse_lower_bound(1.0, 0.0, one, 1.0).is_err());
        assert!(mse_lower_bound(-1.0, 5.0, one, 1.0).is_err());
        assert!(mse_lower_bound(1.0, 5.0, one, 0.0).is_err());
    }

    #[test]
    fn utility_bound_values() {
        assert!((utility_bound(0.9, 10.0, 1.0, 1000.0, c1()).unwrap() - 0.89).abs() < 1e-12);
        let gap = 0.9 - utility_bound(0.9, 10.0, 1.0, 1e9, c1()).unwrap();
        assert!(gap < 1e-7 && gap > 0.0);
        let p1 = 0.9 - utility_bound(0.9, 10.0, 0.5, 400.0, c1()).unwrap();
        let p2 = 0.9 - utility_bound(0.9, 10.0, 0.5, 800.0, c1()).unwrap();
        assert!((p1 / p2 - 2.0).abs() < 1e-9);
        assert!(utility_bound(0.9, 10.0, 0.0, 10.0, c1()).is_err());
    }

    #[test]
    fn fairness_bound_values() {
        // Subgroups of 10000 and 100 records.
        let majority = fairness_bound(1.0, 20_000.0, 0.5, c1()).unwrap();
        let minority = fairness_bound(1.0, 200.0, 0.5, c1()).unwrap();
        assert!((minority / majority - 10.0).abs() < 1e-12);
        assert!((fairness_bound(1.0, 5000.0, 0.1, c1()).unwrap() - 0.044_721_359_549_995_8).abs() < 1e-12);
        let a = fairness_bound(1.0, 300.0, 0.2, c1()).unwrap();
        let b = fairness_bound(2.0, 300.0, 0.2, c1()).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(fairness_bound(1.0, 100.0, 0.0, c1()).is_err());
        assert!(fairness_bound(1.0, 100.0, 1.0, c1()).is_err());
    }

    #[test]
    fn se_ratio_values() {
        let se = se_ratio(0.5, 100.0, 1.0).unwrap();
        assert!((se.se_sampling - 0.05).abs() < 1e-15);
        assert!((se.se_dp - 0.014_142_135_623_730_95).abs() < 1e-15);
        assert!((se.ratio - 0.282_842_712_474_619).abs() < 1e-12);
        let a = se_ratio(0.2, 64.0, 0.7).unwrap().ratio;
        let b = se_ratio(0.8, 64.0, 0.7).unwrap().ratio;
        assert!((a - b).abs() < 1e-12);
        let c = se_ratio(0.2, 256.0, 0.7).unwrap().ratio;
        assert!((a / c - 2.0).abs() < 1e-12);
        assert!(se_ratio(0.0, 10.0, 1.0).is_err());
        assert!(se_ratio(1.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn group_noise_se_values() {
        assert!((group_noise_se(5000.0, 1.0).unwrap() - 0.014_142_135_623_730_95).abs() < 1e-15);
        assert!((group_noise_se(500.0, 1.0).unwrap() - 0.044_721_359_549_995_8).abs() < 1e-15);
        let r = group_noise_se(500.0, 1.0).unwrap() / group_noise_se(5000.0, 1.0).unwrap();
        assert!((r - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn feasibility_examples() {
        let spec = FeasibilitySpec::new(0.9, 0.05, 100, 0.1).unwrap();
        assert!(!feasible(&spec, 0.1, 1.0, c1()).unwrap());
        assert!(feasible(&spec, 0.1, 1e15, c1()).unwrap());

        let fair = FeasibilitySpec::new(1.5, 0.05, 1, 0.1).unwrap();
        assert!((critical_sample_size(&fair, 1.0, c1()).unwrap() - 4000.0).abs() < 1e-9);
        let util = FeasibilitySpec::new(0.6, 1.0, 1_000_000, 0.5).unwrap();
        assert!((critical_sample_size(&util, 1.0, c1()).unwrap() - 1e7).abs() < 1e-3);

        let bad = FeasibilitySpec::new(0.5, 0.05, 1, 0.1).unwrap();
        assert!(matches!(critical_sample_size(&bad, 1.0, c1()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn critical_size_monotone_on_grid() {
        let base = FeasibilitySpec::new(0.8, 0.05, 20, 0.2).unwrap();
        let n = |s: &FeasibilitySpec, e: f64| critical_sample_size(s, e, c1()).unwrap();
        for w in [0.1, 0.2, 0.5, 1.0, 2.0].windows(2) {
            assert!(n(&base, w[0]) > n(&base, w[1]));
        }
        for w in [0.05, 0.1, 0.3, 0.6].windows(2) {
            let (a, b) = (FeasibilitySpec { p: w[0], ..base }, FeasibilitySpec { p: w[1], ..base });
            assert!(n(&a, 1.0) > n(&b, 1.0));
        }
        for w in [0.01, 0.02, 0.05, 0.2].windows(2) {
            let (a, b) = (
                FeasibilitySpec { f_target: w[0], ..base },
                FeasibilitySpec { f_target: w[1], ..base },
            );
            assert!(n(&a, 1.0) > n(&b, 1.0));
        }
    }

    #[test]
    fn feasible_agrees_with_critical_size_on_random_specs() {
        let mut rng = seeded(21);
        for _ in 0..500 {
            let spec = FeasibilitySpec {
                u0: rng.random_range(0.55..1.5),
                u_threshold: 0.5,
                f_target: rng.random_range(0.01..0.5),
                d: rng.random_range(1..1000),
                p: rng.random_range(0.01..0.99),
            };
            let eps = rng.random_range(0.05..5.0);
            let consts = BoundConstants {
                c_utility: rng.random_range(0.1..3.0),
                c_fairness: rng.random_range(0.1..3.0),
            };
            let n_star = critical_sample_size(&spec, eps, consts).unwrap();
            let above = (n_star * (1.0 + 1e-6)).max(1.0);
            assert!(feasible(&spec, eps, above, consts).unwrap());
            if n_star * (1.0 - 1e-6) >= 1.0 {
                assert!(!feasible(&spec, eps, n_star * (1.0 - 1e-6), consts).unwrap());
            }
        }
    }

    #[test]
    fn pareto_small_cases() {
        assert!(matches!(pareto_front(&[]), Err(Error::EmptyInput(_))));
        let a = pt(1.0, 0.8, 0.1);
        assert_eq!(pareto_front(&[a]).unwrap(), vec![a]);
        let worse = pt(2.0, 0.7, 0.2);
        assert_eq!(pareto_front(&[worse, a]).unwrap(), vec![a]);
        // Duplicates of a nondominated point are all retained.
        assert_eq!(pareto_front(&[a, worse, a]).unwrap(), vec![a, a]);
        // Incomparable points both survive, in input order.
        let b = pt(0.5, 0.6, 0.1);
        assert_eq!(pareto_front(&[a, b]).unwrap(), vec![a, b]);
        let mut nan = a;
        nan.utility = f64::NAN;
        assert!(pareto_front(&[nan]).is_err());
    }

    #[test]
    fn pareto_matches_brute_force_on_random_sets() {
        let mut rng = seeded(31);
        for _ in 0..50 {
            let n = rng.random_range(1..=200);
            let points: Vec<_> = (0..n)
                .map(|_| {
                    // Coarse values force plenty of ties and duplicates.
                    pt(
                        rng.random_range(1..8) as f64 * 0.25,
                        rng.random_range(0..10) as f64 * 0.1,
                        rng.random_range(0..10) as f64 * 0.05,
                    )
                })
                .collect();
            assert_eq!(pareto_front(&points).unwrap(), brute_front(&points));
        }
    }

    proptest! {
        #[test]
        fn pareto_front_properties(raw in proptest::collection::vec((0.01f64..5.0, -1.0f64..1.0, 0.0f64..1.0), 1..60)) {
            let points: Vec<_> = raw.iter().map(|&(e, u, f)| pt(e, u, f)).collect();
            let front = pareto_front(&points).unwrap();
            prop_assert!(!front.is_empty());
            for a in &front {
                prop_assert!(!front.iter().any(|b| b.dominates(a)));
            }
            for p in &points {
                if !front.contains(p) {
                    prop_assert!(front.iter().any(|f| f.dominates(p)));
                }
            }
        }

        #[test]
        fn feasibility_is_monotone_in_n(
            u0 in 0.51f64..2.0, f in 0.01f64..1.0, d in 1u64..500, p in 0.01f64..0.99,
            eps in 0.05f64..5.0, n in 1.0f64..1e7, factor in 1.0f64..100.0,
        ) {
            let spec = FeasibilitySpec::new(u0, f, d, p).unwrap();
            if feasible(&spec, eps, n, c1()).unwrap() {
                prop_assert!(feasible(&spec, eps, n * factor, c1()).unwrap());
            }
        }

        #[test]
        fn group_noise_se_identity(n in 1.0f64..1e9, eps in 1e-3f64..100.0) {
            let se = group_noise_se(n, eps).unwrap();
            prop_assert!((se * n.sqrt() * eps - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_sweep_cells() {
        let spec = FeasibilitySpec::new(0.9, 0.05, 10, 0.1).unwrap();
        let one = SweepGrid { epsilon: vec![1.0], n: vec![1000] };
        let rows = sweep(&one, &spec, &Evaluator::Analytic, c1()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].point.utility, utility_bound(0.9, 10.0, 1.0, 1000.0, c1()).unwrap());
        assert_eq!(rows[0].point.fairness_violation, fairness_bound(1.0, 1000.0, 0.1, c1()).unwrap());
        assert!(rows[0].pareto);

        let grid = SweepGrid { epsilon: vec![0.5, 1.0, 2.0], n: vec![100, 1000, 100_000] };
        let rows = sweep(&grid, &spec, &Evaluator::Analytic, c1()).unwrap();
        assert_eq!(rows.len(), 9);
        for (i, row) in rows.iter().enumerate() {
            let (e, n) = (grid.epsilon[i / 3], grid.n[i % 3] as f64);
            // Recomputed from the raw formulas.
            assert!((row.point.utility - (0.9 - 10.0 / (e * n))).abs() < 1e-12);
            assert!((row.point.fairness_violation - 1.0 / (e * (n * 0.1).sqrt())).abs() < 1e-12);
            let expect_feasible = 10.0 / (e * n) < 0.4 && 1.0 / (e * (n * 0.1).sqrt()) < 0.05;
            assert_eq!(row.feasible, expect_feasible);
        }
        let fixed_n: Vec<f64> = rows.iter().filter(|r| r.point.n == 1000).map(|r| r.point.utility).collect();
        assert!(fixed_n.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(rows, sweep(&grid, &spec, &Evaluator::Analytic, c1()).unwrap());

        let mut csv = Vec::new();
        write_sweep_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
        assert_eq!(text.lines().count(), 10);
        assert!(text.ends_with('\n'));

        let empty = SweepGrid { epsilon: vec![], n: vec![1] };
        assert!(sweep(&empty, &spec, &Evaluator::Analytic, c1()).is_err());
    }
}
