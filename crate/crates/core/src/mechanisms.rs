//! Randomized release mechanisms.
//!
//! Every mechanism takes its random source explicitly and is otherwise pure,
//! so identical seeds and inputs always reproduce identical outputs.
//! Neighbouring databases differ by the addition or removal of one record;
//! under that convention a counting query has sensitivity 1.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// An (epsilon, delta) privacy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

#[derive(Deserialize)]
struct RawBudget {
    epsilon: f64,
    #[serde(default)]
    delta: f64,
}

impl TryFrom<RawBudget> for PrivacyBudget {
    type Error = Error;

    fn try_from(raw: RawBudget) -> Result<Self> {
        PrivacyBudget::new(raw.epsilon, raw.delta)
    }
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        ensure_positive("epsilon", epsilon)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::invalid("delta", format!("must lie in [0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    /// Pure epsilon-DP budget (delta = 0).
    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_pure(&self) -> bool {
        self.delta == 0.0
    }
}

/// L1 sensitivity of a scalar query.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensitivityBound(f64);

impl SensitivityBound {
    /// Sensitivity of a counting query under add/remove neighbours.
    pub const COUNTING: SensitivityBound = SensitivityBound(1.0);

    pub fn new(l1: f64) -> Result<Self> {
        ensure_non_negative("sensitivity", l1)?;
        Ok(Self(l1))
    }

    pub fn l1(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Laplace,
    Gaussian,
    SampleAggregate,
}

/// A released value together with the budget it consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyValue {
    pub value: f64,
    pub mechanism: MechanismKind,
    pub charged: PrivacyBudget,
}

/// An output candidate for the exponential mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    pub id: T,
    pub utility: f64,
}

impl<T> Candidate<T> {
    pub fn new(id: T, utility: f64) -> Self {
        Self { id, utility }
    }
}

/// Density of the zero-mean Laplace distribution with scale `b`.
pub fn laplace_density(eta: f64, b: f64) -> Result<f64> {
    ensure_positive("scale", b)?;
    Ok((-eta.abs() / b).exp() / (2.0 * b))
}

/// Draws one Laplace(0, `scale`) variate by inverting the CDF of a uniform
/// draw on the open interval (0, 1). A zero scale yields exactly zero.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if scale == 0.0 {
        return 0.0;
    }
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

/// Adds Laplace(Δf/ε) noise to `true_answer`.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    true_answer: f64,
    sens: SensitivityBound,
    epsilon: f64,
    rng: &mut R,
) -> Result<NoisyValue> {
    let charged = PrivacyBudget::pure(epsilon)?;
    let noise = sample_laplace(sens.l1() / epsilon, rng);
    Ok(NoisyValue {
        value: true_answer + noise,
        mechanism: MechanismKind::Laplace,
        charged,
    })
}

/// Standard deviation of the classical Gaussian mechanism,
/// `sqrt(2 ln(1.25/δ)) · Δf / ε`.
///
/// The calibration is the original (ε, δ) analysis, which is only proven for
/// ε < 1; larger ε values are accepted and evaluated with the same formula.
pub fn gaussian_sigma(epsilon: f64, delta: f64, sens: SensitivityBound) -> Result<f64> {
    ensure_positive("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() * sens.l1() / epsilon)
}

/// Adds zero-mean normal noise with standard deviation [`gaussian_sigma`].
pub fn gaussian_mechanism<R: Rng + ?Sized>(
    true_answer: f64,
    sens: SensitivityBound,
    budget: PrivacyBudget,
    rng: &mut R,
) -> Result<NoisyValue> {
    let sigma = gaussian_sigma(budget.epsilon(), budget.delta(), sens)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(NoisyValue {
        value: true_answer + sigma * z,
        mechanism: MechanismKind::Gaussian,
        charged: budget,
    })
}

/// Selection probabilities of the exponential mechanism,
/// proportional to `exp(ε·u / (2Δu))`.
pub fn exponential_probabilities(utilities: &[f64], delta_u: f64, epsilon: f64) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(Error::EmptyInput("candidates"));
    }
    ensure_positive("delta_u", delta_u)?;
    ensure_positive("epsilon", epsilon)?;
    if let Some(bad) = utilities.iter().find(|u| !u.is_finite()) {
        return Err(Error::NonFinite(format!("candidate utility {bad}")));
    }
    // Shift by the maximum so the largest weight is exactly 1.
    let max = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = utilities
        .iter()
        .map(|u| (epsilon * (u - max) / (2.0 * delta_u)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Samples one candidate via the exponential mechanism.
pub fn exponential_mechanism<'a, T, R: Rng + ?Sized>(
    candidates: &'a [Candidate<T>],
    delta_u: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<&'a Candidate<T>> {
    let utilities: Vec<f64> = candidates.iter().map(|c| c.utility).collect();
    let probs = exponential_probabilities(&utilities, delta_u, epsilon)?;
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    for (candidate, p) in candidates.iter().zip(&probs) {
        cumulative += p;
        if draw < cumulative {
            return Ok(candidate);
        }
    }
    // Rounding can leave the cumulative sum a hair below 1.
    Ok(candidates
        .iter()
        .zip(&probs)
        .rev()
        .find(|(_, p)| **p > 0.0)
        .map(|(c, _)| c)
        .expect("at least one candidate has positive probability"))
}

/// AboveThreshold-style sparse vector technique.
///
/// The threshold is perturbed once with Laplace(2/ε) noise and each answer
/// with Laplace(4·max_reports/ε) noise. The returned flags cover the queries
/// examined; the stream halts right after the `max_reports`-th positive, so
/// the output can be shorter than `answers`. Answers must have sensitivity 1.
pub fn sparse_vector<R: Rng + ?Sized>(
    answers: &[f64],
    threshold: f64,
    epsilon: f64,
    max_reports: usize,
    rng: &mut R,
) -> Result<Vec<bool>> {
    ensure_positive("epsilon", epsilon)?;
    if max_reports == 0 {
        return Err(Error::invalid("max_reports", "must be at least 1"));
    }
    let noisy_threshold = threshold + sample_laplace(2.0 / epsilon, rng);
    let query_scale = 4.0 * max_reports as f64 / epsilon;
    let mut flags = Vec::with_capacity(answers.len());
    let mut reported = 0;
    for &answer in answers {
        let above = answer + sample_laplace(query_scale, rng) >= noisy_threshold;
        flags.push(above);
        if above {
            reported += 1;
            if reported == max_reports {
                break;
            }
        }
    }
    Ok(flags)
}

/// Sample-and-aggregate over `block_count` contiguous blocks.
///
/// Each block statistic is clamped into `output_range` before averaging, which
/// bounds the sensitivity of the mean to `(hi - lo) / block_count`.
pub fn sample_and_aggregate<T, F, R>(
    records: &[T],
    block_count: usize,
    block_fn: F,
    output_range: (f64, f64),
    epsilon: f64,
    rng: &mut R,
) -> Result<NoisyValue>
where
    F: Fn(&[T]) -> f64,
    R: Rng + ?Sized,
{
    let charged = PrivacyBudget::pure(epsilon)?;
    let (lo, hi) = output_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid("output_range", format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if block_count == 0 || block_count > records.len() {
        return Err(Error::invalid(
            "block_count",
            format!("must lie in [1, {}], got {block_count}", records.len()),
        ));
    }

    let base = records.len() / block_count;
    let extra = records.len() % block_count;
    let mut start = 0;
    let mut sum = 0.0;
    for block in 0..block_count {
        let len = base + usize::from(block < extra);
        let out = block_fn(&records[start..start + len]);
        if out.is_nan() {
            return Err(Error::NonFinite(format!("block {block} statistic")));
        }
        sum += out.clamp(lo, hi);
        start += len;
    }
    let k = block_count as f64;
    let noise = sample_laplace((hi - lo) / (k * epsilon), rng);
    Ok(NoisyValue {
        value: sum / k + noise,
        mechanism: MechanismKind::SampleAggregate,
        charged,
    })
}
