//! Bayesian membership inference against an aggregate smoking-rate release.
//!
//! The attacker knows the target carries a marker that makes smoking very
//! likely, and that the target's presence brings `cohort_size` marker-carrier
//! records into the table (the target plus relatives who share the marker;
//! `cohort_size = 1` is ordinary single-record membership). Two hypotheses
//! are compared:
//!
//! * **in**: the table holds the cohort plus `database_size − cohort_size`
//!   background records;
//! * **out**: the cohort's slots are filled by background records.
//!
//! The release is the smoker count, either exact or with Laplace noise of
//! scale `cohort_size / ε` (the count's sensitivity to the membership event).
//! The attacker estimates the likelihood of the observed release under each
//! hypothesis by Monte-Carlo resampling of the table and applies Bayes' rule.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, ensure_probability, Error, Result};
use crate::mechanisms::sample_laplace;

/// Resamples used to estimate each likelihood.
pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Relative slack on the e^ε odds check, absorbing floating-point rounding.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub population_size: u64,
    pub marker_smoking_rate: f64,
    pub background_smoking_rate: f64,
    pub database_size: u64,
    pub target_in_database_prior: f64,
    pub cohort_size: u64,
}

impl Default for Scenario {
    /// 1000 patients, 99% smoking among marker carriers, 30% background
    /// rate, an even prior, and a cohort sized so that the expected released
    /// rate with the target present is 52%.
    fn default() -> Self {
        let mut s = Self {
            population_size: 1000,
            marker_smoking_rate: 0.99,
            background_smoking_rate: 0.30,
            database_size: 1000,
            target_in_database_prior: 0.5,
            cohort_size: 1,
        };
        s.cohort_size = s.cohort_for_release_rate(0.52).expect("default rates are valid");
        s
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        ensure_probability("marker_smoking_rate", self.marker_smoking_rate)?;
        ensure_probability("background_smoking_rate", self.background_smoking_rate)?;
        ensure_probability("target_in_database_prior", self.target_in_database_prior)?;
        if self.database_size == 0 || self.database_size > self.population_size {
            return Err(Error::invalid(
                "database_size",
                format!("must lie in [1, population_size = {}]", self.population_size),
            ));
        }
        if self.cohort_size == 0 || self.cohort_size > self.database_size {
            return Err(Error::invalid(
                "cohort_size",
                format!("must lie in [1, database_size = {}]", self.database_size),
            ));
        }
        Ok(())
    }

    /// Cohort size whose presence moves the expected smoking rate of the
    /// table from the background rate to `rate`.
    pub fn cohort_for_release_rate(&self, rate: f64) -> Result<u64> {
        let lift = self.marker_smoking_rate - self.background_smoking_rate;
        if lift <= 0.0 || rate <= self.background_smoking_rate || rate > self.marker_smoking_rate {
            return Err(Error::invalid(
                "release rate",
                "must lie between the background and marker smoking rates",
            ));
        }
        let k = (self.database_size as f64 * (rate - self.background_smoking_rate) / lift).round();
        Ok((k as u64).clamp(1, self.database_size))
    }

    fn background_slots(&self) -> u64 {
        self.database_size - self.cohort_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Release {
    /// Exact smoker count.
    Deterministic,
    /// Smoker count plus Laplace(cohort_size / ε) noise.
    Laplace { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub prior: f64,
    /// Mean posterior over trials.
    pub posterior: f64,
    /// Posterior odds of the mean posterior over prior odds.
    pub odds_ratio: f64,
    /// True when every trial's odds ratio lay in [e^-ε, e^ε]; always false
    /// for a deterministic release, which carries no such guarantee.
    pub epsilon_bound_satisfied: bool,
    pub release: Release,
    pub trials: usize,
    pub resamples: usize,
    pub min_trial_odds_ratio: f64,
    pub max_trial_odds_ratio: f64,
    /// Trials whose observed release had zero estimated likelihood under
    /// both hypotheses; their posterior is the prior.
    pub uninformative_trials: usize,
}

/// Bayes' rule for the membership event:
/// `prior·L_in / (prior·L_in + (1−prior)·L_out)`.
pub fn membership_posterior(prior: f64, likelihood_in: f64, likelihood_out: f64) -> Result<f64> {
    ensure_probability("prior", prior)?;
    for (name, l) in [("likelihood_in", likelihood_in), ("likelihood_out", likelihood_out)] {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::invalid(name, format!("must be finite and >= 0, got {l}")));
        }
    }
    if likelihood_in == 0.0 && likelihood_out == 0.0 {
        return Err(Error::BothLikelihoodsZero);
    }
    let num = prior * likelihood_in;
    let den = num + (1.0 - prior) * likelihood_out;
    if den == 0.0 {
        // prior ∈ {0, 1} with the matching likelihood zero: the prior absorbs.
        return Ok(prior);
    }
    Ok(num / den)
}

/// Posterior from log-likelihoods, stable when both are tiny.
fn posterior_from_log(prior: f64, log_in: f64, log_out: f64) -> f64 {
    if prior == 0.0 || prior == 1.0 {
        return prior;
    }
    let log_odds = (prior / (1.0 - prior)).ln() + log_in - log_out;
    1.0 / (1.0 + (-log_odds).exp())
}

/// Attacker's Monte-Carlo model: histograms of the smoker count under each
/// hypothesis, from paired resamples that share the background records.
struct CountModel {
    hist_in: Vec<u64>,
    hist_out: Vec<u64>,
    resamples: usize,
}

impl CountModel {
    fn fit<R: Rng + ?Sized>(s: &Scenario, resamples: usize, rng: &mut R) -> Result<Self> {
        let others = binomial(s.background_slots(), s.background_smoking_rate)?;
        let cohort_in = binomial(s.cohort_size, s.marker_smoking_rate)?;
        let cohort_out = binomial(s.cohort_size, s.background_smoking_rate)?;
        let bins = s.database_size as usize + 1;
        let mut hist_in = vec![0u64; bins];
        let mut hist_out = vec![0u64; bins];
        for _ in 0..resamples {
            let shared = others.sample(rng);
            hist_in[(shared + cohort_in.sample(rng)) as usize] += 1;
            hist_out[(shared + cohort_out.sample(rng)) as usize] += 1;
        }
        Ok(Self {
            hist_in,
            hist_out,
            resamples,
        })
    }

    /// Log-likelihoods of an exact count (within ±0.5 of `observed`).
    fn log_exact(&self, observed: f64) -> (f64, f64) {
        let count = observed.round();
        let lookup = |hist: &[u64]| -> f64 {
            if count < 0.0 || count as usize >= hist.len() {
                return f64::NEG_INFINITY;
            }
            (hist[count as usize] as f64 / self.resamples as f64).ln()
        };
        (lookup(&self.hist_in), lookup(&self.hist_out))
    }

    /// Log-likelihoods of a Laplace-noised count with the given scale.
    fn log_laplace(&self, observed: f64, scale: f64) -> (f64, f64) {
        let norm = (2.0 * scale * self.resamples as f64).ln();
        let mix = |hist: &[u64]| -> f64 {
            let terms: Vec<f64> = hist
                .iter()
                .enumerate()
                .filter(|(_, &h)| h > 0)
                .map(|(c, &h)| (h as f64).ln() - (observed - c as f64).abs() / scale)
                .collect();
            log_sum_exp(&terms) - norm
        };
        (mix(&self.hist_in), mix(&self.hist_out))
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn binomial(n: u64, p: f64) -> Result<Binomial> {
    Binomial::new(n, p).map_err(|e| Error::invalid("binomial", e.to_string()))
}

/// Runs the smoking-table demonstration with [`DEFAULT_RESAMPLES`].
pub fn smoking_demo<R: Rng + ?Sized>(
    scenario: &Scenario,
    release: Release,
    rng: &mut R,
    trials: usize,
) -> Result<PosteriorReport> {
    smoking_demo_with_resamples(scenario, release, rng, trials, DEFAULT_RESAMPLES)
}

/// Simulates `trials` releases from a table that does contain the target's
/// cohort and reports the attacker's mean posterior that it does.
pub fn smoking_demo_with_resamples<R: Rng + ?Sized>(
    scenario: &Scenario,
    release: Release,
    rng: &mut R,
    trials: usize,
    resamples: usize,
) -> Result<PosteriorReport> {
    scenario.validate()?;
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    if resamples == 0 {
        return Err(Error::invalid("resamples", "must be at least 1"));
    }
    let laplace_scale = match release {
        Release::Deterministic => None,
        Release::Laplace { epsilon } => {
            ensure_positive("epsilon", epsilon)?;
            Some(scenario.cohort_size as f64 / epsilon)
        }
    };
    let model = CountModel::fit(scenario, resamples, rng)?;
    let others = binomial(scenario.background_slots(), scenario.background_smoking_rate)?;
    let cohort = binomial(scenario.cohort_size, scenario.marker_smoking_rate)?;
    let prior = scenario.target_in_database_prior;

    let mut posterior_sum = 0.0;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut uninformative = 0;
    for _ in 0..trials {
        let count = (others.sample(rng) + cohort.sample(rng)) as f64;
        let (log_in, log_out) = match laplace_scale {
            None => model.log_exact(count),
            Some(scale) => model.log_laplace(count + sample_laplace(scale, rng), scale),
        };
        if log_in == f64::NEG_INFINITY && log_out == f64::NEG_INFINITY {
            uninformative += 1;
            posterior_sum += prior;
            continue;
        }
        let ratio = (log_in - log_out).exp();
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        posterior_sum += posterior_from_log(prior, log_in, log_out);
    }
    let posterior = posterior_sum / trials as f64;
    let epsilon_bound_satisfied = match release {
        Release::Deterministic => false,
        Release::Laplace { epsilon } => {
            uninformative == 0
                && max_ratio <= epsilon.exp() * (1.0 + BOUND_SLACK)
                && min_ratio >= (-epsilon).exp() * (1.0 - BOUND_SLACK)
        }
    };
    if uninformative == trials {
        min_ratio = 1.0;
        max_ratio = 1.0;
    }
    Ok(PosteriorReport {
        prior,
        posterior,
        odds_ratio: odds_ratio(prior, posterior),
        epsilon_bound_satisfied,
        release,
        trials,
        resamples,
        min_trial_odds_ratio: min_ratio,
        max_trial_odds_ratio: max_ratio,
        uninformative_trials: uninformative,
    })
}

/// `(posterior odds) / (prior odds)`; infinite when the posterior is 1 and
/// the prior is interior, NaN-free otherwise by convention (1 at degenerate priors).
pub fn odds_ratio(prior: f64, posterior: f64) -> f64 {
    if prior <= 0.0 || prior >= 1.0 {
        return 1.0;
    }
    if posterior >= 1.0 {
        return f64::INFINITY;
    }
    (posterior / (1.0 - posterior)) / (prior / (1.0 - prior))
}
