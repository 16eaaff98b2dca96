//! Synthetic two-group classification pipeline.
//!
//! Four training variants share one logistic-regression trainer:
//!
//! | variant   | privacy            | fairness penalty |
//! |-----------|--------------------|------------------|
//! | `plain`   | none               | none             |
//! | `fair`    | none               | λ·gap²           |
//! | `dp`      | clipped + Gaussian | none             |
//! | `dp_fair` | clipped + Gaussian | λ·gap²           |
//!
//! where `gap` is the difference between the two groups' mean predicted
//! probabilities. Private training charges `target_epsilon / steps` per step
//! to a [`BudgetLedger`] (basic composition) and calibrates the per-step noise
//! with [`gaussian_sigma`] at `(target_epsilon / steps, target_delta / steps)`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::BudgetLedger;
use crate::error::{ensure_non_negative, ensure_open_unit, ensure_positive, Error, Result};
use crate::fairness::{self, confusion_by_group, Group, LabeledDataset, Record};
use crate::mechanisms::{gaussian_sigma, PrivacyBudget, SensitivityBound};
use crate::rng::{derive_seed, seeded};

/// Shape of the synthetic two-group population.
///
/// Within each group, labels are Bernoulli(base rate) and features are unit
/// spherical Gaussians around class means `class_separation` apart. The
/// majority's class means differ along the first axis; the minority's along
/// the diagonal of the first two axes, so a shared linear model has to learn
/// a direction that only minority records inform.
///
/// Records carry `d + 1` features: the `d` Gaussian coordinates followed by
/// the group indicator (0 or 1), which the model may use like any other
/// column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n0: usize,
    pub n1: usize,
    pub base_rate0: f64,
    pub base_rate1: f64,
    pub d: usize,
    pub class_separation: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n0: 5000,
            n1: 500,
            base_rate0: 0.30,
            base_rate1: 0.45,
            d: 4,
            class_separation: 1.6,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n1 == 0 {
            return Err(Error::invalid("group size", "both groups need at least one record"));
        }
        if self.d == 0 {
            return Err(Error::invalid("d", "must be positive"));
        }
        ensure_open_unit("base_rate0", self.base_rate0)?;
        ensure_open_unit("base_rate1", self.base_rate1)?;
        ensure_non_negative("class_separation", self.class_separation)
    }

    fn class_axis(&self, group: Group) -> Vec<f64> {
        let mut axis = vec![0.0; self.d];
        match group {
            Group::One if self.d >= 2 => {
                axis[0] = std::f64::consts::FRAC_1_SQRT_2;
                axis[1] = std::f64::consts::FRAC_1_SQRT_2;
            }
            _ => axis[0] = 1.0,
        }
        axis
    }
}

pub fn generate_synthetic<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.n0 + spec.n1);
    for (group, n, rate) in [
        (Group::Zero, spec.n0, spec.base_rate0),
        (Group::One, spec.n1, spec.base_rate1),
    ] {
        let axis = spec.class_axis(group);
        let coin = Bernoulli::new(rate).expect("rate validated");
        for _ in 0..n {
            let label = coin.sample(rng);
            let shift = if label { 0.5 } else { -0.5 } * spec.class_separation;
            let mut features: Vec<f64> = axis
                .iter()
                .map(|a| a * shift + rng.sample::<f64, _>(StandardNormal))
                .collect();
            features.push(group.index() as f64);
            records.push(Record { features, label, group });
        }
    }
    LabeledDataset::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// `None` trains without privacy.
    pub target_epsilon: Option<f64>,
    pub target_delta: f64,
    pub fairness_lambda: f64,
    /// Seeds the mini-batch order. Privacy noise comes from the caller's stream.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 30,
            batch_size: 5500,
            clip_norm: 1.0,
            target_epsilon: None,
            target_delta: 1e-5,
            fairness_lambda: 0.0,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

impl TrainConfig {
    fn validate(&self, data: &LabeledDataset) -> Result<()> {
        if data.is_empty() {
            return Err(Error::EmptyInput("training data"));
        }
        ensure_positive("learning_rate", self.learning_rate)?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > data.len() {
            return Err(Error::invalid(
                "batch_size",
                format!("must lie in [1, {}], got {}", data.len(), self.batch_size),
            ));
        }
        ensure_non_negative("clip_norm", self.clip_norm)?;
        ensure_non_negative("fairness_lambda", self.fairness_lambda)?;
        if let Some(eps) = self.target_epsilon {
            ensure_positive("target_epsilon", eps)?;
            ensure_open_unit("target_delta", self.target_delta)?;
        }
        Ok(())
    }

    /// Optimisation steps: `epochs` passes of `len / batch_size` full batches.
    pub fn steps(&self, len: usize) -> usize {
        self.epochs * (len / self.batch_size)
    }
}

/// Logistic-regression weights; the last entry is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub weights: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(weights: &[f64], features: &[f64]) -> f64 {
    let (bias, w) = weights.split_last().expect("weights include a bias");
    w.iter().zip(features).map(|(a, b)| a * b).sum::<f64>() + bias
}

impl Model {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim + 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn predict_proba(&self, features: &[f64]) -> f64 {
        sigmoid(logit(&self.weights, features))
    }

    /// Scores of `0.5` and above classify as positive.
    pub fn predict(&self, features: &[f64]) -> bool {
        self.predict_proba(features) >= 0.5
    }

    pub fn scores(&self, data: &LabeledDataset) -> Vec<f64> {
        data.records().iter().map(|r| self.predict_proba(&r.features)).collect()
    }
}

/// Mean log-loss over `records` plus `lambda · gap²`, where `gap` is the
/// difference of the groups' mean predicted probabilities. When a group is
/// missing from `records` the penalty is zero.
pub fn objective(weights: &[f64], records: &[&Record], lambda: f64) -> f64 {
    let n = records.len() as f64;
    let mut loss = 0.0;
    for r in records {
        let z = logit(weights, &r.features);
        // log(1 + e^z) - y z, computed stably.
        let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        loss += softplus - if r.label { z } else { 0.0 };
    }
    let gap = soft_gap(weights, records).unwrap_or(0.0);
    loss / n + lambda * gap * gap
}

fn group_counts(records: &[&Record]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for r in records {
        counts[r.group.index()] += 1;
    }
    counts
}

fn soft_gap(weights: &[f64], records: &[&Record]) -> Option<f64> {
    let counts = group_counts(records);
    if counts.contains(&0) {
        return None;
    }
    let mut sums = [0.0; 2];
    for r in records {
        sums[r.group.index()] += sigmoid(logit(weights, &r.features));
    }
    Some(sums[0] / counts[0] as f64 - sums[1] / counts[1] as f64)
}

/// Per-example gradients whose mean is the gradient of [`objective`] over
/// `records`.
///
/// The penalty gradient `2λ·gap·(∇mean₀ − ∇mean₁)` is split across examples:
/// record `i` of group `g` carries `±2λ·gap·(B/n_g)·σᵢ(1−σᵢ)·x̃ᵢ`, with the
/// batch gap treated as a fixed coefficient.
pub fn per_example_gradients(weights: &[f64], records: &[&Record], lambda: f64) -> Vec<Vec<f64>> {
    let batch = records.len() as f64;
    let counts = group_counts(records);
    let gap = if lambda > 0.0 { soft_gap(weights, records) } else { None };
    records
        .iter()
        .map(|r| {
            let p = sigmoid(logit(weights, &r.features));
            let mut coef = p - if r.label { 1.0 } else { 0.0 };
            if let Some(gap) = gap {
                let sign = if r.group == Group::Zero { 1.0 } else { -1.0 };
                coef += 2.0 * lambda * gap * sign * batch / counts[r.group.index()] as f64 * p * (1.0 - p);
            }
            let mut g: Vec<f64> = r.features.iter().map(|x| coef * x).collect();
            g.push(coef);
            g
        })
        .collect()
}

/// Full gradient of [`objective`].
pub fn objective_gradient(weights: &[f64], records: &[&Record], lambda: f64) -> Vec<f64> {
    mean_of(&per_example_gradients(weights, records, lambda), weights.len())
}

fn mean_of(grads: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for g in grads {
        for (a, x) in acc.iter_mut().zip(g) {
            *a += x;
        }
    }
    let n = grads.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Rescales `g` in place so its Euclidean norm is at most `clip_norm`.
pub fn clip_to_norm(g: &mut [f64], clip_norm: f64) {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > clip_norm {
        let scale = if norm > 0.0 { clip_norm / norm } else { 0.0 };
        g.iter_mut().for_each(|x| *x *= scale);
    }
}

struct PrivateState<'a, R: Rng + ?Sized> {
    ledger: BudgetLedger,
    step_budget: PrivacyBudget,
    noise_std: f64,
    rng: &'a mut R,
}

fn train_loop<R: Rng + ?Sized>(
    data: &LabeledDataset,
    config: &TrainConfig,
    mut private: Option<PrivateState<'_, R>>,
) -> Result<(Model, Option<BudgetLedger>)> {
    let mut model = Model::zeros(data.dim());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch_rng = seeded(config.seed);
    let per_epoch = data.len() / config.batch_size;
    for _ in 0..config.epochs {
        order.shuffle(&mut batch_rng);
        for chunk in order.chunks_exact(config.batch_size).take(per_epoch) {
            let batch: Vec<&Record> = chunk.iter().map(|&i| &data.records()[i]).collect();
            let mut grads = per_example_gradients(&model.weights, &batch, config.fairness_lambda);
            let mut step = if let Some(state) = private.as_mut() {
                for g in grads.iter_mut() {
                    clip_to_norm(g, config.clip_norm);
                }
                let mut mean = mean_of(&grads, model.weights.len());
                for x in mean.iter_mut() {
                    *x += state.noise_std * state.rng.sample::<f64, _>(StandardNormal);
                }
                state.ledger = state.ledger.charge_budget(state.step_budget, "dp-sgd step")?;
                mean
            } else {
                mean_of(&grads, model.weights.len())
            };
            for (w, g) in model.weights.iter_mut().zip(step.iter_mut()) {
                *w -= config.learning_rate * *g;
            }
            if model.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite("model weights diverged; lower the learning rate".into()));
            }
        }
    }
    Ok((model, private.map(|s| s.ledger)))
}

/// Non-private mini-batch gradient descent from zero weights.
///
/// `config.fairness_lambda > 0` adds the parity penalty (the `fair` variant).
pub fn train_logistic(data: &LabeledDataset, config: &TrainConfig) -> Result<Model> {
    config.validate(data)?;
    if config.target_epsilon.is_some() {
        return Err(Error::invalid("target_epsilon", "non-private training takes no privacy target"));
    }
    let (model, _) = train_loop::<rand_chacha::ChaCha12Rng>(data, config, None)?;
    Ok(model)
}

/// Noise multiplier (noise std / clip norm) for one step under basic
/// composition across `steps` steps.
pub fn noise_multiplier(target_epsilon: f64, target_delta: f64, steps: usize) -> Result<f64> {
    let k = steps as f64;
    gaussian_sigma(target_epsilon / k, target_delta / k, SensitivityBound::COUNTING)
}

/// DP-SGD: per-example clipping, Gaussian noise on the mean gradient, and a
/// ledger charge of `target / steps` per step. Returns the model and the
/// charged ledger.
pub fn train_dp<R: Rng + ?Sized>(
    data: &LabeledDataset,
    config: &TrainConfig,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<(Model, BudgetLedger)> {
    config.validate(data)?;
    let target_epsilon = config
        .target_epsilon
        .ok_or_else(|| Error::invalid("target_epsilon", "private training needs a privacy target"))?;
    let steps = config.steps(data.len());
    let k = steps as f64;
    let step_budget = PrivacyBudget::new(target_epsilon / k, config.target_delta / k)?;
    // Refuse up front rather than failing mid-training.
    ledger.charge(target_epsilon, config.target_delta, "dp-sgd total")?;
    let multiplier = noise_multiplier(target_epsilon, config.target_delta, steps)?;
    let state = PrivateState {
        ledger: ledger.clone(),
        step_budget,
        noise_std: config.clip_norm * multiplier / config.batch_size as f64,
        rng,
    };
    let (model, ledger) = train_loop(data, config, Some(state))?;
    Ok((model, ledger.expect("private run returns its ledger")))
}

/// [`train_dp`] with a strictly positive fairness penalty.
pub fn train_dp_fair<R: Rng + ?Sized>(
    data: &LabeledDataset,
    config: &TrainConfig,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<(Model, BudgetLedger)> {
    ensure_positive("fairness_lambda", config.fairness_lambda)?;
    train_dp(data, config, ledger, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessTarget {
    DemographicParity,
    EqualizedOdds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds {
    /// Decision threshold per group; a score at or above it predicts positive.
    pub thresholds: [f64; 2],
    pub gap: f64,
    pub accuracy: f64,
}

impl GroupThresholds {
    pub const DEFAULT: [f64; 2] = [0.5, 0.5];
}

/// Per-group counts at one candidate threshold.
#[derive(Debug, Clone, Copy)]
struct CutStats {
    threshold: f64,
    predicted_pos: usize,
    true_pos: usize,
    false_pos: usize,
}

struct GroupScores {
    n: usize,
    positives: usize,
    negatives: usize,
    cuts: Vec<CutStats>,
}

fn group_cuts(scored: &mut [(f64, bool)]) -> GroupScores {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scored.len();
    let positives = scored.iter().filter(|s| s.1).count();
    let mut candidates = vec![0.0, 0.5, 1.0];
    if let (Some(lo), Some(hi)) = (scored.first(), scored.last()) {
        // everything positive / nothing positive, whatever the score range
        candidates.push(lo.0);
        candidates.push(hi.0 + 1.0);
    }
    for w in scored.windows(2) {
        if w[0].0 < w[1].0 {
            candidates.push(0.5 * (w[0].0 + w[1].0));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // suffix counts: records with index >= i
    let mut suffix_pos = vec![0usize; n + 1];
    for i in (0..n).rev() {
        suffix_pos[i] = suffix_pos[i + 1] + usize::from(scored[i].1);
    }
    let cuts = candidates
        .into_iter()
        .map(|t| {
            let first = scored.partition_point(|s| s.0 < t);
            let predicted_pos = n - first;
            let true_pos = suffix_pos[first];
            CutStats {
                threshold: t,
                predicted_pos,
                true_pos,
                false_pos: predicted_pos - true_pos,
            }
        })
        .collect();
    GroupScores {
        n,
        positives,
        negatives: n - positives,
        cuts,
    }
}

/// Grid-searches one threshold per group: the pair minimising the chosen
/// gap, then maximising accuracy among minimisers. Remaining ties go to the
/// pair with the closest thresholds, then the pair closest to 0.5.
///
/// Candidates per group are 0, 0.5, 1, the lowest score, one above the
/// highest score and every midpoint between consecutive distinct scores of
/// that group, so every achievable split of the group is searched. Thresholding released scores is
/// post-processing and consumes no privacy budget.
pub fn threshold_postprocess(
    scores: &[f64],
    data: &LabeledDataset,
    target: FairnessTarget,
) -> Result<GroupThresholds> {
    if scores.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            actual: scores.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {bad}")));
    }
    let mut per_group: [Vec<(f64, bool)>; 2] = [Vec::new(), Vec::new()];
    for (s, r) in scores.iter().zip(data.records()) {
        per_group[r.group.index()].push((*s, r.label));
    }
    for g in Group::BOTH {
        if per_group[g.index()].is_empty() {
            return Err(Error::EmptyGroup(g.index() as u8));
        }
    }
    let [mut s0, mut s1] = per_group;
    let groups = [group_cuts(&mut s0), group_cuts(&mut s1)];
    if target == FairnessTarget::EqualizedOdds {
        for (i, g) in groups.iter().enumerate() {
            if g.negatives == 0 || g.positives == 0 {
                return Err(Error::DegenerateLabels {
                    group: i as u8,
                    missing_label: u8::from(g.negatives != 0),
                });
            }
        }
    }
    let total = data.len() as f64;
    let gap_of = |a: &CutStats, b: &CutStats| -> f64 {
        let (ga, gb) = (&groups[0], &groups[1]);
        match target {
            FairnessTarget::DemographicParity => {
                (a.predicted_pos as f64 / ga.n as f64 - b.predicted_pos as f64 / gb.n as f64).abs()
            }
            FairnessTarget::EqualizedOdds => {
                let fpr = (a.false_pos as f64 / ga.negatives as f64 - b.false_pos as f64 / gb.negatives as f64).abs();
                let tpr = (a.true_pos as f64 / ga.positives as f64 - b.true_pos as f64 / gb.positives as f64).abs();
                fpr.max(tpr)
            }
        }
    };
    let correct = |g: &GroupScores, c: &CutStats| c.true_pos + (g.negatives - c.false_pos);

    const TOL: f64 = 1e-12;
    let mut best: Option<(f64, f64, f64, f64, [f64; 2])> = None;
    for a in &groups[0].cuts {
        for b in &groups[1].cuts {
            let gap = gap_of(a, b);
            let acc = (correct(&groups[0], a) + correct(&groups[1], b)) as f64 / total;
            let spread = (a.threshold - b.threshold).abs();
            let centre = (a.threshold - 0.5).abs() + (b.threshold - 0.5).abs();
            let better = match &best {
                None => true,
                Some((bg, ba, bs, bc, _)) => {
                    if gap < bg - TOL {
                        true
                    } else if gap > bg + TOL {
                        false
                    } else if acc > ba + TOL {
                        true
                    } else if acc < ba - TOL {
                        false
                    } else if spread < bs - TOL {
                        true
                    } else if spread > bs + TOL {
                        false
                    } else {
                        centre < bc - TOL
                    }
                }
            };
            if better {
                best = Some((gap, acc, spread, centre, [a.threshold, b.threshold]));
            }
        }
    }
    let (gap, accuracy, _, _, thresholds) = best.expect("candidate grids are nonempty");
    Ok(GroupThresholds {
        thresholds,
        gap,
        accuracy,
    })
}

/// Classifies each record with its group's threshold.
pub fn apply_thresholds(scores: &[f64], data: &LabeledDataset, thresholds: [f64; 2]) -> Vec<bool> {
    scores
        .iter()
        .zip(data.records())
        .map(|(s, r)| *s >= thresholds[r.group.index()])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub accuracy: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Indexed by group (0, 1).
    pub groups: [GroupRates; 2],
    pub overall_accuracy: f64,
    pub demographic_parity_gap: f64,
    pub equalized_odds_gap: f64,
    pub epsilon_spent: f64,
    pub thresholds: [f64; 2],
}

/// Scores `data`, thresholds per group (0.5 unless post-processed thresholds
/// are given) and reports per-group rates and both gaps.
pub fn evaluate(
    model: &Model,
    data: &LabeledDataset,
    ledger: Option<&BudgetLedger>,
    thresholds: Option<[f64; 2]>,
) -> Result<EvalReport> {
    if model.dim() != data.dim() {
        return Err(Error::LengthMismatch {
            expected: model.dim(),
            actual: data.dim(),
        });
    }
    let thresholds = thresholds.unwrap_or(GroupThresholds::DEFAULT);
    let preds = apply_thresholds(&model.scores(data), data, thresholds);
    let confusion = confusion_by_group(&preds, data)?;
    let rates = |g: Group| -> Result<GroupRates> {
        Ok(GroupRates {
            accuracy: confusion.accuracy(g)?,
            fpr: confusion.false_positive_rate(g)?,
            tpr: confusion.true_positive_rate(g)?,
        })
    };
    Ok(EvalReport {
        groups: [rates(Group::Zero)?, rates(Group::One)?],
        overall_accuracy: confusion.overall_accuracy().expect("nonempty"),
        demographic_parity_gap: fairness::parity_gap(&confusion)?,
        equalized_odds_gap: fairness::odds_gap(&confusion)?,
        epsilon_spent: ledger.map_or(0.0, BudgetLedger::spent_epsilon),
        thresholds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    Fair,
    Dp,
    DpFair,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Plain, Variant::Fair, Variant::Dp, Variant::DpFair];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Fair => "fair",
            Variant::Dp => "dp",
            Variant::DpFair => "dp_fair",
        }
    }

    pub fn is_private(self) -> bool {
        matches!(self, Variant::Dp | Variant::DpFair)
    }

    pub fn is_fair(self) -> bool {
        matches!(self, Variant::Fair | Variant::DpFair)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s || v.name().replace('_', "-") == s)
            .ok_or_else(|| Error::invalid("variant", format!("unknown variant {s:?}")))
    }
}

/// Everything needed to run one variant end to end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub synthetic: SyntheticSpec,
    pub train: TrainConfig,
    pub epsilon: f64,
    pub delta: f64,
    pub fairness_lambda: f64,
}

impl Default for CaseStudy {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec::default(),
            train: TrainConfig::default(),
            epsilon: 1.0,
            delta: 1e-5,
            fairness_lambda: 10.0,
        }
    }
}

/// Train and test sets for one seed; the test set is an independent draw.
pub fn seed_datasets(spec: &SyntheticSpec, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let train = generate_synthetic(spec, &mut seeded(derive_seed(seed, 0)))?;
    let test = generate_synthetic(spec, &mut seeded(derive_seed(seed, 1)))?;
    Ok((train, test))
}

/// Trains `variant` on `train` and evaluates on `test`.
pub fn run_variant_on(
    study: &CaseStudy,
    variant: Variant,
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
) -> Result<EvalReport> {
    let mut config = TrainConfig {
        seed: derive_seed(seed, 2),
        fairness_lambda: if variant.is_fair() { study.fairness_lambda } else { 0.0 },
        target_epsilon: None,
        target_delta: study.delta,
        ..study.train
    };
    config.batch_size = config.batch_size.min(train.len());
    if variant.is_private() {
        config.target_epsilon = Some(study.epsilon);
        let ledger = BudgetLedger::new(PrivacyBudget::new(study.epsilon, study.delta)?);
        let mut noise = seeded(derive_seed(seed, 3));
        let (model, ledger) = train_dp(train, &config, &ledger, &mut noise)?;
        evaluate(&model, test, Some(&ledger), None)
    } else {
        let model = train_logistic(train, &config)?;
        evaluate(&model, test, None, None)
    }
}

pub fn run_variant(study: &CaseStudy, variant: Variant, seed: u64) -> Result<EvalReport> {
    let (train, test) = seed_datasets(&study.synthetic, seed)?;
    run_variant_on(study, variant, &train, &test, seed)
}

/// Accuracy and parity gap of one private training run; used by empirical sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub overall_accuracy: f64,
    pub demographic_parity_gap: f64,
}

pub fn run_private_trial(
    spec: &SyntheticSpec,
    train: &TrainConfig,
    epsilon: f64,
    delta: f64,
    seed: u64,
) -> Result<TrialOutcome> {
    let (train_set, test_set) = seed_datasets(spec, seed)?;
    let mut config = TrainConfig {
        seed: derive_seed(seed, 2),
        target_epsilon: Some(epsilon),
        target_delta: delta,
        ..*train
    };
    config.batch_size = config.batch_size.min(train_set.len());
    let ledger = BudgetLedger::new(PrivacyBudget::new(epsilon, delta)?);
    let (model, _) = train_dp(&train_set, &config, &ledger, &mut seeded(derive_seed(seed, 3)))?;
    let preds: Vec<bool> = test_set.records().iter().map(|r| model.predict(&r.features)).collect();
    let confusion = confusion_by_group(&preds, &test_set)?;
    Ok(TrialOutcome {
        overall_accuracy: confusion.overall_accuracy().expect("nonempty"),
        demographic_parity_gap: fairness::parity_gap(&confusion)?,
    })
}

/// One row of a seed sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub variant: Variant,
    pub epsilon: Option<f64>,
    pub report: EvalReport,
}

/// Runs every variant for every seed; seeds run in parallel and each uses
/// only streams derived from its own seed.
pub fn seed_sweep(study: &CaseStudy, variants: &[Variant], seeds: &[u64]) -> Result<Vec<SweepRecord>> {
    let per_seed: Vec<Vec<SweepRecord>> = seeds
        .par_iter()
        .map(|&seed| {
            let (train, test) = seed_datasets(&study.synthetic, seed)?;
            variants
                .iter()
                .map(|&variant| {
                    Ok(SweepRecord {
                        seed,
                        variant,
                        epsilon: variant.is_private().then_some(study.epsilon),
                        report: run_variant_on(study, variant, &train, &test, seed)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

pub const SEED_SWEEP_CSV_HEADER: &str = "seed,variant,epsilon,acc0,acc1,fpr0,fpr1,dp_gap,eo_gap";

/// Writes seed-sweep rows as CSV; reals with six decimals, empty epsilon for
/// non-private variants.
pub fn write_seed_sweep_csv<W: Write>(rows: &[SweepRecord], mut out: W) -> Result<()> {
    writeln!(out, "{SEED_SWEEP_CSV_HEADER}")?;
    for row in rows {
        let r = &row.report;
        let eps = row.epsilon.map(|e| format!("{e:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            row.seed,
            row.variant.name(),
            eps,
            r.groups[0].accuracy,
            r.groups[1].accuracy,
            r.groups[0].fpr,
            r.groups[1].fpr,
            r.demographic_parity_gap,
            r.equalized_odds_gap
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::demographic_parity_gap;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(features: Vec<f64>, label: bool, group: Group) -> Record {
        Record { features, label, group }
    }

    fn small_spec() -> SyntheticSpec {
        SyntheticSpec {
            n0: 600,
            n1: 200,
            ..SyntheticSpec::default()
        }
    }

    fn full_batch(data: &LabeledDataset) -> TrainConfig {
        TrainConfig {
            batch_size: data.len(),
            ..TrainConfig::default()
        }
    }

    fn accuracy(model: &Model, data: &LabeledDataset) -> f64 {
        let hits = data
            .records()
            .iter()
            .filter(|r| model.predict(&r.features) == r.label)
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn synthetic_shape_and_base_rates() {
        let spec = SyntheticSpec::default();
        let data = generate_synthetic(&spec, &mut seeded(7)).unwrap();
        assert_eq!(data.len(), 5500);
        assert_eq!(data.dim(), spec.d + 1);
        assert_eq!(data.group_size(Group::Zero), 5000);
        assert_eq!(data.group_size(Group::One), 500);
        for (g, n, p) in [(Group::Zero, 5000.0, 0.30), (Group::One, 500.0, 0.45)] {
            let pos = data.records().iter().filter(|r| r.group == g && r.label).count() as f64;
            let sd = f64::sqrt(n * p * (1.0 - p));
            assert!((pos - n * p).abs() < 3.0 * sd, "group {g:?}: {pos}");
        }
        for r in data.records() {
            assert_eq!(*r.features.last().unwrap(), r.group.index() as f64);
        }
    }

    #[test]
    fn synthetic_validation_and_determinism() {
        let bad = [
            SyntheticSpec { n1: 0, ..small_spec() },
            SyntheticSpec { d: 0, ..small_spec() },
            SyntheticSpec { base_rate0: 1.0, ..small_spec() },
            SyntheticSpec { class_separation: -1.0, ..small_spec() },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec, &mut seeded(0)).is_err(), "{spec:?}");
        }
        let a = generate_synthetic(&small_spec(), &mut seeded(3)).unwrap();
        let b = generate_synthetic(&small_spec(), &mut seeded(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_signal_learns_majority_class() {
        let spec = SyntheticSpec {
            class_separation: 0.0,
            ..SyntheticSpec::default()
        };
        let data = generate_synthetic(&spec, &mut seeded(11)).unwrap();
        let model = train_logistic(&data, &full_batch(&data)).unwrap();
        let report = evaluate(&model, &data, None, None).unwrap();
        assert!((report.groups[0].accuracy - 0.70).abs() < 0.03, "{report:?}");
        assert!((report.groups[1].accuracy - 0.55).abs() < 0.05, "{report:?}");
    }

    #[test]
    fn wide_separation_is_learned() {
        let spec = SyntheticSpec {
            class_separation: 6.0,
            ..small_spec()
        };
        let data = generate_synthetic(&spec, &mut seeded(12)).unwrap();
        let model = train_logistic(&data, &full_batch(&data)).unwrap();
        assert!(accuracy(&model, &data) > 0.95);
    }

    #[test]
    fn two_point_toy_is_separated() {
        let data = LabeledDataset::new(vec![
            rec(vec![1.0], true, Group::Zero),
            rec(vec![-1.0], false, Group::One),
        ])
        .unwrap();
        let config = TrainConfig {
            batch_size: 2,
            epochs: 50,
            ..TrainConfig::default()
        };
        let model = train_logistic(&data, &config).unwrap();
        assert!(model.predict_proba(&[1.0]) > 0.9);
        assert!(model.predict_proba(&[-1.0]) < 0.1);
    }

    fn finite_difference(weights: &[f64], records: &[&Record], lambda: f64) -> Vec<f64> {
        let h = 1e-5;
        (0..weights.len())
            .map(|i| {
                let mut up = weights.to_vec();
                let mut down = weights.to_vec();
                up[i] += h;
                down[i] -= h;
                (objective(&up, records, lambda) - objective(&down, records, lambda)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = generate_synthetic(&small_spec(), &mut seeded(13)).unwrap();
        let records: Vec<&Record> = data.records().iter().collect();
        let mut rng = seeded(14);
        for lambda in [0.0, 10.0] {
            for _ in 0..5 {
                let w: Vec<f64> = (0..=data.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let analytic = objective_gradient(&w, &records, lambda);
                let numeric = finite_difference(&w, &records, lambda);
                let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(diff / scale < 1e-5, "lambda {lambda}: {diff} vs {scale}");
            }
        }
    }

    proptest! {
        #[test]
        fn clipping_bounds_norm(g in proptest::collection::vec(-100.0f64..100.0, 1..8), c in 0.0f64..10.0) {
            let mut clipped = g.clone();
            clip_to_norm(&mut clipped, c);
            let norm = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm <= c * (1.0 + 1e-12) + 1e-300);
            let before = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if before <= c {
                prop_assert_eq!(clipped, g);
            }
        }
    }

    #[test]
    fn private_training_validation() {
        let data = generate_synthetic(&small_spec(), &mut seeded(15)).unwrap();
        let ledger = BudgetLedger::new(PrivacyBudget::new(1.0, 1e-5).unwrap());
        let plain = full_batch(&data);
        assert!(train_dp(&data, &plain, &ledger, &mut seeded(0)).is_err());
        let private = TrainConfig {
            target_epsilon: Some(1.0),
            ..plain
        };
        assert!(train_logistic(&data, &private).is_err());
        assert!(train_dp_fair(&data, &private, &ledger, &mut seeded(0)).is_err());
        let oversized = TrainConfig {
            batch_size: data.len() + 1,
            ..private
        };
        assert!(train_dp(&data, &oversized, &ledger, &mut seeded(0)).is_err());

        let tight = BudgetLedger::new(PrivacyBudget::new(0.5, 1e-5).unwrap());
        let err = train_dp(&data, &private, &tight, &mut seeded(0)).unwrap_err();
        assert_eq!(err.name(), "BudgetExhausted");
    }

    #[test]
    fn ledger_is_charged_to_target() {
        let data = generate_synthetic(&small_spec(), &mut seeded(16)).unwrap();
        let config = TrainConfig {
            target_epsilon: Some(0.7),
            batch_size: 200,
            epochs: 3,
            ..TrainConfig::default()
        };
        let ledger = BudgetLedger::new(PrivacyBudget::new(1.0, 1e-5).unwrap());
        let (_, spent) = train_dp(&data, &config, &ledger, &mut seeded(1)).unwrap();
        assert_eq!(spent.entries().len(), config.steps(data.len()));
        assert_eq!(spent.entries().len(), 12);
        assert!((spent.spent_epsilon() - 0.7).abs() < 1e-12);
        assert!((spent.spent_delta() - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn zero_clip_never_moves() {
        let data = generate_synthetic(&small_spec(), &mut seeded(17)).unwrap();
        let config = TrainConfig {
            clip_norm: 0.0,
            target_epsilon: Some(1.0),
            ..full_batch(&data)
        };
        let ledger = BudgetLedger::new(PrivacyBudget::new(1.0, 1e-5).unwrap());
        let (model, _) = train_dp(&data, &config, &ledger, &mut seeded(2)).unwrap();
        assert!(model.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn vanishing_noise_matches_non_private() {
        let data = generate_synthetic(&small_spec(), &mut seeded(18)).unwrap();
        let plain = TrainConfig {
            clip_norm: 1e3,
            batch_size: 100,
            epochs: 4,
            ..TrainConfig::default()
        };
        let reference = train_logistic(&data, &plain).unwrap();
        let private = TrainConfig {
            target_epsilon: Some(1e15),
            ..plain
        };
        let ledger = BudgetLedger::new(PrivacyBudget::new(1e15, 1e-5).unwrap());
        let (model, _) = train_dp(&data, &private, &ledger, &mut seeded(3)).unwrap();
        for (a, b) in model.weights.iter().zip(&reference.weights) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn more_budget_means_more_accuracy() {
        let study = |epsilon| CaseStudy {
            synthetic: small_spec(),
            epsilon,
            ..CaseStudy::default()
        };
        let mean_acc = |epsilon: f64| -> f64 {
            (0..5)
                .map(|seed| run_variant(&study(epsilon), Variant::Dp, seed).unwrap().overall_accuracy)
                .sum::<f64>()
                / 5.0
        };
        assert!(mean_acc(10.0) > mean_acc(0.1));
    }

    #[test]
    fn penalty_shrinks_parity_gap() {
        let data = generate_synthetic(&SyntheticSpec::default(), &mut seeded(19)).unwrap();
        let plain = full_batch(&data);
        let fair = TrainConfig {
            fairness_lambda: 50.0,
            ..plain
        };
        let gap = |config: &TrainConfig| {
            let model = train_logistic(&data, config).unwrap();
            let preds: Vec<bool> = data.records().iter().map(|r| model.predict(&r.features)).collect();
            demographic_parity_gap(&preds, &data).unwrap()
        };
        assert!(gap(&fair) < gap(&plain));
    }

    fn toy_scored() -> (LabeledDataset, Vec<f64>) {
        let data = LabeledDataset::new(vec![
            rec(vec![0.0], true, Group::Zero),
            rec(vec![0.0], false, Group::Zero),
            rec(vec![0.0], true, Group::Zero),
            rec(vec![0.0], false, Group::Zero),
            rec(vec![0.0], true, Group::One),
            rec(vec![0.0], false, Group::One),
            rec(vec![0.0], false, Group::One),
            rec(vec![0.0], true, Group::One),
        ])
        .unwrap();
        let scores = vec![0.9, 0.7, 0.6, 0.2, 0.45, 0.4, 0.1, 0.3];
        (data, scores)
    }

    fn rates(preds: &[bool], data: &LabeledDataset, target: FairnessTarget) -> (f64, f64) {
        let c = confusion_by_group(preds, data).unwrap();
        let gap = match target {
            FairnessTarget::DemographicParity => fairness::parity_gap(&c).unwrap(),
            FairnessTarget::EqualizedOdds => fairness::odds_gap(&c).unwrap(),
        };
        (gap, c.overall_accuracy().unwrap())
    }

    #[test]
    fn thresholds_match_brute_force() {
        let (data, scores) = toy_scored();
        let mut cuts: Vec<f64> = scores.clone();
        cuts.push(f64::INFINITY);
        for target in [FairnessTarget::DemographicParity, FairnessTarget::EqualizedOdds] {
            let found = threshold_postprocess(&scores, &data, target).unwrap();
            let (best_gap, best_acc) = cuts
                .iter()
                .flat_map(|&a| cuts.iter().map(move |&b| [a, b]))
                .map(|t| rates(&apply_thresholds(&scores, &data, t), &data, target))
                .fold((f64::INFINITY, 0.0), |(g, a), (gap, acc)| {
                    if gap < g - 1e-12 || (gap < g + 1e-12 && acc > a) {
                        (gap, acc)
                    } else {
                        (g, a)
                    }
                });
            assert!((found.gap - best_gap).abs() < 1e-12, "{target:?}");
            assert!((found.accuracy - best_acc).abs() < 1e-12, "{target:?}");
            let (gap, acc) = rates(&apply_thresholds(&scores, &data, found.thresholds), &data, target);
            assert!((gap - found.gap).abs() < 1e-12 && (acc - found.accuracy).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_groups_keep_default_thresholds() {
        let mut records = Vec::new();
        let mut scores = Vec::new();
        for g in Group::BOTH {
            for (s, y) in [(0.1, false), (0.3, false), (0.6, true), (0.8, true), (0.7, false)] {
                records.push(rec(vec![0.0], y, g));
                scores.push(s);
            }
        }
        let data = LabeledDataset::new(records).unwrap();
        let found = threshold_postprocess(&scores, &data, FairnessTarget::DemographicParity).unwrap();
        assert_eq!(found.gap, 0.0);
        assert_eq!(found.thresholds[0], found.thresholds[1]);
        assert!((found.accuracy - 0.8).abs() < 1e-12);
    }

    #[test]
    fn postprocessing_never_widens_gap() {
        let data = generate_synthetic(&small_spec(), &mut seeded(20)).unwrap();
        let model = train_logistic(&data, &full_batch(&data)).unwrap();
        let scores = model.scores(&data);
        for target in [FairnessTarget::DemographicParity, FairnessTarget::EqualizedOdds] {
            let before = rates(&apply_thresholds(&scores, &data, GroupThresholds::DEFAULT), &data, target).0;
            let found = threshold_postprocess(&scores, &data, target).unwrap();
            assert!(found.gap <= before + 1e-12);
            let report = evaluate(&model, &data, None, Some(found.thresholds)).unwrap();
            assert_eq!(report.thresholds, found.thresholds);
        }
    }

    #[test]
    fn threshold_errors() {
        let (data, scores) = toy_scored();
        assert!(matches!(
            threshold_postprocess(&scores[..3], &data, FairnessTarget::DemographicParity),
            Err(Error::LengthMismatch { .. })
        ));
        let mut bad = scores.clone();
        bad[0] = f64::NAN;
        assert!(threshold_postprocess(&bad, &data, FairnessTarget::DemographicParity).is_err());
        let one_label = LabeledDataset::new(vec![
            rec(vec![0.0], true, Group::Zero),
            rec(vec![0.0], true, Group::One),
            rec(vec![0.0], false, Group::One),
        ])
        .unwrap();
        assert!(matches!(
            threshold_postprocess(&[0.1, 0.2, 0.3], &one_label, FairnessTarget::EqualizedOdds),
            Err(Error::DegenerateLabels { group: 0, missing_label: 0 })
        ));
    }

    #[test]
    fn evaluate_hand_case() {
        // the score is sigmoid(x): positive exactly when x >= 0
        let data = LabeledDataset::new(vec![
            rec(vec![1.0], true, Group::Zero),
            rec(vec![2.0], false, Group::Zero),
            rec(vec![-1.0], false, Group::Zero),
            rec(vec![3.0], true, Group::One),
            rec(vec![-2.0], false, Group::One),
            rec(vec![-3.0], true, Group::One),
        ])
        .unwrap();
        let model = Model { weights: vec![1.0, 0.0] };
        let report = evaluate(&model, &data, None, None).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(report.groups[0].accuracy, 2.0 / 3.0));
        assert!(close(report.groups[1].accuracy, 2.0 / 3.0));
        assert!(close(report.groups[0].fpr, 0.5) && close(report.groups[1].fpr, 0.0));
        assert!(close(report.groups[0].tpr, 1.0) && close(report.groups[1].tpr, 0.5));
        assert!(close(report.demographic_parity_gap, 1.0 / 3.0));
        assert!(close(report.equalized_odds_gap, 0.5));
        assert_eq!(report.epsilon_spent, 0.0);

        let perfect = Model { weights: vec![0.0, 0.0] };
        assert!(evaluate(&Model { weights: vec![0.0, 0.0, 0.0] }, &data, None, None).is_err());
        let constant = evaluate(&perfect, &data, None, None).unwrap();
        assert_eq!(constant.demographic_parity_gap, 0.0);
        assert!(close(constant.groups[0].fpr, 1.0));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("dp-fair".parse::<Variant>().unwrap(), Variant::DpFair);
        assert!("dpfair".parse::<Variant>().is_err());
    }

    #[test]
    fn seed_sweep_is_deterministic_and_csv_shaped() {
        let study = CaseStudy {
            synthetic: small_spec(),
            ..CaseStudy::default()
        };
        let a = seed_sweep(&study, &Variant::ALL, &[1, 2, 3]).unwrap();
        let b = seed_sweep(&study, &Variant::ALL, &[1, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        let mut buf = Vec::new();
        write_seed_sweep_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SEED_SWEEP_CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 9);
        assert_eq!(first[1], "plain");
        assert_eq!(first[2], "");
        for row in a.iter().filter(|r| r.variant.is_private()) {
            assert!((row.report.epsilon_spent - study.epsilon).abs() < 1e-9);
        }
    }
}
