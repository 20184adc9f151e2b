//! The UDA objective, Adam, and the training loop.
//!
//! The objective is `sum_L -log p(y|x) + lambda * sum_U D(x, q(x))` with
//! sums over both sets, where `D` is the KL divergence from the clean-side
//! prediction (held fixed) to the prediction on the perturbed input. For
//! tagging, `D` averages the per-token KL over the sentence.

use std::io::Write;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::Augmenter;
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::model::{self, loss_gradient, Gradient, Matrix, ModelParameters, TaskKind};

/// Supervision attached to a labeled example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Class(usize),
    Tags(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledItem {
    pub tokens: TokenSequence,
    pub target: Target,
}

/// An observed example and its perturbed copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyPair {
    pub clean: TokenSequence,
    pub augmented: TokenSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossBreakdown {
    pub supervised: f64,
    /// Unweighted consistency sum.
    pub consistency: f64,
    pub total: f64,
}

/// `sum_i target_i * (ln target_i - ln online_i)`, with `0 ln 0 = 0`.
/// Rounding noise below zero is clamped.
pub fn kl_divergence(target: &[f64], online: &[f64]) -> Result<f64> {
    if target.len() != online.len() {
        return Err(Error::Shape(format!(
            "KL rows of length {} and {}",
            target.len(),
            online.len()
        )));
    }
    let mut kl = 0.0;
    for (&t, &q) in target.iter().zip(online) {
        if t > 0.0 {
            kl += t * (t.ln() - q.ln());
        }
    }
    if !kl.is_finite() {
        return Err(Error::numeric("KL divergence"));
    }
    Ok(kl.max(0.0))
}

/// KL with the online side given as log-probabilities.
pub(crate) fn kl_from_log(target: &[f64], log_online: &[f64]) -> Result<f64> {
    let mut kl = 0.0;
    for (&t, &lq) in target.iter().zip(log_online) {
        if t > 0.0 {
            kl += t * (t.ln() - lq);
        }
    }
    if !kl.is_finite() {
        return Err(Error::numeric("KL divergence"));
    }
    Ok(kl)
}

/// Fixed clean-side prediction for one pair.
#[derive(Debug, Clone, PartialEq)]
pub enum FrozenTarget {
    Class(Vec<f64>),
    Tags(Matrix),
}

pub fn freeze_target(clean: &TokenSequence, theta: &ModelParameters) -> Result<FrozenTarget> {
    Ok(match theta.task() {
        TaskKind::Classification => FrozenTarget::Class(model::classify_forward(clean, theta)?),
        TaskKind::Tagging => FrozenTarget::Tags(model::tag_marginals(clean, theta)?),
    })
}

/// Consistency of `x_aug` against a fixed target distribution.
pub fn consistency_against(
    target: &FrozenTarget,
    x_aug: &TokenSequence,
    theta: &ModelParameters,
) -> Result<f64> {
    match target {
        FrozenTarget::Class(t) => {
            let q = model::classify_forward(x_aug, theta)?;
            kl_divergence(t, &q)
        }
        FrozenTarget::Tags(t) => {
            if t.rows() != x_aug.len() {
                return Err(Error::Shape(format!(
                    "tagging consistency needs equal lengths, got {} and {}",
                    t.rows(),
                    x_aug.len()
                )));
            }
            let m = model::tag_marginals(x_aug, theta)?;
            let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..t.rows())
                .map(|j| (t.row(j).to_vec(), m.row(j).to_vec()))
                .collect();
            mean_token_kl(&rows)
        }
    }
}

/// Mean of per-token KL divergences over (target, online) rows.
pub fn mean_token_kl(rows: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::data("empty sequence"));
    }
    let mut sum = 0.0;
    for (t, q) in rows {
        sum += kl_divergence(t, q)?;
    }
    Ok(sum / rows.len() as f64)
}

/// KL(p(y|x) || p(y|x_aug)) for the classifier.
pub fn classification_consistency(
    x: &TokenSequence,
    x_aug: &TokenSequence,
    theta: &ModelParameters,
) -> Result<f64> {
    if theta.task() != TaskKind::Classification {
        return Err(Error::Shape("expected a classifier".into()));
    }
    consistency_against(&freeze_target(x, theta)?, x_aug, theta)
}

/// Mean over positions of KL(p(y_j|x) || p(y_j|x_aug)) for the tagger.
pub fn tagging_consistency(x: &TokenSequence, x_aug: &TokenSequence, theta: &ModelParameters) -> Result<f64> {
    if theta.task() != TaskKind::Tagging {
        return Err(Error::Shape("expected a tagger".into()));
    }
    if x.len() != x_aug.len() {
        return Err(Error::Shape(format!(
            "tagging consistency needs equal lengths, got {} and {}",
            x.len(),
            x_aug.len()
        )));
    }
    consistency_against(&freeze_target(x, theta)?, x_aug, theta)
}

/// -log p(y|x) for a class label, or the CRF sequence negative
/// log-likelihood `log Z - score(gold)` for a tag sequence.
pub fn supervised_loss(item: &LabeledItem, theta: &ModelParameters) -> Result<f64> {
    match &item.target {
        Target::Class(y) => {
            let logits = model::class_logits(&item.tokens, theta)?;
            let logp = model::log_softmax(&logits);
            logp.get(*y)
                .map(|l| -l)
                .ok_or_else(|| Error::Shape(format!("label {y} outside {} classes", logp.len())))
        }
        Target::Tags(tags) => {
            let log_z = model::log_partition(&item.tokens, theta)?;
            Ok(log_z - model::path_score(&item.tokens, tags, theta)?)
        }
    }
}

/// Objective value with consistency targets supplied by the caller.
pub fn total_loss_with_targets(
    labeled: &[LabeledItem],
    unlabeled: &[(FrozenTarget, TokenSequence)],
    theta: &ModelParameters,
    lambda: f64,
) -> Result<LossBreakdown> {
    let mut supervised = 0.0;
    for item in labeled {
        supervised += supervised_loss(item, theta)?;
    }
    let mut consistency = 0.0;
    for (target, aug) in unlabeled {
        consistency += consistency_against(target, aug, theta)?;
    }
    let total = supervised + lambda * consistency;
    if !total.is_finite() {
        return Err(Error::numeric(if supervised.is_finite() {
            "consistency loss"
        } else {
            "supervised loss"
        }));
    }
    Ok(LossBreakdown {
        supervised,
        consistency,
        total,
    })
}

/// Objective value: supervised sum plus `lambda` times the consistency sum.
pub fn total_loss(
    labeled: &[LabeledItem],
    unlabeled: &[ConsistencyPair],
    theta: &ModelParameters,
    lambda: f64,
) -> Result<LossBreakdown> {
    let frozen = unlabeled
        .iter()
        .map(|p| Ok((freeze_target(&p.clean, theta)?, p.augmented.clone())))
        .collect::<Result<Vec<_>>>()?;
    total_loss_with_targets(labeled, &frozen, theta, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Supervised loss only; lambda is forced to zero.
    Baseline,
    /// Consistency on labeled examples repeated `repetition_ratio` times.
    SupervisedConsistency,
    /// Consistency on the unlabeled pool.
    SemiSupervised,
}

impl TrainingMode {
    pub const ALL: [TrainingMode; 3] = [
        TrainingMode::Baseline,
        TrainingMode::SupervisedConsistency,
        TrainingMode::SemiSupervised,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainingMode::Baseline => "baseline",
            TrainingMode::SupervisedConsistency => "supervised_consistency",
            TrainingMode::SemiSupervised => "semi_supervised",
        }
    }
}

impl std::fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lambda: f64,
    pub mode: TrainingMode,
    pub repetition_ratio: usize,
    /// Defaults to 2e-5 for classification and 1e-3 for tagging.
    pub learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub labeled_batch_size: usize,
    pub unlabeled_batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub embedding_dim: usize,
    /// Frequency floor for the model vocabulary.
    pub min_count: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lambda: 1.0,
            mode: TrainingMode::SemiSupervised,
            repetition_ratio: 20,
            learning_rate: None,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            labeled_batch_size: 8,
            unlabeled_batch_size: 8,
            epochs: 30,
            seed: 0,
            embedding_dim: 32,
            min_count: 2,
        }
    }
}

pub const CLASSIFICATION_LEARNING_RATE: f64 = 2e-5;
pub const TAGGING_LEARNING_RATE: f64 = 1e-3;

impl TrainingConfig {
    pub fn learning_rate_for(&self, task: TaskKind) -> f64 {
        self.learning_rate.unwrap_or(match task {
            TaskKind::Classification => CLASSIFICATION_LEARNING_RATE,
            TaskKind::Tagging => TAGGING_LEARNING_RATE,
        })
    }

    /// The lambda actually applied; baseline forces zero.
    pub fn effective_lambda(&self) -> f64 {
        match self.mode {
            TrainingMode::Baseline => 0.0,
            _ => self.lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite value >= 0");
        }
        if self.repetition_ratio < 1 {
            return bad("repetition_ratio must be at least 1");
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("learning_rate must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        if self.labeled_batch_size == 0 || self.unlabeled_batch_size == 0 {
            return bad("batch sizes must be at least 1");
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be at least 1");
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self, task: TaskKind) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate_for(task),
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: Gradient,
    pub second_moment: Gradient,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(theta: &ModelParameters) -> Self {
        OptimizerState {
            first_moment: theta.zeros_like(),
            second_moment: theta.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified when the update
/// would produce a non-finite value.
pub fn adam_step(
    theta: &mut ModelParameters,
    grad: &Gradient,
    state: &mut OptimizerState,
    cfg: &AdamConfig,
) -> Result<()> {
    theta.check_congruent(grad)?;
    theta.check_congruent(&state.first_moment)?;
    let t = state.step + 1;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);

    let mut m = state.first_moment.clone();
    let mut v = state.second_moment.clone();
    let mut next = theta.clone();
    for (((p, g), mt), vt) in next
        .tensors_mut()
        .into_iter()
        .zip(grad.tensors())
        .zip(m.tensors_mut())
        .zip(v.tensors_mut())
    {
        for i in 0..p.len() {
            mt[i] = cfg.beta1 * mt[i] + (1.0 - cfg.beta1) * g[i];
            vt[i] = cfg.beta2 * vt[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = mt[i] / bc1;
            let v_hat = vt[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    if !next.is_finite() || !m.is_finite() || !v.is_finite() {
        return Err(Error::numeric("Adam update"));
    }
    *theta = next;
    state.first_moment = m;
    state.second_moment = v;
    state.step = t;
    Ok(())
}

/// A pool example ready for training. `tokens` are ids in the replacement
/// vocabulary; `id` is the example's index in its pool.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: usize,
    pub tokens: TokenSequence,
    pub target: Option<Target>,
}

/// Everything `train` needs besides the configuration.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub task: TaskKind,
    pub labeled: Vec<TrainExample>,
    pub unlabeled: Vec<TrainExample>,
    /// Replacement-vocabulary id to model-vocabulary id.
    pub to_model: Vec<usize>,
    pub model_vocab_size: usize,
    pub num_outputs: usize,
}

impl TrainingData {
    /// The examples whose consistency is enforced, per mode.
    pub fn consistency_stream(&self, cfg: &TrainingConfig) -> Vec<&TrainExample> {
        match cfg.mode {
            TrainingMode::Baseline => Vec::new(),
            TrainingMode::SemiSupervised => self.unlabeled.iter().collect(),
            TrainingMode::SupervisedConsistency => self
                .labeled
                .iter()
                .flat_map(|e| std::iter::repeat_n(e, cfg.repetition_ratio))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub supervised_loss: f64,
    pub consistency_loss: f64,
    pub total_loss: f64,
    pub eval_metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub history: Vec<EpochRecord>,
}

/// Mixes seed components into one 64-bit seed (splitmix64 finalizer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

const STREAM_INIT: u64 = 1;
const STREAM_LABELED: u64 = 2;
const STREAM_CONSISTENCY: u64 = 3;
const STREAM_AUGMENT: u64 = 4;

/// Cycles through a list in freshly shuffled passes.
struct Cycler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Cycler {
    fn new(len: usize, rng: ChaCha8Rng) -> Self {
        let mut c = Cycler {
            order: (0..len).collect(),
            pos: len,
            rng,
        };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.pos = 0;
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        if self.order.is_empty() {
            return out;
        }
        while out.len() < n {
            if self.pos == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Initial parameters for a training run.
pub fn init_params(data: &TrainingData, cfg: &TrainingConfig) -> ModelParameters {
    let seed = derive_seed(&[cfg.seed, STREAM_INIT]);
    match data.task {
        TaskKind::Classification => {
            ModelParameters::init_classifier(data.model_vocab_size, cfg.embedding_dim, data.num_outputs, seed)
        }
        TaskKind::Tagging => {
            ModelParameters::init_tagger(data.model_vocab_size, cfg.embedding_dim, data.num_outputs, seed)
        }
    }
}

/// Called after each epoch; the returned value is recorded as the epoch's
/// evaluation metric.
pub type Monitor<'a> = dyn FnMut(&ModelParameters) -> Result<f64> + 'a;

/// Trains with one labeled batch and one consistency batch per step. The
/// labeled stream is reshuffled each epoch; the consistency stream cycles
/// independently and every visit draws a fresh perturbation. All
/// randomness derives from `cfg.seed`.
pub fn train(
    data: &TrainingData,
    cfg: &TrainingConfig,
    augmenter: &Augmenter,
    mut monitor: Option<&mut Monitor<'_>>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.labeled.is_empty() && data.unlabeled.is_empty() {
        return Err(Error::data("training split is empty"));
    }
    if data.task == TaskKind::Tagging && !augmenter.preserves_length() {
        return Err(Error::Config(
            "paraphrase perturbation cannot align token labels; use uniform or contextual".into(),
        ));
    }
    let lambda = cfg.effective_lambda();
    let adam = cfg.adam(data.task);
    let mut theta = init_params(data, cfg);
    let mut state = OptimizerState::new(&theta);

    let stream = data.consistency_stream(cfg);
    let use_consistency = lambda != 0.0 && !stream.is_empty();

    let mut labeled_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, STREAM_LABELED]));
    let mut cycler = Cycler::new(
        stream.len(),
        ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, STREAM_CONSISTENCY])),
    );
    let mut aug_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, STREAM_AUGMENT]));

    let steps_per_epoch = if data.labeled.is_empty() {
        stream.len().div_ceil(cfg.unlabeled_batch_size).max(1)
    } else {
        data.labeled.len().div_ceil(cfg.labeled_batch_size)
    };

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.labeled.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut labeled_rng);
        let mut sums = LossBreakdown::default();
        let mut step_totals = Vec::new();
        for step in 0..steps_per_epoch {
            let lo = (step * cfg.labeled_batch_size).min(order.len());
            let hi = ((step + 1) * cfg.labeled_batch_size).min(order.len());
            let labeled: Vec<LabeledItem> = order[lo..hi]
                .iter()
                .map(|&i| to_labeled_item(&data.labeled[i], &data.to_model))
                .collect::<Result<_>>()?;

            let mut pairs = Vec::new();
            if use_consistency {
                for idx in cycler.take(cfg.unlabeled_batch_size) {
                    let ex = stream[idx];
                    let aug = augmenter.apply(ex.id, &ex.tokens, &mut aug_rng)?;
                    pairs.push(ConsistencyPair {
                        clean: ex.tokens.remap(&data.to_model),
                        augmented: aug.remap(&data.to_model),
                    });
                }
            }

            let (loss, grad) = loss_gradient(&labeled, &pairs, &theta, lambda)?;
            adam_step(&mut theta, &grad, &mut state, &adam)?;
            sums.supervised += loss.supervised;
            sums.consistency += loss.consistency;
            sums.total += loss.total;
            if epoch == 1 {
                step_totals.push(loss.total);
            }
        }
        if epoch == 1 && step_totals.len() > 1 && step_totals[step_totals.len() - 1] >= step_totals[0] {
            warn!(
                "training loss did not decrease over the first epoch ({:.4} -> {:.4})",
                step_totals[0],
                step_totals[step_totals.len() - 1]
            );
        }
        let eval_metric = match monitor.as_mut() {
            Some(f) => Some(f(&theta)?),
            None => None,
        };
        history.push(EpochRecord {
            epoch,
            supervised_loss: sums.supervised,
            consistency_loss: sums.consistency,
            total_loss: sums.total,
            eval_metric,
        });
    }
    Ok(TrainOutcome {
        params: theta,
        history,
    })
}

fn to_labeled_item(ex: &TrainExample, to_model: &[usize]) -> Result<LabeledItem> {
    let target = ex
        .target
        .clone()
        .ok_or_else(|| Error::data(format!("labeled example {} has no label", ex.id)))?;
    Ok(LabeledItem {
        tokens: ex.tokens.remap(to_model),
        target,
    })
}

/// Writes the per-epoch history as CSV.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::data(format!("writing history: {e}"));
    w.write_record([
        "epoch",
        "supervised_loss",
        "consistency_loss",
        "total_loss",
        "eval_metric",
    ])
    .map_err(io)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            crate::harness::report::fmt_sig(r.supervised_loss),
            crate::harness::report::fmt_sig(r.consistency_loss),
            crate::harness::report::fmt_sig(r.total_loss),
            r.eval_metric
                .map(crate::harness::report::fmt_sig)
                .unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::data(format!("writing history: {e}")))?;
    Ok(())
}

pub fn save_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_history_csv(history, &mut buf)?;
    crate::harness::report::write_atomic(path, &buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!((v - 0.6931).abs() < 1e-4);
        let v = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        let expect =
            0.5 * 0.5f64.ln() - 0.5 * 0.5f64.ln() + 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((v - expect).abs() < 1e-15);
        assert!((v - (0.5 * 2f64.ln() - 0.5 * 1.5f64.ln())).abs() < 1e-15);
        assert!((v - 0.1438).abs() < 1e-4);
        assert!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn mean_token_kl_is_arithmetic_mean() {
        let rows = vec![
            (vec![1.0, 0.0], vec![0.5, 0.5]),
            (vec![0.5, 0.5], vec![0.25, 0.75]),
        ];
        let a = kl_divergence(&rows[0].0, &rows[0].1).unwrap();
        let b = kl_divergence(&rows[1].0, &rows[1].1).unwrap();
        assert!((mean_token_kl(&rows).unwrap() - (a + b) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn total_loss_arithmetic() {
        let b = LossBreakdown {
            supervised: 1.5,
            consistency: 0.25,
            total: 1.5 + 1.0 * 0.25,
        };
        assert_eq!(b.total, 1.75);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut theta = ModelParameters::init_classifier(4, 2, 2, 0);
        let before = theta.clone();
        let grad = theta.zeros_like();
        let mut st = OptimizerState::new(&theta);
        let cfg = TrainingConfig::default().adam(TaskKind::Classification);
        adam_step(&mut theta, &grad, &mut st, &cfg).unwrap();
        assert_eq!(theta, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut theta = ModelParameters::init_classifier(2, 1, 2, 0);
        let before = theta.flatten();
        let mut grad = theta.zeros_like();
        let gs = [0.5, -3.0, 1e-3, 0.0, 7.0, -2e-4];
        for (slot, g) in grad.tensors_mut().into_iter().flat_map(|t| t.iter_mut()).zip(gs) {
            *slot = g;
        }
        let mut st = OptimizerState::new(&theta);
        let cfg = TrainingConfig::default().adam(TaskKind::Classification);
        assert_eq!(cfg.learning_rate, 2e-5);
        adam_step(&mut theta, &grad, &mut st, &cfg).unwrap();
        for ((a, b), g) in theta.flatten().iter().zip(&before).zip(gs) {
            let expect = -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert!((a - b - expect).abs() < 1e-15, "{a} {b} {g}");
            if g != 0.0 {
                assert!(
                    (a - b + cfg.learning_rate * g.signum()).abs()
                        <= cfg.learning_rate * cfg.epsilon / g.abs() + 1e-15
                );
            }
        }
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut theta = ModelParameters::init_classifier(2, 1, 2, 0);
        let before = theta.clone();
        let mut grad = theta.zeros_like();
        grad.embeddings.as_mut_slice()[0] = f64::NAN;
        let mut st = OptimizerState::new(&theta);
        let cfg = TrainingConfig::default().adam(TaskKind::Classification);
        assert!(matches!(
            adam_step(&mut theta, &grad, &mut st, &cfg),
            Err(Error::Numeric { .. })
        ));
        assert_eq!(theta, before);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn default_learning_rates() {
        let cfg = TrainingConfig::default();
        assert_eq!(cfg.learning_rate_for(TaskKind::Classification), 2e-5);
        assert_eq!(cfg.learning_rate_for(TaskKind::Tagging), 1e-3);
        assert_eq!(cfg.lambda, 1.0);
        assert_eq!(cfg.repetition_ratio, 20);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainingConfig::default();
        cfg.lambda = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainingConfig::default();
        cfg.repetition_ratio = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainingConfig::default();
        cfg.learning_rate = Some(0.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn derive_seed_separates_streams() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[5, 6, 7]), derive_seed(&[5, 6, 7]));
    }
}
