//! Experiment orchestration: corpus preparation, seeded trials, and the
//! labeled/unlabeled quantity sweeps.

use std::path::PathBuf;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_classifier, evaluate_tagger};
use super::report::{round_sig, RunReport, Setting, TrialResult};
use crate::augment::{
    load_paraphrase_pairs, train_context_proposer, Augmenter, PerturbationConfig, PerturbationMode,
};
use crate::consistency::{
    derive_seed, train, Target, TrainExample, TrainOutcome, TrainingConfig, TrainingData, TrainingMode,
};
use crate::corpus::{
    build_vocabulary, load_classification_corpus, load_conll_corpus, parse_classification_jsonl, parse_conll,
    sample_classification_subset, sample_tagging_subset, ClassificationExample, Example, LabelSet,
    SubsetSpec, TagSet, TaggingExample, TokenSequence, Vocabulary,
};
use crate::error::{Error, Result};
use crate::model::{ModelParameters, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Tagging,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Classification => TaskKind::Classification,
            Task::Tagging => TaskKind::Tagging,
        }
    }
}

fn default_modes() -> Vec<TrainingMode> {
    TrainingMode::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    /// The pool: labeled records whose labels get hidden, plus any
    /// unlabeled records.
    pub train_path: PathBuf,
    pub test_path: PathBuf,
    #[serde(default)]
    pub paraphrase_path: Option<PathBuf>,
    pub subset: SubsetSpec,
    pub subset_seeds: Vec<u64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<TrainingMode>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub unlabeled_fractions: Option<Vec<f64>>,
    /// Per-class counts for classification, sentence counts for tagging.
    #[serde(default)]
    pub labeled_sizes: Option<Vec<usize>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Labeled-size grid used when a sweep is requested without sizes.
pub const DEFAULT_LABELED_SIZES: [usize; 4] = [10, 100, 1000, 10000];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subset_seeds.is_empty() {
            return Err(Error::Config("at least one subset seed is required".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        match (self.task, self.subset) {
            (Task::Classification, SubsetSpec::PerClass(_)) | (Task::Tagging, SubsetSpec::Sentences(_)) => {}
            _ => {
                return Err(Error::Config(
                    "subset must be per_class for classification and sentences for tagging".into(),
                ))
            }
        }
        if let Some(fr) = &self.unlabeled_fractions {
            if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::Config("unlabeled_fractions must lie in [0, 1]".into()));
            }
            if fr.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config(
                    "unlabeled_fractions must be sorted ascending".into(),
                ));
            }
        }
        if self.task == Task::Tagging && self.perturbation.mode == PerturbationMode::Paraphrase {
            return Err(Error::Config(
                "paraphrase perturbation is classification-only".into(),
            ));
        }
        if self.perturbation.mode == PerturbationMode::Paraphrase && self.paraphrase_path.is_none() {
            return Err(Error::Config("paraphrase mode needs paraphrase_path".into()));
        }
        self.training.validate()?;
        self.perturbation.validate()
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Pool examples in a task-independent form.
#[derive(Debug, Clone)]
enum Pool {
    Classification {
        examples: Vec<ClassificationExample>,
        labels: LabelSet,
    },
    Tagging {
        examples: Vec<TaggingExample>,
        tags: TagSet,
    },
}

/// Primary metric name and value, then secondary metrics.
pub type Evaluation = (String, f64, Vec<(String, f64)>);

/// Corpora, vocabularies and perturbation operator shared by every trial.
/// Read-only once built.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub task: Task,
    pool: Pool,
    /// Replacement vocabulary over the whole pool, no frequency floor.
    pub replacement_vocab: Vocabulary,
    /// Model vocabulary with the configured frequency floor.
    pub model_vocab: Vocabulary,
    pub to_model: Vec<usize>,
    /// Pool in replacement-vocabulary ids.
    pool_ids: Vec<TokenSequence>,
    test_class: Vec<(TokenSequence, usize)>,
    test_tags: Vec<(TokenSequence, Vec<usize>)>,
    pub augmenter: Augmenter,
}

impl Prepared {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (pool, test_tokens) = match cfg.task {
            Task::Classification => {
                let mut corpus = load_classification_corpus(&cfg.train_path)?;
                let text =
                    std::fs::read_to_string(&cfg.test_path).map_err(|e| Error::io(&cfg.test_path, e))?;
                let test = parse_classification_jsonl(&text, &mut corpus.labels)
                    .map_err(|e| e.in_file(&cfg.test_path))?;
                if test.iter().any(|e| e.label.is_none()) {
                    return Err(Error::data("test set contains unlabeled records").in_file(&cfg.test_path));
                }
                (
                    Pool::Classification {
                        examples: corpus.examples,
                        labels: corpus.labels,
                    },
                    TestSet::Class(test),
                )
            }
            Task::Tagging => {
                let mut corpus = load_conll_corpus(&cfg.train_path)?;
                let text =
                    std::fs::read_to_string(&cfg.test_path).map_err(|e| Error::io(&cfg.test_path, e))?;
                let test = parse_conll(&text, &mut corpus.tags).map_err(|e| e.in_file(&cfg.test_path))?;
                (
                    Pool::Tagging {
                        examples: corpus.examples,
                        tags: corpus.tags,
                    },
                    TestSet::Tags(test),
                )
            }
        };
        Self::build(cfg, pool, test_tokens)
    }

    fn build(cfg: &ExperimentConfig, pool: Pool, test: TestSet) -> Result<Self> {
        let tokens: Vec<&[String]> = match &pool {
            Pool::Classification { examples, .. } => examples.iter().map(|e| e.tokens()).collect(),
            Pool::Tagging { examples, .. } => examples.iter().map(|e| e.tokens()).collect(),
        };
        let replacement_vocab = build_vocabulary(tokens.iter().copied(), 1)?;
        let model_vocab = build_vocabulary(tokens.iter().copied(), cfg.training.min_count)?;
        let to_model = replacement_vocab.remap_to(&model_vocab);
        let pool_ids: Vec<TokenSequence> = tokens.iter().map(|t| replacement_vocab.encode(t)).collect();
        let (test_class, test_tags) = match test {
            TestSet::Class(t) => (
                t.into_iter()
                    .map(|e| (model_vocab.encode(&e.tokens), e.label.expect("checked labeled")))
                    .collect(),
                Vec::new(),
            ),
            TestSet::Tags(t) => (
                Vec::new(),
                t.into_iter()
                    .map(|e| (model_vocab.encode(&e.tokens), e.tags.expect("conll is tagged")))
                    .collect(),
            ),
        };
        let p = &cfg.perturbation;
        let augmenter = match p.mode {
            PerturbationMode::Uniform => Augmenter::Uniform {
                replace_prob: p.replace_prob,
                vocab_size: replacement_vocab.len(),
            },
            PerturbationMode::Contextual => Augmenter::Contextual {
                replace_prob: p.replace_prob,
                top_k: p.top_k,
                proposer: train_context_proposer(&pool_ids, replacement_vocab.len(), p.smoothing)?,
            },
            PerturbationMode::Paraphrase => {
                let path = cfg
                    .paraphrase_path
                    .as_ref()
                    .ok_or_else(|| Error::Config("paraphrase mode needs paraphrase_path".into()))?;
                Augmenter::Paraphrase(load_paraphrase_pairs(path, pool_ids.len(), &replacement_vocab)?)
            }
        };
        Ok(Prepared {
            task: cfg.task,
            pool,
            replacement_vocab,
            model_vocab,
            to_model,
            pool_ids,
            test_class,
            test_tags,
            augmenter,
        })
    }

    pub fn pool_len(&self) -> usize {
        self.pool_ids.len()
    }

    pub fn num_outputs(&self) -> usize {
        match &self.pool {
            Pool::Classification { labels, .. } => labels.len(),
            Pool::Tagging { tags, .. } => tags.len(),
        }
    }

    pub fn tagset(&self) -> Option<&TagSet> {
        match &self.pool {
            Pool::Tagging { tags, .. } => Some(tags),
            Pool::Classification { .. } => None,
        }
    }

    pub fn labels(&self) -> Option<&LabelSet> {
        match &self.pool {
            Pool::Classification { labels, .. } => Some(labels),
            Pool::Tagging { .. } => None,
        }
    }

    pub fn pool_tokens(&self, i: usize) -> &TokenSequence {
        &self.pool_ids[i]
    }

    /// Samples L and U for `subset_seed`. Returns pool indices of each.
    pub fn split(&self, subset: SubsetSpec, subset_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        match (&self.pool, subset) {
            (Pool::Classification { examples, labels }, SubsetSpec::PerClass(k)) => {
                let s = sample_classification_subset(examples, labels, k, subset_seed)?;
                Ok((s.labeled_index, s.unlabeled_index))
            }
            (Pool::Tagging { examples, .. }, SubsetSpec::Sentences(m)) => {
                let s = sample_tagging_subset(examples, m, subset_seed)?;
                Ok((s.labeled_index, s.unlabeled_index))
            }
            _ => Err(Error::Config("subset spec does not match the task".into())),
        }
    }

    fn target(&self, i: usize) -> Option<Target> {
        match &self.pool {
            Pool::Classification { examples, .. } => examples[i].label.map(Target::Class),
            Pool::Tagging { examples, .. } => examples[i].tags.clone().map(Target::Tags),
        }
    }

    /// Assembles training data from pool indices.
    pub fn training_data(&self, labeled: &[usize], unlabeled: &[usize]) -> TrainingData {
        TrainingData {
            task: self.task.into(),
            labeled: labeled
                .iter()
                .map(|&i| TrainExample {
                    id: i,
                    tokens: self.pool_ids[i].clone(),
                    target: self.target(i),
                })
                .collect(),
            unlabeled: unlabeled
                .iter()
                .map(|&i| TrainExample {
                    id: i,
                    tokens: self.pool_ids[i].clone(),
                    target: None,
                })
                .collect(),
            to_model: self.to_model.clone(),
            model_vocab_size: self.model_vocab.len(),
            num_outputs: self.num_outputs(),
        }
    }

    pub fn evaluate(&self, theta: &ModelParameters) -> Result<Evaluation> {
        match self.task {
            Task::Classification => {
                let m = evaluate_classifier(theta, &self.test_class)?;
                Ok((
                    "accuracy".into(),
                    m.accuracy,
                    vec![("macro_f1".into(), m.macro_f1)],
                ))
            }
            Task::Tagging => {
                let tags = self.tagset().expect("tagging pool");
                let m = evaluate_tagger(theta, &self.test_tags, tags)?;
                Ok((
                    "span_f1".into(),
                    m.span_f1,
                    vec![
                        ("token_accuracy".into(), m.token_accuracy),
                        ("token_f1".into(), m.token_f1),
                    ],
                ))
            }
        }
    }
}

enum TestSet {
    Class(Vec<ClassificationExample>),
    Tags(Vec<TaggingExample>),
}

/// Pool indices in the fixed order used to truncate U. Keyed by the master
/// seed only, so truncations for growing fractions are nested.
pub fn unlabeled_order(pool_len: usize, master_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool_len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[
        master_seed,
        0x0055_4e4c,
    ])));
    order
}

/// Keeps the first `ceil(f * |U|)` members of `unlabeled` under `order`.
pub fn truncate_unlabeled(unlabeled: &[usize], order: &[usize], fraction: f64) -> Vec<usize> {
    let keep = (fraction * unlabeled.len() as f64).ceil() as usize;
    let mut member = vec![false; order.len()];
    for &i in unlabeled {
        member[i] = true;
    }
    let mut kept: Vec<usize> = order.iter().copied().filter(|&i| member[i]).take(keep).collect();
    kept.sort_unstable();
    kept
}

/// One unit of work in a run.
#[derive(Debug, Clone, Copy)]
pub struct TrialSpec {
    pub setting: Setting,
    pub subset: SubsetSpec,
    pub subset_seed: u64,
    pub mode: TrainingMode,
    pub unlabeled_fraction: Option<f64>,
}

fn mode_index(mode: TrainingMode) -> u64 {
    match mode {
        TrainingMode::Baseline => 0,
        TrainingMode::SupervisedConsistency => 1,
        TrainingMode::SemiSupervised => 2,
    }
}

/// Training config for one trial; the seed mixes the master seed, subset
/// seed and mode so results do not depend on scheduling.
pub fn trial_training_config(base: &TrainingConfig, subset_seed: u64, mode: TrainingMode) -> TrainingConfig {
    let mut cfg = base.clone();
    cfg.mode = mode;
    cfg.seed = derive_seed(&[base.seed, subset_seed, mode_index(mode)]);
    cfg
}

/// Trains one model per the trial spec and returns it with its history.
pub fn train_trial(prep: &Prepared, cfg: &ExperimentConfig, spec: &TrialSpec) -> Result<TrainOutcome> {
    let (labeled, mut unlabeled) = prep.split(spec.subset, spec.subset_seed)?;
    if let Some(f) = spec.unlabeled_fraction {
        let order = unlabeled_order(prep.pool_len(), cfg.training.seed);
        unlabeled = truncate_unlabeled(&unlabeled, &order, f);
    }
    let data = prep.training_data(&labeled, &unlabeled);
    let tcfg = trial_training_config(&cfg.training, spec.subset_seed, spec.mode);
    train(&data, &tcfg, &prep.augmenter, None)
}

fn run_trial(prep: &Prepared, cfg: &ExperimentConfig, spec: &TrialSpec) -> Result<TrialResult> {
    let started = Instant::now();
    let outcome = train_trial(prep, cfg, spec)?;
    let (metric, value, secondary) = prep.evaluate(&outcome.params)?;
    let wall_seconds = started.elapsed().as_secs_f64();
    info!(
        "trial seed={} mode={} {:?}: {metric}={value:.4} ({wall_seconds:.2}s)",
        spec.subset_seed, spec.mode, spec.setting
    );
    Ok(TrialResult {
        setting: spec.setting,
        subset_seed: spec.subset_seed,
        mode: spec.mode,
        metric,
        value: round_sig(value),
        secondary: secondary.into_iter().map(|(k, v)| (k, round_sig(v))).collect(),
        wall_seconds,
    })
}

/// Runs trials in parallel; results come back in `specs` order.
pub fn run_trials(prep: &Prepared, cfg: &ExperimentConfig, specs: &[TrialSpec]) -> Result<Vec<TrialResult>> {
    specs
        .par_iter()
        .map(|spec| {
            run_trial(prep, cfg, spec).map_err(|e| Error::Trial {
                seed: spec.subset_seed,
                mode: spec.mode.name().to_owned(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Every subset seed under every configured mode.
pub fn run_experiment_prepared(prep: &Prepared, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let specs: Vec<TrialSpec> = cfg
        .subset_seeds
        .iter()
        .flat_map(|&seed| {
            cfg.modes.iter().map(move |&mode| TrialSpec {
                setting: Setting::None,
                subset: cfg.subset,
                subset_seed: seed,
                mode,
                unlabeled_fraction: None,
            })
        })
        .collect();
    let trials = run_trials(prep, cfg, &specs)?;
    Ok(RunReport::new(trials, cfg.echo(), false))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    run_experiment_prepared(&Prepared::load(cfg)?, cfg)
}

/// Semi-supervised runs with U truncated to each fraction.
pub fn unlabeled_quantity_sweep_prepared(prep: &Prepared, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let fractions = cfg
        .unlabeled_fractions
        .as_ref()
        .ok_or_else(|| Error::Config("unlabeled_fractions is required for this sweep".into()))?;
    let mut specs = Vec::new();
    for &f in fractions {
        for &seed in &cfg.subset_seeds {
            specs.push(TrialSpec {
                setting: Setting::UnlabeledFraction(f),
                subset: cfg.subset,
                subset_seed: seed,
                mode: TrainingMode::SemiSupervised,
                unlabeled_fraction: Some(f),
            });
        }
    }
    let trials = run_trials(prep, cfg, &specs)?;
    Ok(RunReport::new(trials, cfg.echo(), true))
}

pub fn unlabeled_quantity_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    unlabeled_quantity_sweep_prepared(&Prepared::load(cfg)?, cfg)
}

/// Every configured mode at each labeled size.
pub fn labeled_quantity_sweep_prepared(prep: &Prepared, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let sizes = cfg
        .labeled_sizes
        .clone()
        .unwrap_or_else(|| DEFAULT_LABELED_SIZES.to_vec());
    let mut specs = Vec::new();
    for &size in &sizes {
        let subset = match cfg.task {
            Task::Classification => SubsetSpec::PerClass(size),
            Task::Tagging => SubsetSpec::Sentences(size),
        };
        // Fail before any training when a size cannot be drawn.
        prep.split(subset, cfg.subset_seeds[0])?;
        for &seed in &cfg.subset_seeds {
            for &mode in &cfg.modes {
                specs.push(TrialSpec {
                    setting: Setting::LabeledSize(size),
                    subset,
                    subset_seed: seed,
                    mode,
                    unlabeled_fraction: None,
                });
            }
        }
    }
    let trials = run_trials(prep, cfg, &specs)?;
    Ok(RunReport::new(trials, cfg.echo(), true))
}

pub fn labeled_quantity_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    labeled_quantity_sweep_prepared(&Prepared::load(cfg)?, cfg)
}

/// Parses and validates a JSON config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a JSON config and applies `key=value` overrides. Keys are dotted
/// paths into the config object; values parse as JSON, falling back to a
/// plain string.
pub fn load_config(path: Option<&std::path::Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => serde_json::Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn apply_override(value: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_owned()));
    let mut node = value;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-object")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("override `{key}` descends into a non-object")))?
        .insert(parts[parts.len() - 1].to_owned(), parsed);
    Ok(())
}

/// Trains one model on the first subset seed in `cfg.training.mode`,
/// evaluating on the test set after every epoch.
pub fn train_single(prep: &Prepared, cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let seed = cfg.subset_seeds[0];
    let (labeled, unlabeled) = prep.split(cfg.subset, seed)?;
    let data = prep.training_data(&labeled, &unlabeled);
    let tcfg = trial_training_config(&cfg.training, seed, cfg.training.mode);
    let mut monitor = |theta: &ModelParameters| prep.evaluate(theta).map(|(_, v, _)| v);
    train(&data, &tcfg, &prep.augmenter, Some(&mut monitor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_keys() {
        let mut v = serde_json::json!({"training": {"lambda": 1.0}});
        apply_override(&mut v, "training.lambda=0.5").unwrap();
        apply_override(&mut v, "training.mode=baseline").unwrap();
        apply_override(&mut v, "subset_seeds=[1,2]").unwrap();
        assert_eq!(v["training"]["lambda"], 0.5);
        assert_eq!(v["training"]["mode"], "baseline");
        assert_eq!(v["subset_seeds"], serde_json::json!([1, 2]));
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "subset_seeds.x=1").is_err());
    }

    #[test]
    fn truncation_is_nested() {
        let order = unlabeled_order(50, 3);
        let u: Vec<usize> = (10..50).collect();
        let mut prev: Vec<usize> = Vec::new();
        for f in [0.0, 0.1, 0.25, 0.5, 1.0] {
            let kept = truncate_unlabeled(&u, &order, f);
            assert_eq!(kept.len(), (f * 40.0f64).ceil() as usize);
            assert!(prev.iter().all(|i| kept.contains(i)));
            prev = kept;
        }
        assert_eq!(prev, u);
    }

    #[test]
    fn trial_seeds_differ_by_mode() {
        let base = TrainingConfig::default();
        let a = trial_training_config(&base, 1, TrainingMode::Baseline);
        let b = trial_training_config(&base, 1, TrainingMode::SemiSupervised);
        assert_ne!(a.seed, b.seed);
        assert_eq!(a.mode, TrainingMode::Baseline);
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"task":"classification","train_path":"a","test_path":"b",
                "subset":{"per_class":10},"subset_seeds":[1,2,3,4,5]}"#,
        )
        .unwrap();
        assert_eq!(cfg.modes.len(), 3);
        assert_eq!(cfg.training.lambda, 1.0);
        assert_eq!(cfg.perturbation.replace_prob, 0.3);
        cfg.validate().unwrap();

        let mut bad = cfg.clone();
        bad.subset_seeds.clear();
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.unlabeled_fractions = Some(vec![0.5, 0.1]);
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.subset = SubsetSpec::Sentences(3);
        assert!(bad.validate().is_err());
    }
}
