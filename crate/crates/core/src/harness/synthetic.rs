//! Generated classification corpora with class-conditional token
//! distributions.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::write_atomic;
use crate::corpus::{write_classification_jsonl, ClassificationExample, LabelSet};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    /// Total distinct tokens; the first `cue_tokens * num_classes` are
    /// class cues, the rest are shared.
    pub vocab_size: usize,
    pub cue_tokens: usize,
    /// Probability that a token is drawn from the class's cue block.
    pub cue_prob: f64,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_classes: 2,
            vocab_size: 200,
            cue_tokens: 10,
            cue_prob: 0.2,
            min_len: 8,
            max_len: 16,
        }
    }
}

pub fn token_name(id: usize) -> String {
    format!("w{id}")
}

pub fn label_set(spec: &SyntheticSpec) -> LabelSet {
    let mut labels = LabelSet::new();
    for c in 0..spec.num_classes {
        labels.intern(&format!("c{c}"));
    }
    labels
}

/// Draws `n` labeled examples with classes assigned round-robin.
pub fn generate(spec: &SyntheticSpec, n: usize, seed: u64) -> Vec<ClassificationExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cue_total = spec.cue_tokens * spec.num_classes;
    (0..n)
        .map(|i| {
            let class = i % spec.num_classes;
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let tokens = (0..len)
                .map(|_| {
                    let id = if rng.random_bool(spec.cue_prob) {
                        class * spec.cue_tokens + rng.random_range(0..spec.cue_tokens)
                    } else {
                        rng.random_range(cue_total..spec.vocab_size)
                    };
                    token_name(id)
                })
                .collect();
            ClassificationExample {
                tokens,
                label: Some(class),
            }
        })
        .collect()
}

/// Writes a pool and a test file in the classification JSONL format.
pub fn write_corpus(
    spec: &SyntheticSpec,
    pool_size: usize,
    test_size: usize,
    seed: u64,
    train_path: &Path,
    test_path: &Path,
) -> Result<()> {
    let labels = label_set(spec);
    let pool = generate(spec, pool_size, seed);
    let test = generate(spec, test_size, seed ^ 0x7e57);
    write_atomic(train_path, write_classification_jsonl(&pool, &labels).as_bytes())?;
    write_atomic(test_path, write_classification_jsonl(&test, &labels).as_bytes())
}
