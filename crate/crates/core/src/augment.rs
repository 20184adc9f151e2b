//! Perturbation operators: uniform random word replacement, contextual
//! replacement from a (left, right) neighbour proposer, and externally
//! generated paraphrases.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{tokenize, TokenSequence, Vocabulary, UNK_ID};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    Uniform,
    Contextual,
    Paraphrase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub replace_prob: f64,
    pub top_k: usize,
    pub mode: PerturbationMode,
    /// Add-α smoothing for the contextual proposer.
    pub smoothing: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            replace_prob: 0.3,
            top_k: 10,
            mode: PerturbationMode::Uniform,
            smoothing: 0.1,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.replace_prob) {
            return Err(Error::Config(format!(
                "replace_prob must lie in [0, 1], got {}",
                self.replace_prob
            )));
        }
        if self.top_k < 1 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Config("smoothing must be positive".into()));
        }
        Ok(())
    }

    fn expect_mode(&self, mode: PerturbationMode) -> Result<()> {
        self.validate()?;
        if self.mode != mode {
            return Err(Error::Config(format!(
                "perturbation mode is {:?}, expected {mode:?}",
                self.mode
            )));
        }
        Ok(())
    }
}

/// Replaces each position with probability `cfg.replace_prob` by a token
/// drawn uniformly from `vocab`, never unk and never the original token.
pub fn uniform_random_replace<R: Rng + ?Sized>(
    x: &TokenSequence,
    cfg: &PerturbationConfig,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<TokenSequence> {
    cfg.expect_mode(PerturbationMode::Uniform)?;
    replace_uniform(x, cfg.replace_prob, vocab.len(), rng)
}

fn replace_uniform<R: Rng + ?Sized>(
    x: &TokenSequence,
    p: f64,
    vocab_size: usize,
    rng: &mut R,
) -> Result<TokenSequence> {
    if vocab_size < 3 {
        return Err(Error::data(format!(
            "replacement vocabulary has {} non-unk tokens, need at least 2",
            vocab_size.saturating_sub(1)
        )));
    }
    let ids = x
        .ids()
        .iter()
        .map(|&orig| {
            if !rng.random_bool(p) {
                return orig;
            }
            if orig == UNK_ID || orig >= vocab_size {
                rng.random_range(1..vocab_size)
            } else {
                let r = rng.random_range(1..vocab_size - 1);
                if r >= orig {
                    r + 1
                } else {
                    r
                }
            }
        })
        .collect();
    Ok(TokenSequence(ids))
}

/// Marks sentence edges in proposer contexts.
pub const BOUNDARY: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
struct ContextCounts {
    total: u64,
    /// Nonzero center counts sorted by count descending, then id.
    ranked: Vec<(usize, u64)>,
}

/// Center-word distribution conditioned on the (left, right) neighbours,
/// add-α smoothed, with an add-α unigram backoff for unseen contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextProposer {
    vocab_size: usize,
    alpha: f64,
    contexts: HashMap<(usize, usize), ContextCounts>,
    unigram: Vec<u64>,
    unigram_total: u64,
    /// All ids sorted by unigram score descending, then id.
    unigram_order: Vec<usize>,
}

/// Fits a [`ContextProposer`] over `corpus`. Every position contributes one
/// count; positions at sentence edges use [`BOUNDARY`] as the missing
/// neighbour.
pub fn train_context_proposer(
    corpus: &[TokenSequence],
    vocab_size: usize,
    alpha: f64,
) -> Result<ContextProposer> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config("smoothing must be positive".into()));
    }
    if corpus.iter().all(TokenSequence::is_empty) {
        return Err(Error::data("cannot train a proposer on an empty corpus"));
    }
    if vocab_size == 0 {
        return Err(Error::data("vocabulary is empty"));
    }
    let mut raw: HashMap<(usize, usize), HashMap<usize, u64>> = HashMap::new();
    let mut unigram = vec![0u64; vocab_size];
    for seq in corpus {
        let ids = seq.ids();
        for (j, &center) in ids.iter().enumerate() {
            if center >= vocab_size {
                return Err(Error::data(format!(
                    "token id {center} outside vocabulary of size {vocab_size}"
                )));
            }
            let left = if j == 0 { BOUNDARY } else { ids[j - 1] };
            let right = ids.get(j + 1).copied().unwrap_or(BOUNDARY);
            *raw.entry((left, right)).or_default().entry(center).or_insert(0) += 1;
            unigram[center] += 1;
        }
    }
    let contexts = raw
        .into_iter()
        .map(|(ctx, counts)| {
            let total = counts.values().sum();
            let mut ranked: Vec<(usize, u64)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            (ctx, ContextCounts { total, ranked })
        })
        .collect();
    let unigram_total = unigram.iter().sum();
    let mut unigram_order: Vec<usize> = (0..vocab_size).collect();
    unigram_order.sort_by(|&a, &b| unigram[b].cmp(&unigram[a]).then(a.cmp(&b)));
    Ok(ContextProposer {
        vocab_size,
        alpha,
        contexts,
        unigram,
        unigram_total,
        unigram_order,
    })
}

impl ContextProposer {
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn is_seen(&self, left: usize, right: usize) -> bool {
        self.contexts.contains_key(&(left, right))
    }

    fn denominator(&self, total: u64) -> f64 {
        total as f64 + self.alpha * self.vocab_size as f64
    }

    /// Probability of `center` given the context.
    pub fn score(&self, left: usize, right: usize, center: usize) -> f64 {
        match self.contexts.get(&(left, right)) {
            Some(ctx) => {
                let c = ctx
                    .ranked
                    .iter()
                    .find(|(id, _)| *id == center)
                    .map_or(0, |(_, c)| *c);
                (c as f64 + self.alpha) / self.denominator(ctx.total)
            }
            None => self.unigram_score(center),
        }
    }

    pub fn unigram_score(&self, center: usize) -> f64 {
        (self.unigram[center] as f64 + self.alpha) / self.denominator(self.unigram_total)
    }

    /// Full proposal distribution over the vocabulary.
    pub fn distribution(&self, left: usize, right: usize) -> Vec<f64> {
        match self.contexts.get(&(left, right)) {
            Some(ctx) => {
                let denom = self.denominator(ctx.total);
                let mut probs = vec![self.alpha / denom; self.vocab_size];
                for &(id, c) in &ctx.ranked {
                    probs[id] = (c as f64 + self.alpha) / denom;
                }
                probs
            }
            None => (0..self.vocab_size).map(|w| self.unigram_score(w)).collect(),
        }
    }

    /// The `k` highest-scoring ids for the context, excluding unk and
    /// `exclude`, with their scores. Ties go to the lower id.
    pub fn top_candidates(&self, left: usize, right: usize, exclude: usize, k: usize) -> Vec<(usize, f64)> {
        let allowed = |id: usize| id != UNK_ID && id != exclude;
        let mut out = Vec::with_capacity(k);
        match self.contexts.get(&(left, right)) {
            Some(ctx) => {
                let denom = self.denominator(ctx.total);
                for &(id, c) in &ctx.ranked {
                    if out.len() == k {
                        return out;
                    }
                    if allowed(id) {
                        out.push((id, (c as f64 + self.alpha) / denom));
                    }
                }
                let floor = self.alpha / denom;
                let mut seen: Vec<usize> = ctx.ranked.iter().map(|&(id, _)| id).collect();
                seen.sort_unstable();
                for id in 0..self.vocab_size {
                    if out.len() == k {
                        break;
                    }
                    if allowed(id) && seen.binary_search(&id).is_err() {
                        out.push((id, floor));
                    }
                }
            }
            None => {
                out.extend(
                    self.unigram_order
                        .iter()
                        .copied()
                        .filter(|&id| allowed(id))
                        .take(k)
                        .map(|id| (id, self.unigram_score(id))),
                );
            }
        }
        out
    }
}

/// Replaces each position with probability `cfg.replace_prob` by a draw
/// from the proposer's `cfg.top_k` best candidates for that position's
/// context (original token excluded), weighted by proposer score.
pub fn contextual_replace<R: Rng + ?Sized>(
    x: &TokenSequence,
    cfg: &PerturbationConfig,
    proposer: &ContextProposer,
    rng: &mut R,
) -> Result<TokenSequence> {
    cfg.expect_mode(PerturbationMode::Contextual)?;
    replace_contextual(x, cfg.replace_prob, cfg.top_k, proposer, rng)
}

fn replace_contextual<R: Rng + ?Sized>(
    x: &TokenSequence,
    p: f64,
    top_k: usize,
    proposer: &ContextProposer,
    rng: &mut R,
) -> Result<TokenSequence> {
    if proposer.vocab_size < 3 {
        return Err(Error::data(format!(
            "replacement vocabulary has {} non-unk tokens, need at least 2",
            proposer.vocab_size.saturating_sub(1)
        )));
    }
    let ids = x.ids();
    let mut out = Vec::with_capacity(ids.len());
    for (j, &orig) in ids.iter().enumerate() {
        if !rng.random_bool(p) {
            out.push(orig);
            continue;
        }
        // Context comes from the observed sequence, not earlier replacements.
        let left = if j == 0 { BOUNDARY } else { ids[j - 1] };
        let right = ids.get(j + 1).copied().unwrap_or(BOUNDARY);
        let cands = proposer.top_candidates(left, right, orig, top_k);
        let total: f64 = cands.iter().map(|c| c.1).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = cands[cands.len() - 1].0;
        for &(id, s) in &cands {
            if u < s {
                pick = id;
                break;
            }
            u -= s;
        }
        out.push(pick);
    }
    Ok(TokenSequence(out))
}

/// Paraphrases keyed by example index in the corpus they were produced for.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParaphraseTable {
    entries: BTreeMap<usize, TokenSequence>,
}

impl ParaphraseTable {
    pub fn get(&self, id: usize) -> Result<&TokenSequence> {
        self.entries
            .get(&id)
            .ok_or_else(|| Error::data(format!("no paraphrase for example {id}")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &TokenSequence)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn remap(&self, map: &[usize]) -> ParaphraseTable {
        ParaphraseTable {
            entries: self.entries.iter().map(|(k, v)| (*k, v.remap(map))).collect(),
        }
    }
}

pub fn load_paraphrase_pairs(
    path: impl AsRef<Path>,
    corpus_len: usize,
    vocab: &Vocabulary,
) -> Result<ParaphraseTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_paraphrase_jsonl(&text, corpus_len, vocab).map_err(|e| e.in_file(path))
}

/// Parses `{"id": int, "paraphrase": str}` lines. Ids index a corpus of
/// `corpus_len` examples; tokens are interned against `vocab`.
pub fn parse_paraphrase_jsonl(input: &str, corpus_len: usize, vocab: &Vocabulary) -> Result<ParaphraseTable> {
    let mut entries = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Value =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, format!("invalid JSON: {e}")))?;
        let id = record
            .get("id")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::parse(lineno, "\"id\" must be a non-negative integer"))?;
        let text = record
            .get("paraphrase")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse(lineno, "\"paraphrase\" must be a string"))?;
        let id = usize::try_from(id)
            .ok()
            .filter(|&id| id < corpus_len)
            .ok_or_else(|| Error::parse(lineno, format!("id {id} not in corpus of {corpus_len} examples")))?;
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::parse(lineno, "paraphrase has no tokens"));
        }
        if entries.insert(id, vocab.encode(&tokens)).is_some() {
            return Err(Error::parse(lineno, format!("duplicate paraphrase id {id}")));
        }
    }
    Ok(ParaphraseTable { entries })
}

/// A perturbation operator q ready to apply during training. Ids are in the
/// replacement vocabulary's space.
#[derive(Debug, Clone)]
pub enum Augmenter {
    Identity,
    Uniform {
        replace_prob: f64,
        vocab_size: usize,
    },
    Contextual {
        replace_prob: f64,
        top_k: usize,
        proposer: ContextProposer,
    },
    Paraphrase(ParaphraseTable),
}

impl Augmenter {
    /// Perturbs `x`, the pool example with index `example_id`.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        example_id: usize,
        x: &TokenSequence,
        rng: &mut R,
    ) -> Result<TokenSequence> {
        match self {
            Augmenter::Identity => Ok(x.clone()),
            Augmenter::Uniform {
                replace_prob,
                vocab_size,
            } => replace_uniform(x, *replace_prob, *vocab_size, rng),
            Augmenter::Contextual {
                replace_prob,
                top_k,
                proposer,
            } => replace_contextual(x, *replace_prob, *top_k, proposer, rng),
            Augmenter::Paraphrase(table) => table.get(example_id).cloned(),
        }
    }

    /// True when the operator keeps sequence length, as tagging requires.
    pub fn preserves_length(&self) -> bool {
        !matches!(self, Augmenter::Paraphrase(_))
    }
}
