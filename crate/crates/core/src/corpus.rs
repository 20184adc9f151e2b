//! Corpus data model and ingestion.
//!
//! Loaders keep surface tokens; id sequences are produced by
//! [`Vocabulary::encode`] once a vocabulary has been built over the labeled
//! and unlabeled pools.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Lowercases, peels non-alphanumeric characters off word edges, and splits
/// on whitespace. Each peeled character becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        let chars: Vec<char> = word.chars().collect();
        let start = chars
            .iter()
            .position(|c| c.is_alphanumeric())
            .unwrap_or(chars.len());
        let end = chars
            .iter()
            .rposition(|c| c.is_alphanumeric())
            .map_or(start, |i| i + 1);
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        out.extend(chars[end.max(start)..].iter().map(|c| c.to_string()));
    }
    out
}

/// An ordered list of vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<usize>);

impl TokenSequence {
    pub fn new(ids: Vec<usize>) -> Self {
        TokenSequence(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Rewrites every id through `map` (e.g. a [`Vocabulary::remap_to`] table).
    pub fn remap(&self, map: &[usize]) -> TokenSequence {
        TokenSequence(self.0.iter().map(|&id| map[id]).collect())
    }
}

impl From<Vec<usize>> for TokenSequence {
    fn from(ids: Vec<usize>) -> Self {
        TokenSequence(ids)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Id of `token`, or [`UNK_ID`] when it is out of vocabulary.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> TokenSequence {
        TokenSequence(tokens.iter().map(|t| self.id(t.as_ref())).collect())
    }

    pub fn decode(&self, seq: &TokenSequence) -> Vec<&str> {
        seq.ids().iter().map(|&id| self.token(id)).collect()
    }

    /// Number of ids that may be drawn as replacements (everything but unk).
    pub fn num_candidates(&self) -> usize {
        self.len().saturating_sub(1)
    }

    /// Table mapping each id of `self` to the id of the same surface token
    /// in `other` (unk where `other` lacks it).
    pub fn remap_to(&self, other: &Vocabulary) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| if i == UNK_ID { UNK_ID } else { other.id(t) })
            .collect()
    }

    /// Stable 64-bit fingerprint of the ordered token list.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}

/// Builds a vocabulary from tokenized sentences. Ids are assigned by
/// descending count with lexicographic tie-break; unk is reserved at id 0 and
/// absorbs every token seen fewer than `min_count` times.
pub fn build_vocabulary<I, T, S>(sentences: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = T>,
    T: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for sentence in sentences {
        for tok in sentence {
            *counts.entry(tok.as_ref().to_owned()).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::data("cannot build a vocabulary from an empty corpus"));
    }
    let mut unk_count = counts.remove(UNK_TOKEN).unwrap_or(0);
    let mut kept: Vec<(String, u64)> = Vec::with_capacity(counts.len());
    for (tok, c) in counts {
        if c >= min_count {
            kept.push((tok, c));
        } else {
            unk_count += c;
        }
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens = Vec::with_capacity(kept.len() + 1);
    let mut vcounts = Vec::with_capacity(kept.len() + 1);
    tokens.push(UNK_TOKEN.to_owned());
    vcounts.push(unk_count);
    for (tok, c) in kept {
        tokens.push(tok);
        vcounts.push(c);
    }
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary {
        tokens,
        index,
        counts: vcounts,
    })
}

/// Dense interning of string labels in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        match self.get(name) {
            Some(id) => id,
            None => {
                self.names.push(name.to_owned());
                self.names.len() - 1
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A BIO tag decoded from its surface form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn parse(s: &str) -> Option<Tag> {
        if s == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, ty) = s.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(Tag::Begin(ty.to_owned())),
            "I" => Some(Tag::Inside(ty.to_owned())),
            _ => None,
        }
    }

    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(t) | Tag::Inside(t) => Some(t),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(t) => write!(f, "B-{t}"),
            Tag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

/// Tag inventory with `O` pinned at id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    tags: Vec<Tag>,
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet {
            tags: vec![Tag::Outside],
        }
    }
}

impl TagSet {
    pub const OUTSIDE: usize = 0;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, tag: Tag) -> usize {
        match self.get(&tag) {
            Some(id) => id,
            None => {
                self.tags.push(tag);
                self.tags.len() - 1
            }
        }
    }

    pub fn get(&self, tag: &Tag) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn tag(&self, id: usize) -> &Tag {
        &self.tags[id]
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.tags.iter().map(Tag::to_string).collect()
    }
}

/// A document with an optional class label. Tokens are surface strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationExample {
    pub tokens: Vec<String>,
    pub label: Option<usize>,
}

/// A sentence with optional per-token tag ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggingExample {
    pub tokens: Vec<String>,
    pub tags: Option<Vec<usize>>,
}

/// Behaviour shared by both example kinds for subset sampling.
pub trait Example: Clone {
    fn tokens(&self) -> &[String];
    fn is_labeled(&self) -> bool;
    fn without_label(&self) -> Self;
}

impl Example for ClassificationExample {
    fn tokens(&self) -> &[String] {
        &self.tokens
    }
    fn is_labeled(&self) -> bool {
        self.label.is_some()
    }
    fn without_label(&self) -> Self {
        ClassificationExample {
            tokens: self.tokens.clone(),
            label: None,
        }
    }
}

impl Example for TaggingExample {
    fn tokens(&self) -> &[String] {
        &self.tokens
    }
    fn is_labeled(&self) -> bool {
        self.tags.is_some()
    }
    fn without_label(&self) -> Self {
        TaggingExample {
            tokens: self.tokens.clone(),
            tags: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationCorpus {
    pub examples: Vec<ClassificationExample>,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggingCorpus {
    pub examples: Vec<TaggingExample>,
    pub tags: TagSet,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_classification_corpus(path: impl AsRef<Path>) -> Result<ClassificationCorpus> {
    let path = path.as_ref();
    let mut labels = LabelSet::new();
    let examples = parse_classification_jsonl(&read_text(path)?, &mut labels).map_err(|e| e.in_file(path))?;
    Ok(ClassificationCorpus { examples, labels })
}

/// Parses JSON Lines records `{"text": str, "label": str|null}`, interning
/// labels into `labels` (which may already hold names from another file).
pub fn parse_classification_jsonl(input: &str, labels: &mut LabelSet) -> Result<Vec<ClassificationExample>> {
    let mut examples = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Value =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, format!("invalid JSON: {e}")))?;
        let obj = record
            .as_object()
            .ok_or_else(|| Error::parse(lineno, "record is not a JSON object"))?;
        let text = match obj.get("text") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(Error::parse(lineno, "\"text\" must be a string")),
            None => return Err(Error::parse(lineno, "missing \"text\" field")),
        };
        let label = match obj.get("label") {
            Some(Value::String(s)) => Some(labels.intern(s)),
            Some(Value::Null) => None,
            Some(_) => return Err(Error::parse(lineno, "\"label\" must be a string or null")),
            None => return Err(Error::parse(lineno, "missing \"label\" field")),
        };
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::parse(lineno, "text has no tokens"));
        }
        examples.push(ClassificationExample { tokens, label });
    }
    if examples.is_empty() {
        return Err(Error::data("corpus contains no records"));
    }
    Ok(examples)
}

pub fn write_classification_jsonl(examples: &[ClassificationExample], labels: &LabelSet) -> String {
    let mut out = String::new();
    for ex in examples {
        let label = ex
            .label
            .map_or(Value::Null, |l| Value::String(labels.name(l).to_owned()));
        let record = serde_json::json!({ "text": ex.tokens.join(" "), "label": label });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

pub fn load_conll_corpus(path: impl AsRef<Path>) -> Result<TaggingCorpus> {
    let path = path.as_ref();
    let mut tags = TagSet::new();
    let examples = parse_conll(&read_text(path)?, &mut tags).map_err(|e| e.in_file(path))?;
    Ok(TaggingCorpus { examples, tags })
}

/// Parses CoNLL column text: surface token in the first column, tag in the
/// last, blank lines between sentences, `-DOCSTART-` lines ignored. Illegal
/// `I-` tags are rewritten to `B-` of the same type.
pub fn parse_conll(input: &str, tags: &mut TagSet) -> Result<Vec<TaggingExample>> {
    let mut examples = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut raw_tags: Vec<Tag> = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, raw: &mut Vec<Tag>, tags: &mut TagSet| {
        if tokens.is_empty() {
            return;
        }
        repair_bio(raw);
        let ids = raw.drain(..).map(|t| tags.intern(t)).collect();
        examples.push(TaggingExample {
            tokens: std::mem::take(tokens),
            tags: Some(ids),
        });
    };

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut tokens, &mut raw_tags, tags);
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() < 2 {
            return Err(Error::parse(
                lineno,
                "token line needs at least 2 columns (token and tag)",
            ));
        }
        let tag_str = cols[cols.len() - 1];
        let tag = Tag::parse(tag_str)
            .ok_or_else(|| Error::parse(lineno, format!("tag {tag_str:?} is not a BIO tag")))?;
        tokens.push(cols[0].to_lowercase());
        raw_tags.push(tag);
    }
    flush(&mut tokens, &mut raw_tags, tags);

    if examples.is_empty() {
        return Err(Error::data("corpus contains no sentences"));
    }
    Ok(examples)
}

/// Rewrites every `I-X` that does not continue a span of type `X` to `B-X`.
pub fn repair_bio(tags: &mut [Tag]) {
    let mut prev: Option<String> = None;
    for tag in tags.iter_mut() {
        if let Tag::Inside(ty) = tag {
            if prev.as_deref() != Some(ty.as_str()) {
                *tag = Tag::Begin(ty.clone());
            }
        }
        prev = tag.entity_type().map(str::to_owned);
    }
}

/// True when no `I-X` opens a span.
pub fn is_valid_bio(tags: &[Tag]) -> bool {
    let mut prev: Option<&str> = None;
    for tag in tags {
        if let Tag::Inside(ty) = tag {
            if prev != Some(ty.as_str()) {
                return false;
            }
        }
        prev = tag.entity_type();
    }
    true
}

pub fn write_conll(examples: &[TaggingExample], tags: &TagSet) -> String {
    let mut out = String::new();
    for ex in examples {
        for (j, tok) in ex.tokens.iter().enumerate() {
            let tag = ex.tags.as_ref().map_or(Tag::Outside, |t| tags.tag(t[j]).clone());
            out.push_str(&format!("{tok} {tag}\n"));
        }
        out.push('\n');
    }
    out
}

/// How many labeled examples to reveal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSpec {
    /// `k` examples per class (classification).
    PerClass(usize),
    /// `m` sentences (tagging).
    Sentences(usize),
}

/// The labeled set L and unlabeled set U drawn from one pool. Identity is
/// the example's index in the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit<E> {
    pub labeled: Vec<E>,
    pub unlabeled: Vec<E>,
    pub labeled_index: Vec<usize>,
    pub unlabeled_index: Vec<usize>,
    pub seed: u64,
}

impl<E: Example> DatasetSplit<E> {
    fn from_selection(pool: &[E], mut chosen: Vec<usize>, seed: u64) -> Self {
        chosen.sort_unstable();
        let mut is_chosen = vec![false; pool.len()];
        for &i in &chosen {
            is_chosen[i] = true;
        }
        let unlabeled_index: Vec<usize> = (0..pool.len()).filter(|&i| !is_chosen[i]).collect();
        DatasetSplit {
            labeled: chosen.iter().map(|&i| pool[i].clone()).collect(),
            unlabeled: unlabeled_index.iter().map(|&i| pool[i].without_label()).collect(),
            labeled_index: chosen,
            unlabeled_index,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reveals exactly `per_class` labels per class, drawn uniformly without
/// replacement. Unlabeled pool records always land in U.
pub fn sample_classification_subset(
    pool: &[ClassificationExample],
    labels: &LabelSet,
    per_class: usize,
    seed: u64,
) -> Result<DatasetSplit<ClassificationExample>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = (0..labels.len()).map(|c| (c, vec![])).collect();
    for (i, ex) in pool.iter().enumerate() {
        if let Some(l) = ex.label {
            by_class.entry(l).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (class, members) in &by_class {
        if members.len() < per_class {
            let name = if *class < labels.len() {
                labels.name(*class).to_owned()
            } else {
                class.to_string()
            };
            return Err(Error::data(format!(
                "class {name:?} has {} labeled examples, {per_class} requested",
                members.len()
            )));
        }
        chosen.extend(
            index::sample(&mut rng, members.len(), per_class)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    Ok(DatasetSplit::from_selection(pool, chosen, seed))
}

/// Reveals exactly `sentences` labeled sentences drawn uniformly.
pub fn sample_tagging_subset(
    pool: &[TaggingExample],
    sentences: usize,
    seed: u64,
) -> Result<DatasetSplit<TaggingExample>> {
    let candidates: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].is_labeled()).collect();
    if candidates.len() < sentences {
        return Err(Error::data(format!(
            "pool has {} labeled sentences, {sentences} requested",
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = index::sample(&mut rng, candidates.len(), sentences)
        .into_iter()
        .map(|j| candidates[j])
        .collect();
    Ok(DatasetSplit::from_selection(pool, chosen, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn tokenizer_splits_edge_punctuation() {
        assert_eq!(tokenize("Good movie!"), vec!["good", "movie", "!"]);
        assert_eq!(
            tokenize("\"Don't\" stop."),
            vec!["\"", "don't", "\"", "stop", "."]
        );
        assert_eq!(tokenize("...  "), vec![".", ".", "."]);
        assert_eq!(tokenize("a.b"), vec!["a.b"]);
    }

    #[test]
    fn classification_record_parses() {
        let mut labels = LabelSet::new();
        let ex = parse_classification_jsonl(r#"{"text":"good movie","label":"pos"}"#, &mut labels).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].tokens.len(), 2);
        assert_eq!(ex[0].label, Some(0));
    }

    #[test]
    fn null_label_is_unlabeled() {
        let mut labels = LabelSet::new();
        let ex = parse_classification_jsonl(r#"{"text":"bad","label":null}"#, &mut labels).unwrap();
        assert_eq!(ex[0].tokens, vec!["bad"]);
        assert_eq!(ex[0].label, None);
    }

    #[test]
    fn labels_interned_first_seen() {
        let input = r#"{"text":"a","label":"pos"}
{"text":"b","label":"neg"}
{"text":"c","label":"pos"}
"#;
        let mut labels = LabelSet::new();
        let ex = parse_classification_jsonl(input, &mut labels).unwrap();
        let ids: Vec<_> = ex.iter().map(|e| e.label.unwrap()).collect();
        assert_eq!(ids, vec![0, 1, 0]);
        assert_eq!(labels.names(), &["pos".to_owned(), "neg".to_owned()]);
    }

    #[test]
    fn classification_errors_name_line() {
        let mut labels = LabelSet::new();
        let input = "{\"text\":\"a\",\"label\":\"x\"}\n{\"text\":\"a\"";
        match parse_classification_jsonl(input, &mut labels) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let input = "{\"text\":3,\"label\":\"x\"}";
        assert!(matches!(
            parse_classification_jsonl(input, &mut labels),
            Err(Error::Parse { line: 1, .. })
        ));
        let input = "{\"text\":\"a\",\"label\":5}";
        assert!(matches!(
            parse_classification_jsonl(input, &mut labels),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_classification_jsonl("", &mut labels),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn conll_block_parses() {
        let mut tags = TagSet::new();
        let ex = parse_conll("EU B-ORG\nrejects O\n", &mut tags).unwrap();
        assert_eq!(ex.len(), 1);
        let names: Vec<String> = ex[0]
            .tags
            .as_ref()
            .unwrap()
            .iter()
            .map(|&t| tags.tag(t).to_string())
            .collect();
        assert_eq!(names, vec!["B-ORG", "O"]);
        assert_eq!(tags.tag(0), &Tag::Outside);
        assert_eq!(ex[0].tokens, vec!["eu", "rejects"]);
    }

    #[test]
    fn conll_blocks_and_docstart() {
        let mut tags = TagSet::new();
        let input = "-DOCSTART- -X- O O\n\nEU NNP B-ORG\n\nPeter NNP B-PER\nBlackburn NNP I-PER\n";
        let ex = parse_conll(input, &mut tags).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[1].tokens, vec!["peter", "blackburn"]);

        let err = parse_conll("-DOCSTART- O\n-DOCSTART- O\n", &mut TagSet::new());
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn conll_short_line_is_error() {
        let err = parse_conll("EU B-ORG\nrejects\n", &mut TagSet::new());
        assert!(matches!(err, Err(Error::Parse { line: 2, .. })));
        let err = parse_conll("EU X-ORG\n", &mut TagSet::new());
        assert!(matches!(err, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn illegal_inside_is_repaired() {
        let mut tags = TagSet::new();
        let ex = parse_conll("a I-PER\nb I-PER\nc I-LOC\nd O\ne I-LOC\n", &mut tags).unwrap();
        let names: Vec<String> = ex[0]
            .tags
            .as_ref()
            .unwrap()
            .iter()
            .map(|&t| tags.tag(t).to_string())
            .collect();
        assert_eq!(names, vec!["B-PER", "I-PER", "B-LOC", "O", "B-LOC"]);
        let decoded: Vec<Tag> = ex[0]
            .tags
            .as_ref()
            .unwrap()
            .iter()
            .map(|&t| tags.tag(t).clone())
            .collect();
        assert!(is_valid_bio(&decoded));
    }

    #[test]
    fn vocabulary_orders_by_count() {
        let v = build_vocabulary([toks("a a b")], 1).unwrap();
        assert_eq!(v.tokens(), &["<unk>", "a", "b"]);
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("b"), 2);
        assert_eq!(v.id("zzz"), UNK_ID);
    }

    #[test]
    fn vocabulary_threshold_maps_to_unk() {
        let v = build_vocabulary([toks("a a b")], 2).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.id("b"), UNK_ID);
        assert_eq!(v.counts()[UNK_ID], 1);
    }

    #[test]
    fn vocabulary_tie_break_is_lexicographic() {
        let v = build_vocabulary([toks("y x y x y x")], 1).unwrap();
        assert_eq!(v.id("x"), 1);
        assert_eq!(v.id("y"), 2);
    }

    #[test]
    fn vocabulary_rejects_empty() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(build_vocabulary(empty, 1).is_err());
        assert!(build_vocabulary([toks("a")], 0).is_err());
    }

    #[test]
    fn remap_between_vocabularies() {
        let full = build_vocabulary([toks("a a b")], 1).unwrap();
        let model = build_vocabulary([toks("a a b")], 2).unwrap();
        let map = full.remap_to(&model);
        assert_eq!(map, vec![0, 1, 0]);
    }

    fn binary_pool(per_class: usize) -> (Vec<ClassificationExample>, LabelSet) {
        let mut labels = LabelSet::new();
        labels.intern("pos");
        labels.intern("neg");
        let pool = (0..2 * per_class)
            .map(|i| ClassificationExample {
                tokens: vec![format!("w{i}")],
                label: Some(i % 2),
            })
            .collect();
        (pool, labels)
    }

    #[test]
    fn ten_per_class_gives_twenty() {
        let (pool, labels) = binary_pool(50);
        let split = sample_classification_subset(&pool, &labels, 10, 7).unwrap();
        assert_eq!(split.labeled.len(), 20);
        assert_eq!(split.unlabeled.len(), 80);
        for c in 0..2 {
            assert_eq!(split.labeled.iter().filter(|e| e.label == Some(c)).count(), 10);
        }
        assert!(split.unlabeled.iter().all(|e| e.label.is_none()));
    }

    #[test]
    fn zero_per_class_is_all_unlabeled() {
        let (pool, labels) = binary_pool(5);
        let split = sample_classification_subset(&pool, &labels, 0, 1).unwrap();
        assert!(split.labeled.is_empty());
        assert_eq!(split.unlabeled.len(), pool.len());
    }

    #[test]
    fn insufficient_class_is_named() {
        let (mut pool, labels) = binary_pool(5);
        pool.retain(|e| e.label == Some(0) || e.tokens[0] == "w1");
        let err = sample_classification_subset(&pool, &labels, 3, 1).unwrap_err();
        assert!(err.to_string().contains("neg"), "{err}");
    }

    #[test]
    fn tagging_subset_counts_sentences() {
        let pool: Vec<TaggingExample> = (0..30)
            .map(|i| TaggingExample {
                tokens: vec![format!("t{i}")],
                tags: Some(vec![0]),
            })
            .collect();
        let split = sample_tagging_subset(&pool, 12, 3).unwrap();
        assert_eq!(split.labeled.len(), 12);
        assert_eq!(split.unlabeled.len(), 18);
        assert!(sample_tagging_subset(&pool, 31, 3).is_err());
    }

    proptest! {
        #[test]
        fn split_is_partition_and_deterministic(n in 2usize..60, k in 0usize..3, seed in any::<u64>()) {
            let (pool, labels) = binary_pool(n);
            let k = k.min(n);
            let a = sample_classification_subset(&pool, &labels, k, seed).unwrap();
            let b = sample_classification_subset(&pool, &labels, k, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), pool.len());
            let mut all: Vec<usize> = a.labeled_index.iter().chain(&a.unlabeled_index).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..pool.len()).collect::<Vec<_>>());
            prop_assert!(a.unlabeled.iter().all(|e| e.label.is_none()));
        }

        #[test]
        fn classification_round_trip(texts in prop::collection::vec(("[a-zA-Z,.!']{1,8}( [a-zA-Z,.!']{1,8}){0,5}", prop::option::of(0usize..3)), 1..10)) {
            let mut labels = LabelSet::new();
            for name in ["x", "y", "z"] { labels.intern(name); }
            let input: String = texts.iter().map(|(t, l)| {
                let label = l.map_or(Value::Null, |l| Value::String(labels.name(l).to_owned()));
                format!("{}\n", serde_json::json!({"text": t, "label": label}))
            }).collect();
            let mut l1 = labels.clone();
            let first = parse_classification_jsonl(&input, &mut l1).unwrap();
            let written = write_classification_jsonl(&first, &l1);
            let mut l2 = labels.clone();
            let second = parse_classification_jsonl(&written, &mut l2).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn conll_round_trip(sents in prop::collection::vec(prop::collection::vec(("[a-z]{1,6}", 0usize..5), 1..8), 1..6)) {
            let names = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC"];
            let input: String = sents.iter().map(|s| {
                let mut block: String = s.iter().map(|(t, g)| format!("{t} {}\n", names[*g])).collect();
                block.push('\n');
                block
            }).collect();
            let mut tags = TagSet::new();
            let first = parse_conll(&input, &mut tags).unwrap();
            let written = write_conll(&first, &tags);
            let mut tags2 = TagSet::new();
            let second = parse_conll(&written, &mut tags2).unwrap();
            prop_assert_eq!(&tags, &tags2);
            prop_assert_eq!(first, second);
        }
    }
}
