//! Evaluation metrics for both tasks and span length statistics.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::corpus::{Tag, TagSet, TaggingExample, TokenSequence};
use crate::error::{Error, Result};
use crate::model::{classify_forward, viterbi_decode, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 over `num_classes` classes. A class with no true
/// positives, false positives or false negatives scores F1 = 0.
pub fn classification_metrics(gold: &[usize], pred: &[usize], num_classes: usize) -> ClassificationMetrics {
    assert_eq!(gold.len(), pred.len());
    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let f1_sum: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    ClassificationMetrics {
        accuracy: correct as f64 / gold.len().max(1) as f64,
        macro_f1: if num_classes == 0 {
            0.0
        } else {
            f1_sum / num_classes as f64
        },
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate_classifier(
    theta: &ModelParameters,
    test: &[(TokenSequence, usize)],
) -> Result<ClassificationMetrics> {
    if test.is_empty() {
        return Err(Error::data("empty test set"));
    }
    let mut gold = Vec::with_capacity(test.len());
    let mut pred = Vec::with_capacity(test.len());
    for (x, y) in test {
        pred.push(argmax(&classify_forward(x, theta)?));
        gold.push(*y);
    }
    Ok(classification_metrics(&gold, &pred, theta.num_outputs()))
}

/// A typed span over tokens `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub entity: String,
    pub start: usize,
    pub end: usize,
}

/// Extracts spans from BIO tags. An `I-X` that does not continue an open
/// `X` span opens a new one.
pub fn extract_spans(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<Span> = None;
    for (j, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Outside => {
                spans.extend(open.take());
            }
            Tag::Begin(ty) => {
                spans.extend(open.take());
                open = Some(Span {
                    entity: ty.clone(),
                    start: j,
                    end: j + 1,
                });
            }
            Tag::Inside(ty) => match &mut open {
                Some(s) if &s.entity == ty => s.end = j + 1,
                _ => {
                    spans.extend(open.take());
                    open = Some(Span {
                        entity: ty.clone(),
                        start: j,
                        end: j + 1,
                    });
                }
            },
        }
    }
    spans.extend(open);
    spans
}

pub fn extract_spans_ids(ids: &[usize], tagset: &TagSet) -> Vec<Span> {
    let tags: Vec<Tag> = ids.iter().map(|&t| tagset.tag(t).clone()).collect();
    extract_spans(&tags)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrecisionRecall {
    /// Zero predicted (or gold) items give precision (or recall) 0.
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted == 0 {
            0.0
        } else {
            correct as f64 / predicted as f64
        };
        let recall = if gold == 0 {
            0.0
        } else {
            correct as f64 / gold as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrecisionRecall {
            precision,
            recall,
            f1,
        }
    }
}

/// Micro-averaged exact-match span scores for one batch of sentences.
pub fn span_scores(gold: &[Vec<Span>], pred: &[Vec<Span>]) -> PrecisionRecall {
    let mut correct = 0;
    let mut n_pred = 0;
    let mut n_gold = 0;
    for (g, p) in gold.iter().zip(pred) {
        n_gold += g.len();
        n_pred += p.len();
        let mut remaining: HashMap<&Span, usize> = HashMap::new();
        for s in g {
            *remaining.entry(s).or_insert(0) += 1;
        }
        for s in p {
            if let Some(c) = remaining.get_mut(s) {
                if *c > 0 {
                    *c -= 1;
                    correct += 1;
                }
            }
        }
    }
    PrecisionRecall::from_counts(correct, n_pred, n_gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaggingMetrics {
    pub token_accuracy: f64,
    /// Micro F1 over tokens whose gold or predicted tag is not `O`.
    pub token_f1: f64,
    pub span_precision: f64,
    pub span_recall: f64,
    pub span_f1: f64,
}

pub fn tagging_metrics(gold: &[Vec<usize>], pred: &[Vec<usize>], tagset: &TagSet) -> TaggingMetrics {
    let mut total = 0;
    let mut correct = 0;
    let mut tp = 0;
    let mut pred_pos = 0;
    let mut gold_pos = 0;
    for (g, p) in gold.iter().zip(pred) {
        for (&gt, &pt) in g.iter().zip(p) {
            total += 1;
            if gt == pt {
                correct += 1;
            }
            let g_ent = gt != TagSet::OUTSIDE;
            let p_ent = pt != TagSet::OUTSIDE;
            gold_pos += g_ent as usize;
            pred_pos += p_ent as usize;
            if g_ent && gt == pt {
                tp += 1;
            }
        }
    }
    let gold_spans: Vec<Vec<Span>> = gold.iter().map(|t| extract_spans_ids(t, tagset)).collect();
    let pred_spans: Vec<Vec<Span>> = pred.iter().map(|t| extract_spans_ids(t, tagset)).collect();
    let spans = span_scores(&gold_spans, &pred_spans);
    TaggingMetrics {
        token_accuracy: correct as f64 / total.max(1) as f64,
        token_f1: PrecisionRecall::from_counts(tp, pred_pos, gold_pos).f1,
        span_precision: spans.precision,
        span_recall: spans.recall,
        span_f1: spans.f1,
    }
}

pub fn evaluate_tagger(
    theta: &ModelParameters,
    test: &[(TokenSequence, Vec<usize>)],
    tagset: &TagSet,
) -> Result<TaggingMetrics> {
    if test.is_empty() {
        return Err(Error::data("empty test set"));
    }
    let mut gold = Vec::with_capacity(test.len());
    let mut pred = Vec::with_capacity(test.len());
    for (x, tags) in test {
        pred.push(viterbi_decode(x, theta)?);
        gold.push(tags.clone());
    }
    Ok(tagging_metrics(&gold, &pred, tagset))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanLengthStat {
    pub spans: usize,
    pub mean_length: f64,
}

/// Mean span length in words per entity type.
pub fn span_statistics(
    corpus: &[TaggingExample],
    tagset: &TagSet,
) -> Result<BTreeMap<String, SpanLengthStat>> {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for ex in corpus {
        let Some(tags) = &ex.tags else { continue };
        for span in extract_spans_ids(tags, tagset) {
            let e = acc.entry(span.entity).or_insert((0, 0));
            e.0 += 1;
            e.1 += span.end - span.start;
        }
    }
    if acc.is_empty() {
        return Err(Error::data("corpus contains no spans"));
    }
    Ok(acc
        .into_iter()
        .map(|(k, (n, len))| {
            (
                k,
                SpanLengthStat {
                    spans: n,
                    mean_length: len as f64 / n as f64,
                },
            )
        })
        .collect())
}

/// One row per entity type: `type<TAB>spans<TAB>mean`, mean to one decimal.
pub fn format_span_statistics(stats: &BTreeMap<String, SpanLengthStat>) -> String {
    let mut out = String::from("type\tspans\tmean_length\n");
    for (k, s) in stats {
        out.push_str(&format!("{k}\t{}\t{:.1}\n", s.spans, s.mean_length));
    }
    out
}
