#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uda_core::consistency::{
    freeze_target, total_loss_with_targets, ConsistencyPair, FrozenTarget, LabeledItem, Target,
};
use uda_core::corpus::TokenSequence;
use uda_core::model::{emission_scores, transitions, Matrix, ModelParameters};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Overwrites every parameter with a draw from U(-scale, scale).
pub fn randomize(theta: &mut ModelParameters, rng: &mut ChaCha8Rng, scale: f64) {
    for t in theta.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}

pub fn random_sequence(rng: &mut ChaCha8Rng, len: usize, vocab: usize) -> TokenSequence {
    TokenSequence((0..len).map(|_| rng.random_range(0..vocab)).collect())
}

pub struct Problem {
    pub theta: ModelParameters,
    pub labeled: Vec<LabeledItem>,
    pub pairs: Vec<ConsistencyPair>,
}

pub fn classification_problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let vocab = r.random_range(3..=10);
    let dim = r.random_range(1..=4);
    let classes = r.random_range(2..=4);
    let mut theta = ModelParameters::init_classifier(vocab, dim, classes, seed);
    randomize(&mut theta, &mut r, 0.8);
    let labeled = (0..r.random_range(1..=3))
        .map(|_| {
            let n = r.random_range(1..=5);
            LabeledItem {
                tokens: random_sequence(&mut r, n, vocab),
                target: Target::Class(r.random_range(0..classes)),
            }
        })
        .collect();
    let pairs = (0..r.random_range(1..=3))
        .map(|_| {
            let n = r.random_range(1..=5);
            let m = r.random_range(1..=5);
            ConsistencyPair {
                clean: random_sequence(&mut r, n, vocab),
                augmented: random_sequence(&mut r, m, vocab),
            }
        })
        .collect();
    Problem {
        theta,
        labeled,
        pairs,
    }
}

pub fn tagging_problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let vocab = r.random_range(3..=10);
    let dim = r.random_range(1..=4);
    let tags = r.random_range(2..=3);
    let mut theta = ModelParameters::init_tagger(vocab, dim, tags, seed);
    randomize(&mut theta, &mut r, 0.8);
    let labeled = (0..r.random_range(1..=2))
        .map(|_| {
            let n = r.random_range(1..=5);
            LabeledItem {
                tokens: random_sequence(&mut r, n, vocab),
                target: Target::Tags((0..n).map(|_| r.random_range(0..tags)).collect()),
            }
        })
        .collect();
    let pairs = (0..r.random_range(1..=2))
        .map(|_| {
            let n = r.random_range(1..=5);
            ConsistencyPair {
                clean: random_sequence(&mut r, n, vocab),
                augmented: random_sequence(&mut r, n, vocab),
            }
        })
        .collect();
    Problem {
        theta,
        labeled,
        pairs,
    }
}

fn nudge(theta: &ModelParameters, index: usize, delta: f64) -> ModelParameters {
    let mut out = theta.clone();
    let mut k = index;
    for t in out.tensors_mut() {
        if k < t.len() {
            t[k] += delta;
            return out;
        }
        k -= t.len();
    }
    panic!("index {index} out of range");
}

/// Central differences of the objective with consistency targets frozen
/// at `theta`.
pub fn finite_difference(p: &Problem, lambda: f64, h: f64) -> Vec<f64> {
    let frozen: Vec<(FrozenTarget, TokenSequence)> = p
        .pairs
        .iter()
        .map(|q| (freeze_target(&q.clean, &p.theta).unwrap(), q.augmented.clone()))
        .collect();
    let f = |t: &ModelParameters| {
        total_loss_with_targets(&p.labeled, &frozen, t, lambda)
            .unwrap()
            .total
    };
    (0..p.theta.num_params())
        .map(|i| (f(&nudge(&p.theta, i, h)) - f(&nudge(&p.theta, i, -h))) / (2.0 * h))
        .collect()
}

/// Largest per-coordinate relative error, with denominators floored at
/// 1e-5 so near-zero coordinates are compared on an absolute scale.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-5))
        .fold(0.0, f64::max)
}

pub fn all_paths(n: usize, tags: usize) -> Vec<Vec<usize>> {
    let mut paths = vec![vec![]];
    for _ in 0..n {
        paths = paths
            .into_iter()
            .flat_map(|p| {
                (0..tags).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    paths
}

pub fn brute_score(em: &Matrix, tr: &Matrix, path: &[usize]) -> f64 {
    let t = em.cols();
    let mut s = tr.get(t, path[0]) + tr.get(path[path.len() - 1], t + 1);
    for (j, &y) in path.iter().enumerate() {
        s += em.get(j, y);
        if j > 0 {
            s += tr.get(path[j - 1], y);
        }
    }
    s
}

pub struct BruteCrf {
    pub log_z: f64,
    pub marginals: Vec<Vec<f64>>,
    pub best: Vec<usize>,
}

/// Exhaustive enumeration. Ties in the best path go to the first path in
/// lexicographic order.
pub fn brute_crf(x: &TokenSequence, theta: &ModelParameters) -> BruteCrf {
    let em = emission_scores(x, theta).unwrap();
    let tr = transitions(theta).unwrap();
    let (n, t) = em.shape();
    let paths = all_paths(n, t);
    let scores: Vec<f64> = paths.iter().map(|p| brute_score(&em, tr, p)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    let mut marginals = vec![vec![0.0; t]; n];
    for (p, s) in paths.iter().zip(&scores) {
        let w = (s - log_z).exp();
        for (j, &y) in p.iter().enumerate() {
            marginals[j][y] += w;
        }
    }
    let best_idx = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, &s)| if s > scores[b] { i } else { b });
    BruteCrf {
        log_z,
        marginals,
        best: paths[best_idx].clone(),
    }
}

pub fn brute_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}
