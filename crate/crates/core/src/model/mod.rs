//! Differentiable predictors: a mean-pooled bag-of-embeddings softmax
//! classifier and a windowed-embedding linear-chain CRF tagger.

mod checkpoint;
pub mod crf;
mod grad;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use grad::loss_gradient;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// `weights` is d x classes.
    Classifier { weights: Matrix, bias: Vec<f64> },
    /// `boundary` holds the left and right padding vectors (2 x d),
    /// `emission` maps a 3-token window (3d x tags), and `transitions` is
    /// (tags+2) x (tags+2) with start at index `tags` and stop at `tags+1`.
    Tagger {
        boundary: Matrix,
        emission: Matrix,
        emission_bias: Vec<f64>,
        transitions: Matrix,
    },
}

/// All trainable weights. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub embeddings: Matrix,
    pub head: Head,
}

pub type Gradient = ModelParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Classification,
    Tagging,
}

impl ModelParameters {
    /// Embeddings uniform in [-0.1, 0.1], weights normal with std
    /// 1/sqrt(fan-in), biases zero.
    pub fn init_classifier(vocab_size: usize, dim: usize, num_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embeddings = uniform_matrix(&mut rng, vocab_size, dim);
        let weights = normal_matrix(&mut rng, dim, num_classes);
        ModelParameters {
            embeddings,
            head: Head::Classifier {
                weights,
                bias: vec![0.0; num_classes],
            },
        }
    }

    /// Same scheme as [`Self::init_classifier`]; transitions start at zero.
    pub fn init_tagger(vocab_size: usize, dim: usize, num_tags: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embeddings = uniform_matrix(&mut rng, vocab_size, dim);
        let boundary = uniform_matrix(&mut rng, 2, dim);
        let emission = normal_matrix(&mut rng, 3 * dim, num_tags);
        ModelParameters {
            embeddings,
            head: Head::Tagger {
                boundary,
                emission,
                emission_bias: vec![0.0; num_tags],
                transitions: Matrix::zeros(num_tags + 2, num_tags + 2),
            },
        }
    }

    pub fn task(&self) -> TaskKind {
        match self.head {
            Head::Classifier { .. } => TaskKind::Classification,
            Head::Tagger { .. } => TaskKind::Tagging,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    /// Number of classes or tags.
    pub fn num_outputs(&self) -> usize {
        match &self.head {
            Head::Classifier { bias, .. } => bias.len(),
            Head::Tagger { emission_bias, .. } => emission_bias.len(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every parameter tensor as a flat slice, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embeddings.as_slice()];
        match &self.head {
            Head::Classifier { weights, bias } => {
                out.push(weights.as_slice());
                out.push(bias);
            }
            Head::Tagger {
                boundary,
                emission,
                emission_bias,
                transitions,
            } => {
                out.push(boundary.as_slice());
                out.push(emission.as_slice());
                out.push(emission_bias);
                out.push(transitions.as_slice());
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embeddings.as_mut_slice()];
        match &mut self.head {
            Head::Classifier { weights, bias } => {
                out.push(weights.as_mut_slice());
                out.push(bias);
            }
            Head::Tagger {
                boundary,
                emission,
                emission_bias,
                transitions,
            } => {
                out.push(boundary.as_mut_slice());
                out.push(emission.as_mut_slice());
                out.push(emission_bias);
                out.push(transitions.as_mut_slice());
            }
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Errors unless `other` has the same head kind and tensor shapes.
    pub fn check_congruent(&self, other: &ModelParameters) -> Result<()> {
        let same_kind = self.task() == other.task();
        let a = self.tensors();
        let b = other.tensors();
        if !same_kind
            || self.embeddings.shape() != other.embeddings.shape()
            || a.len() != b.len()
            || a.iter().zip(&b).any(|(x, y)| x.len() != y.len())
        {
            return Err(Error::Shape("parameter sets are not congruent".into()));
        }
        Ok(())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParameters, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn check_tokens(&self, x: &TokenSequence) -> Result<()> {
        if x.is_empty() {
            return Err(Error::data("empty token sequence"));
        }
        let v = self.vocab_size();
        if let Some(&bad) = x.ids().iter().find(|&&id| id >= v) {
            return Err(Error::Shape(format!(
                "token id {bad} outside embedding table of {v} rows"
            )));
        }
        Ok(())
    }

    /// Validates dimensions and every entry before use.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        match &self.head {
            Head::Classifier { weights, bias } => {
                if weights.rows() != d || weights.cols() != bias.len() || bias.is_empty() {
                    return Err(Error::Shape("classifier head dimensions".into()));
                }
            }
            Head::Tagger {
                boundary,
                emission,
                emission_bias,
                transitions,
            } => {
                let t = emission_bias.len();
                if boundary.shape() != (2, d)
                    || emission.shape() != (3 * d, t)
                    || transitions.shape() != (t + 2, t + 2)
                    || t == 0
                {
                    return Err(Error::Shape("tagger head dimensions".into()));
                }
            }
        }
        if !self.is_finite() {
            return Err(Error::numeric("model parameters"));
        }
        Ok(())
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-0.1..=0.1)).collect();
    Matrix { rows, cols, data }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let std = 1.0 / (rows.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix { rows, cols, data }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

fn classifier_parts(theta: &ModelParameters) -> Result<(&Matrix, &[f64])> {
    match &theta.head {
        Head::Classifier { weights, bias } => Ok((weights, bias)),
        Head::Tagger { .. } => Err(Error::Shape("expected a classifier head".into())),
    }
}

fn tagger_parts(theta: &ModelParameters) -> Result<(&Matrix, &Matrix, &[f64], &Matrix)> {
    match &theta.head {
        Head::Tagger {
            boundary,
            emission,
            emission_bias,
            transitions,
        } => Ok((boundary, emission, emission_bias, transitions)),
        Head::Classifier { .. } => Err(Error::Shape("expected a tagger head".into())),
    }
}

/// Mean of the token embeddings.
pub(crate) fn pooled(x: &TokenSequence, theta: &ModelParameters) -> Vec<f64> {
    let d = theta.dim();
    let mut h = vec![0.0; d];
    for &id in x.ids() {
        for (hk, e) in h.iter_mut().zip(theta.embeddings.row(id)) {
            *hk += e;
        }
    }
    let n = x.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Unnormalized class scores.
pub fn class_logits(x: &TokenSequence, theta: &ModelParameters) -> Result<Vec<f64>> {
    theta.check_tokens(x)?;
    let (weights, bias) = classifier_parts(theta)?;
    if weights.rows() != theta.dim() {
        return Err(Error::Shape(
            "classifier weights do not match embedding width".into(),
        ));
    }
    let h = pooled(x, theta);
    let mut z = bias.to_vec();
    for (k, hk) in h.iter().enumerate() {
        for (c, zc) in z.iter_mut().enumerate() {
            *zc += hk * weights.get(k, c);
        }
    }
    Ok(z)
}

/// Class distribution p(y|x).
pub fn classify_forward(x: &TokenSequence, theta: &ModelParameters) -> Result<Vec<f64>> {
    Ok(softmax(&class_logits(x, theta)?))
}

/// Row j is [left | current | right] embeddings, padded with the boundary
/// vectors at sentence edges.
pub(crate) fn window_features(x: &TokenSequence, theta: &ModelParameters, boundary: &Matrix) -> Matrix {
    let d = theta.dim();
    let ids = x.ids();
    let n = ids.len();
    let mut f = Matrix::zeros(n, 3 * d);
    for j in 0..n {
        let left = if j == 0 {
            boundary.row(0)
        } else {
            theta.embeddings.row(ids[j - 1])
        };
        let right = if j + 1 == n {
            boundary.row(1)
        } else {
            theta.embeddings.row(ids[j + 1])
        };
        let row = f.row_mut(j);
        row[..d].copy_from_slice(left);
        row[d..2 * d].copy_from_slice(theta.embeddings.row(ids[j]));
        row[2 * d..].copy_from_slice(right);
    }
    f
}

/// Per-token emission scores (n x tags).
pub fn emission_scores(x: &TokenSequence, theta: &ModelParameters) -> Result<Matrix> {
    theta.check_tokens(x)?;
    let (boundary, emission, bias, _) = tagger_parts(theta)?;
    let d = theta.dim();
    if emission.rows() != 3 * d || boundary.shape() != (2, d) {
        return Err(Error::Shape("tagger weights do not match embedding width".into()));
    }
    let f = window_features(x, theta, boundary);
    let t = bias.len();
    let mut e = Matrix::zeros(x.len(), t);
    for j in 0..x.len() {
        let fr = f.row(j);
        let er = e.row_mut(j);
        er.copy_from_slice(bias);
        for (k, fk) in fr.iter().enumerate() {
            if *fk == 0.0 {
                continue;
            }
            for (y, ey) in er.iter_mut().enumerate() {
                *ey += fk * emission.get(k, y);
            }
        }
    }
    Ok(e)
}

pub fn transitions(theta: &ModelParameters) -> Result<&Matrix> {
    Ok(tagger_parts(theta)?.3)
}

/// log Z of the CRF over tag paths for `x`.
pub fn log_partition(x: &TokenSequence, theta: &ModelParameters) -> Result<f64> {
    let e = emission_scores(x, theta)?;
    Ok(crf::log_partition(&e, transitions(theta)?))
}

/// Exact per-token marginals P(y_j | x) (n x tags).
pub fn tag_marginals(x: &TokenSequence, theta: &ModelParameters) -> Result<Matrix> {
    let e = emission_scores(x, theta)?;
    Ok(crf::Lattice::new(&e, transitions(theta)?).marginals())
}

/// Highest-scoring tag path; ties go to the lower tag id.
pub fn viterbi_decode(x: &TokenSequence, theta: &ModelParameters) -> Result<Vec<usize>> {
    let e = emission_scores(x, theta)?;
    Ok(crf::viterbi(&e, transitions(theta)?))
}

/// Unnormalized score of a full tag path.
pub fn path_score(x: &TokenSequence, tags: &[usize], theta: &ModelParameters) -> Result<f64> {
    let e = emission_scores(x, theta)?;
    if tags.len() != x.len() {
        return Err(Error::Shape(format!(
            "{} tags for {} tokens",
            tags.len(),
            x.len()
        )));
    }
    if tags.iter().any(|&t| t >= e.cols()) {
        return Err(Error::Shape("tag id outside tag set".into()));
    }
    Ok(crf::path_score(&e, transitions(theta)?, tags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_classifier_is_uniform() {
        let mut theta = ModelParameters::init_classifier(5, 3, 4, 1);
        theta.embeddings.as_mut_slice().fill(0.0);
        if let Head::Classifier { weights, .. } = &mut theta.head {
            weights.as_mut_slice().fill(0.0);
        }
        let p = classify_forward(&TokenSequence(vec![1, 2]), &theta).unwrap();
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn single_token_classifier() {
        let theta = ModelParameters {
            embeddings: Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap(),
            head: Head::Classifier {
                weights: Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap(),
                bias: vec![0.0, 0.0],
            },
        };
        let p = classify_forward(&TokenSequence(vec![1]), &theta).unwrap();
        // softmax([2, -2]) = [1/(1+e^-4), e^-4/(1+e^-4)]
        let e4 = (-4.0f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e4)).abs() < 1e-15);
        assert!((p[0] - 0.9820).abs() < 1e-4);
        assert!((p[1] - 0.0180).abs() < 1e-4);
    }

    #[test]
    fn dimension_errors() {
        let theta = ModelParameters::init_classifier(5, 3, 2, 1);
        assert!(matches!(
            classify_forward(&TokenSequence(vec![7]), &theta),
            Err(Error::Shape(_))
        ));
        assert!(classify_forward(&TokenSequence(vec![]), &theta).is_err());
        assert!(tag_marginals(&TokenSequence(vec![1]), &theta).is_err());
    }

    #[test]
    fn single_tag_marginals_are_one() {
        let theta = ModelParameters::init_tagger(6, 2, 1, 3);
        let x = TokenSequence(vec![1, 2, 3]);
        let m = tag_marginals(&x, &theta).unwrap();
        for j in 0..3 {
            assert!((m.get(j, 0) - 1.0).abs() < 1e-12);
        }
        assert_eq!(viterbi_decode(&x, &theta).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let a = ModelParameters::init_tagger(10, 4, 3, 9);
        let b = ModelParameters::init_tagger(10, 4, 3, 9);
        assert_eq!(a, b);
        assert!(a.embeddings.as_slice().iter().all(|v| v.abs() <= 0.1));
        if let Head::Tagger {
            transitions,
            emission_bias,
            ..
        } = &a.head
        {
            assert!(transitions.as_slice().iter().all(|&v| v == 0.0));
            assert!(emission_bias.iter().all(|&v| v == 0.0));
        }
        a.validate().unwrap();
    }
}
