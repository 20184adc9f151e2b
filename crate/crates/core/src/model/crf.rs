//! Linear-chain CRF kernels over raw scores.
//!
//! `emissions` is n x T. `transitions` is (T+2) x (T+2); row/column `T` is
//! the start state and `T+1` the stop state. A path y scores
//! `trans[start][y0] + sum_j e[j][y_j] + sum_j trans[y_{j-1}][y_j] + trans[y_{n-1}][stop]`.

use super::{log_sum_exp, Matrix};

#[inline]
pub fn start(num_tags: usize) -> usize {
    num_tags
}

#[inline]
pub fn stop(num_tags: usize) -> usize {
    num_tags + 1
}

pub fn path_score(emissions: &Matrix, transitions: &Matrix, tags: &[usize]) -> f64 {
    let t = emissions.cols();
    let mut s = transitions.get(start(t), tags[0]);
    for (j, &y) in tags.iter().enumerate() {
        s += emissions.get(j, y);
        if j > 0 {
            s += transitions.get(tags[j - 1], y);
        }
    }
    s + transitions.get(tags[tags.len() - 1], stop(t))
}

/// Forward and backward log-potentials for one sequence.
#[derive(Debug, Clone)]
pub struct Lattice<'a> {
    pub emissions: &'a Matrix,
    pub transitions: &'a Matrix,
    /// log alpha[j][y]: all prefixes ending in y at j, emission j included.
    pub log_alpha: Matrix,
    /// log beta[j][y]: all suffixes after j given y at j, stop included.
    pub log_beta: Matrix,
    pub log_z: f64,
}

impl<'a> Lattice<'a> {
    pub fn new(emissions: &'a Matrix, transitions: &'a Matrix) -> Self {
        let (n, t) = emissions.shape();
        let mut log_alpha = Matrix::zeros(n, t);
        let mut log_beta = Matrix::zeros(n, t);
        let mut buf = vec![0.0; t];

        for y in 0..t {
            log_alpha.set(0, y, transitions.get(start(t), y) + emissions.get(0, y));
        }
        for j in 1..n {
            for y in 0..t {
                for (a, b) in buf.iter_mut().enumerate() {
                    *b = log_alpha.get(j - 1, a) + transitions.get(a, y);
                }
                log_alpha.set(j, y, log_sum_exp(&buf) + emissions.get(j, y));
            }
        }
        for (y, b) in buf.iter_mut().enumerate() {
            *b = log_alpha.get(n - 1, y) + transitions.get(y, stop(t));
        }
        let log_z = log_sum_exp(&buf);

        for y in 0..t {
            log_beta.set(n - 1, y, transitions.get(y, stop(t)));
        }
        for j in (0..n - 1).rev() {
            for y in 0..t {
                for (b, v) in buf.iter_mut().enumerate() {
                    *v = transitions.get(y, b) + emissions.get(j + 1, b) + log_beta.get(j + 1, b);
                }
                log_beta.set(j, y, log_sum_exp(&buf));
            }
        }
        Lattice {
            emissions,
            transitions,
            log_alpha,
            log_beta,
            log_z,
        }
    }

    pub fn len(&self) -> usize {
        self.emissions.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_tags(&self) -> usize {
        self.emissions.cols()
    }

    #[inline]
    pub fn log_marginal(&self, j: usize, y: usize) -> f64 {
        self.log_alpha.get(j, y) + self.log_beta.get(j, y) - self.log_z
    }

    pub fn marginals(&self) -> Matrix {
        let (n, t) = self.emissions.shape();
        let mut m = Matrix::zeros(n, t);
        for j in 0..n {
            for y in 0..t {
                m.set(j, y, self.log_marginal(j, y).exp());
            }
        }
        m
    }

    /// log P(y_{j-1} = a, y_j = b | x) for j >= 1.
    #[inline]
    pub fn log_pair_marginal(&self, j: usize, a: usize, b: usize) -> f64 {
        self.log_alpha.get(j - 1, a)
            + self.transitions.get(a, b)
            + self.emissions.get(j, b)
            + self.log_beta.get(j, b)
            - self.log_z
    }
}

pub fn log_partition(emissions: &Matrix, transitions: &Matrix) -> f64 {
    Lattice::new(emissions, transitions).log_z
}

/// Max-scoring path. At every argmax the lowest tag id wins ties.
pub fn viterbi(emissions: &Matrix, transitions: &Matrix) -> Vec<usize> {
    let (n, t) = emissions.shape();
    let mut delta = Matrix::zeros(n, t);
    let mut back = vec![vec![0usize; t]; n];
    for y in 0..t {
        delta.set(0, y, transitions.get(start(t), y) + emissions.get(0, y));
    }
    for j in 1..n {
        for y in 0..t {
            let (best_a, best) = argmax((0..t).map(|a| delta.get(j - 1, a) + transitions.get(a, y)));
            back[j][y] = best_a;
            delta.set(j, y, best + emissions.get(j, y));
        }
    }
    let (mut y, _) = argmax((0..t).map(|y| delta.get(n - 1, y) + transitions.get(y, stop(t))));
    let mut path = vec![0; n];
    for j in (0..n).rev() {
        path[j] = y;
        y = back[j][y];
    }
    path
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 || i == 0 {
            best = (i, v);
        }
    }
    best
}
