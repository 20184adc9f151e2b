//! Analytic gradients of the supervised and consistency losses.

use super::crf::{start, stop, Lattice};
use super::{
    classifier_parts, emission_scores, log_softmax, pooled, tagger_parts, transitions, window_features,
    Gradient, Head, Matrix, ModelParameters,
};
use crate::consistency::{ConsistencyPair, LabeledItem, LossBreakdown, Target};
use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

/// Value and gradient of `sum_L -log p(y|x) + lambda * sum_U consistency`.
/// Per-example gradients are summed in batch order.
pub fn loss_gradient(
    labeled: &[LabeledItem],
    unlabeled: &[ConsistencyPair],
    theta: &ModelParameters,
    lambda: f64,
) -> Result<(LossBreakdown, Gradient)> {
    let mut grad = theta.zeros_like();
    let mut supervised = 0.0;
    for (i, item) in labeled.iter().enumerate() {
        let v = supervised_grad(item, theta, &mut grad)?;
        if !v.is_finite() {
            return Err(Error::numeric(format!("supervised loss of labeled item {i}")));
        }
        supervised += v;
    }
    let mut consistency = 0.0;
    if lambda != 0.0 {
        for (i, pair) in unlabeled.iter().enumerate() {
            let v = consistency_grad(pair, theta, lambda, &mut grad)?;
            if !v.is_finite() {
                return Err(Error::numeric(format!("consistency loss of unlabeled item {i}")));
            }
            consistency += v;
        }
    }
    let total = supervised + lambda * consistency;
    if !grad.is_finite() {
        return Err(Error::numeric("gradient"));
    }
    Ok((
        LossBreakdown {
            supervised,
            consistency,
            total,
        },
        grad,
    ))
}

/// Adds the gradient of the item's negative log-likelihood to `grad` and
/// returns its value.
pub(crate) fn supervised_grad(
    item: &LabeledItem,
    theta: &ModelParameters,
    grad: &mut Gradient,
) -> Result<f64> {
    match (&item.target, theta.task()) {
        (Target::Class(y), super::TaskKind::Classification) => {
            let logits = super::class_logits(&item.tokens, theta)?;
            if *y >= logits.len() {
                return Err(Error::Shape(format!(
                    "label {y} outside {} classes",
                    logits.len()
                )));
            }
            let logp = log_softmax(&logits);
            let mut dz: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            dz[*y] -= 1.0;
            backprop_classifier(&item.tokens, theta, &dz, 1.0, grad);
            Ok(-logp[*y])
        }
        (Target::Tags(tags), super::TaskKind::Tagging) => {
            let e = emission_scores(&item.tokens, theta)?;
            if tags.len() != e.rows() || tags.iter().any(|&t| t >= e.cols()) {
                return Err(Error::Shape("gold tags do not fit the sequence".into()));
            }
            let tr = transitions(theta)?;
            let lat = Lattice::new(&e, tr);
            let gold = super::crf::path_score(&e, tr, tags);
            let (n, t) = e.shape();

            let mut de = lat.marginals();
            let mut dtr = Matrix::zeros(t + 2, t + 2);
            for b in 0..t {
                dtr.add_at(start(t), b, de.get(0, b));
                dtr.add_at(b, stop(t), de.get(n - 1, b));
            }
            for j in 1..n {
                for a in 0..t {
                    for b in 0..t {
                        dtr.add_at(a, b, lat.log_pair_marginal(j, a, b).exp());
                    }
                }
            }
            for (j, &y) in tags.iter().enumerate() {
                de.add_at(j, y, -1.0);
                if j > 0 {
                    dtr.add_at(tags[j - 1], y, -1.0);
                }
            }
            dtr.add_at(start(t), tags[0], -1.0);
            dtr.add_at(tags[n - 1], stop(t), -1.0);

            backprop_tagger(&item.tokens, theta, &de, &dtr, 1.0, grad);
            Ok(lat.log_z - gold)
        }
        _ => Err(Error::Shape("label kind does not match the model head".into())),
    }
}

/// Adds `scale` times the gradient of the consistency loss for `pair` to
/// `grad`. The clean-side distribution is a constant target.
pub(crate) fn consistency_grad(
    pair: &ConsistencyPair,
    theta: &ModelParameters,
    scale: f64,
    grad: &mut Gradient,
) -> Result<f64> {
    match theta.task() {
        super::TaskKind::Classification => {
            let target = super::classify_forward(&pair.clean, theta)?;
            let log_q = log_softmax(&super::class_logits(&pair.augmented, theta)?);
            let value = crate::consistency::kl_from_log(&target, &log_q)?;
            let dz: Vec<f64> = log_q.iter().zip(&target).map(|(lq, t)| lq.exp() - t).collect();
            backprop_classifier(&pair.augmented, theta, &dz, scale, grad);
            Ok(value)
        }
        super::TaskKind::Tagging => {
            if pair.clean.len() != pair.augmented.len() {
                return Err(Error::Shape(format!(
                    "tagging consistency needs equal lengths, got {} and {}",
                    pair.clean.len(),
                    pair.augmented.len()
                )));
            }
            let target = super::tag_marginals(&pair.clean, theta)?;
            let e = emission_scores(&pair.augmented, theta)?;
            let tr = transitions(theta)?;
            let lat = Lattice::new(&e, tr);
            let (value, de, dtr) = tagging_consistency_scores(&lat, &target)?;
            backprop_tagger(&pair.augmented, theta, &de, &dtr, scale, grad);
            Ok(value)
        }
    }
}

/// Mean per-token KL(target_j || marginal_j) and its derivatives with
/// respect to the emission and transition scores of the lattice.
///
/// With w_j(y) = target_j(y) / mu_j(y) and R(path) = sum_j w_j(y_j), the
/// derivative of the loss with respect to a path feature phi is
/// (n E[phi] - E[phi R]) / n. E[phi R] is assembled from the marginals and
/// two conditional expectations: rho_j(y), the expected prefix sum of w up
/// to and including j given y_j = y, and sigma_j(y), the expected suffix
/// sum after j.
pub(crate) fn tagging_consistency_scores(
    lat: &Lattice<'_>,
    target: &Matrix,
) -> Result<(f64, Matrix, Matrix)> {
    let (n, t) = lat.emissions.shape();
    let tr = lat.transitions;
    let e = lat.emissions;
    let nf = n as f64;

    let mut log_mu = Matrix::zeros(n, t);
    let mut w = Matrix::zeros(n, t);
    let mut value = 0.0;
    for j in 0..n {
        for y in 0..t {
            let lm = lat.log_marginal(j, y);
            log_mu.set(j, y, lm);
            let ty = target.get(j, y);
            if ty > 0.0 {
                value += ty * (ty.ln() - lm);
                w.set(j, y, (ty.ln() - lm).exp());
            }
        }
    }
    value /= nf;
    if !value.is_finite() {
        return Err(Error::numeric("tagging consistency"));
    }

    let mut rho = Matrix::zeros(n, t);
    rho.row_mut(0).copy_from_slice(w.row(0));
    for j in 1..n {
        for y in 0..t {
            let mut acc = w.get(j, y);
            for a in 0..t {
                let p = (lat.log_alpha.get(j - 1, a) + tr.get(a, y) + e.get(j, y) - lat.log_alpha.get(j, y))
                    .exp();
                acc += p * rho.get(j - 1, a);
            }
            rho.set(j, y, acc);
        }
    }
    let mut sigma = Matrix::zeros(n, t);
    for j in (0..n - 1).rev() {
        for y in 0..t {
            let mut acc = 0.0;
            for b in 0..t {
                let p = (tr.get(y, b) + e.get(j + 1, b) + lat.log_beta.get(j + 1, b)
                    - lat.log_beta.get(j, y))
                .exp();
                acc += p * (w.get(j + 1, b) + sigma.get(j + 1, b));
            }
            sigma.set(j, y, acc);
        }
    }

    let mut de = Matrix::zeros(n, t);
    for j in 0..n {
        for y in 0..t {
            let mu = log_mu.get(j, y).exp();
            de.set(j, y, mu * (nf - rho.get(j, y) - sigma.get(j, y)) / nf);
        }
    }
    let mut dtr = Matrix::zeros(t + 2, t + 2);
    for b in 0..t {
        dtr.set(start(t), b, de.get(0, b));
        dtr.set(b, stop(t), de.get(n - 1, b));
    }
    for j in 1..n {
        for a in 0..t {
            for b in 0..t {
                let xi = lat.log_pair_marginal(j, a, b).exp();
                let r = rho.get(j - 1, a) + w.get(j, b) + sigma.get(j, b);
                dtr.add_at(a, b, xi * (nf - r) / nf);
            }
        }
    }
    Ok((value, de, dtr))
}

/// Backpropagates logit gradients `dz` through the affine map and the mean
/// pooling into `grad`, scaled by `scale`.
fn backprop_classifier(
    x: &TokenSequence,
    theta: &ModelParameters,
    dz: &[f64],
    scale: f64,
    grad: &mut Gradient,
) {
    let (weights, _) = classifier_parts(theta).expect("classifier head");
    let h = pooled(x, theta);
    let d = theta.dim();
    let mut dh = vec![0.0; d];
    for (k, dhk) in dh.iter_mut().enumerate() {
        *dhk = weights.row(k).iter().zip(dz).map(|(w, g)| w * g).sum::<f64>();
    }
    let Head::Classifier {
        weights: gw,
        bias: gb,
    } = &mut grad.head
    else {
        unreachable!("gradient head matches parameters")
    };
    for (k, hk) in h.iter().enumerate() {
        for (c, g) in dz.iter().enumerate() {
            gw.add_at(k, c, scale * hk * g);
        }
    }
    for (b, g) in gb.iter_mut().zip(dz) {
        *b += scale * g;
    }
    let inv_n = scale / x.len() as f64;
    for &id in x.ids() {
        for (e, g) in grad.embeddings.row_mut(id).iter_mut().zip(&dh) {
            *e += inv_n * g;
        }
    }
}

/// Backpropagates emission (`de`, n x T) and transition (`dtr`) score
/// gradients into `grad`, scaled by `scale`.
fn backprop_tagger(
    x: &TokenSequence,
    theta: &ModelParameters,
    de: &Matrix,
    dtr: &Matrix,
    scale: f64,
    grad: &mut Gradient,
) {
    let (boundary, emission, _, _) = tagger_parts(theta).expect("tagger head");
    let f = window_features(x, theta, boundary);
    let d = theta.dim();
    let ids = x.ids();
    let n = ids.len();
    let t = de.cols();

    let mut dfeat = Matrix::zeros(n, 3 * d);
    for j in 0..n {
        let dej = de.row(j);
        for k in 0..3 * d {
            let v: f64 = emission.row(k).iter().zip(dej).map(|(w, g)| w * g).sum();
            dfeat.set(j, k, v);
        }
    }

    let Head::Tagger {
        boundary: gbound,
        emission: gem,
        emission_bias: gbias,
        transitions: gtr,
    } = &mut grad.head
    else {
        unreachable!("gradient head matches parameters")
    };
    for j in 0..n {
        let fj = f.row(j);
        let dej = de.row(j);
        for (k, fk) in fj.iter().enumerate() {
            if *fk == 0.0 {
                continue;
            }
            for y in 0..t {
                gem.add_at(k, y, scale * fk * dej[y]);
            }
        }
        for (b, g) in gbias.iter_mut().zip(dej) {
            *b += scale * g;
        }
    }
    for (g, v) in gtr.as_mut_slice().iter_mut().zip(dtr.as_slice()) {
        *g += scale * v;
    }
    for j in 0..n {
        let row = dfeat.row(j);
        let (left, rest) = row.split_at(d);
        let (center, right) = rest.split_at(d);
        let left_dst = if j == 0 {
            gbound.row_mut(0)
        } else {
            grad.embeddings.row_mut(ids[j - 1])
        };
        for (dst, g) in left_dst.iter_mut().zip(left) {
            *dst += scale * g;
        }
        for (dst, g) in grad.embeddings.row_mut(ids[j]).iter_mut().zip(center) {
            *dst += scale * g;
        }
        let right_dst = if j + 1 == n {
            gbound.row_mut(1)
        } else {
            grad.embeddings.row_mut(ids[j + 1])
        };
        for (dst, g) in right_dst.iter_mut().zip(right) {
            *dst += scale * g;
        }
    }
}
