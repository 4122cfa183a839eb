//! Accuracy, domain-discrepancy proxy, PCA embeddings and paired t-tests.

mod export;
mod pca;
mod stats;

pub use export::{format_sig6, parse_matrix_csv, pvalue_matrix_csv, write_embedding_tsv, MatrixCsv};
pub use pca::{pca2, PcaProjection, PCA_MAX_ITER, PCA_TOL};
pub use stats::{
    ln_gamma, paired_t_test, pvalue_matrix, regularized_incomplete_beta, student_t_two_sided, TTestResult,
};

use crate::error::{Error, Result};
use crate::nn::{cross_entropy, one_hot, relu_backward, relu_forward, softmax_forward, AffineLayer};
use crate::optim::{AdaDelta, Param};
use crate::tensor::{Matrix, Rng};

/// Fraction of positions where `preds` and `truth` agree.
pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "accuracy over {} predictions and {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Balanced error of a two-domain classifier: mean of the per-domain error
/// rates, with predictions taken as the row-wise argmax of `domain_probs`.
pub fn balanced_domain_error(domain_probs: &Matrix, domain_tags: &[usize]) -> Result<f64> {
    let (errors, counts) = domain_confusion(domain_probs, domain_tags)?;
    Ok(0.5 * (errors[0] as f64 / counts[0] as f64 + errors[1] as f64 / counts[1] as f64))
}

/// Per-domain misclassification and instance counts.
fn domain_confusion(domain_probs: &Matrix, domain_tags: &[usize]) -> Result<([usize; 2], [usize; 2])> {
    if domain_probs.cols() != 2 || domain_probs.rows() != domain_tags.len() {
        return Err(Error::shape(
            "proxy_a_distance",
            domain_probs.shape(),
            (domain_tags.len(), 2),
        ));
    }
    let preds = domain_probs.argmax_rows();
    let mut errors = [0usize; 2];
    let mut counts = [0usize; 2];
    for (&p, &t) in preds.iter().zip(domain_tags) {
        if t > 1 {
            return Err(Error::InvalidArgument(format!("domain tag {t} is not 0 or 1")));
        }
        counts[t] += 1;
        errors[t] += usize::from(p != t);
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument(
            "proxy A-distance needs instances from both domains".into(),
        ));
    }
    Ok((errors, counts))
}

/// Proxy 𝒜-distance `2(1 − 2ε)` from a domain classifier's outputs.
///
/// `ε` is the balanced error, folded to `min(ε, 1 − ε)` so that swapping the
/// two domain labels does not change the result; the value lies in `[0, 2]`.
pub fn proxy_a_distance(domain_probs: &Matrix, domain_tags: &[usize]) -> Result<f64> {
    let (errors, counts) = domain_confusion(domain_probs, domain_tags)?;
    let rate = |k: [usize; 2]| 0.5 * (k[0] as f64 / counts[0] as f64 + k[1] as f64 / counts[1] as f64);
    // The complement is summed from correct counts so a relabeling yields the same bits.
    let eps = rate(errors).min(rate([counts[0] - errors[0], counts[1] - errors[1]]));
    Ok((2.0 * (1.0 - 2.0 * eps)).clamp(0.0, 2.0))
}

/// Full-batch AdaDelta steps used to fit the domain classifier in
/// [`proxy_a_distance_from_features`].
pub const PROXY_CLASSIFIER_STEPS: usize = 500;
/// Hidden ReLU units of that classifier.
pub const PROXY_HIDDEN: usize = 32;

/// Proxy 𝒜-distance between two feature sets.
///
/// Each set is split in half by a seeded shuffle. A one-hidden-layer ReLU
/// domain classifier is fit on standardized features from the first halves
/// and its balanced error is measured on the second halves. A linear
/// classifier would miss shifts that preserve the mean, such as rotations.
pub fn proxy_a_distance_from_features(source: &Matrix, target: &Matrix, seed: u64) -> Result<f64> {
    if source.cols() != target.cols() {
        return Err(Error::shape(
            "proxy_a_distance_from_features",
            source.shape(),
            target.shape(),
        ));
    }
    if source.rows() < 2 || target.rows() < 2 {
        return Err(Error::InvalidArgument("each domain needs at least 2 instances".into()));
    }
    let root = Rng::new(seed);
    let split = |m: &Matrix, stream: u64| {
        let perm = root.split(stream).permutation(m.rows());
        let half = m.rows() / 2;
        (m.select_rows(&perm[..half]), m.select_rows(&perm[half..]))
    };
    let (s_fit, s_eval) = split(source, 0);
    let (t_fit, t_eval) = split(target, 1);
    let fit_x = Matrix::vstack(&s_fit, &t_fit)?;
    let fit_tags: Vec<usize> = (0..fit_x.rows()).map(|i| usize::from(i >= s_fit.rows())).collect();
    let eval_x = Matrix::vstack(&s_eval, &t_eval)?;
    let eval_tags: Vec<usize> = (0..eval_x.rows()).map(|i| usize::from(i >= s_eval.rows())).collect();

    let mean = fit_x.col_mean();
    let mut std = vec![0.0; fit_x.cols()];
    for r in 0..fit_x.rows() {
        for (s, (v, m)) in std.iter_mut().zip(fit_x.row(r).iter().zip(&mean)) {
            *s += (v - m).powi(2);
        }
    }
    let std: Vec<f64> = std
        .iter()
        .map(|s| (s / fit_x.rows() as f64).sqrt().max(1e-12))
        .collect();
    let standardize = |m: &Matrix| {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&mean).zip(&std) {
                *v = (*v - mu) / sd;
            }
        }
        out
    };
    let fit_x = standardize(&fit_x);
    let eval_x = standardize(&eval_x);

    // Balanced classes: weight each row by the inverse of its domain's share.
    let n_src = s_fit.rows() as f64;
    let n_tgt = t_fit.rows() as f64;
    let n = n_src + n_tgt;
    let row_weight: Vec<f64> = fit_tags
        .iter()
        .map(|&t| 0.5 * n / if t == 0 { n_src } else { n_tgt })
        .collect();

    let mut init = root.split(2);
    let mut hidden = AffineLayer::init(&mut init, fit_x.cols(), PROXY_HIDDEN)?;
    let mut out = AffineLayer::init(&mut init, PROXY_HIDDEN, 2)?;
    let labels = one_hot(&fit_tags, 2)?;
    let mut opt = AdaDelta::default();
    for _ in 0..PROXY_CLASSIFIER_STEPS {
        let pre = hidden.forward(&fit_x)?;
        let h = relu_forward(&pre);
        let ce = cross_entropy(&softmax_forward(&out.forward(&h)?), &labels)?;
        let mut d_logits = ce.d_logits;
        for (r, w) in row_weight.iter().enumerate() {
            d_logits.row_mut(r).iter_mut().for_each(|v| *v *= w);
        }
        let g_out = out.backward(&d_logits)?;
        let g_hidden = hidden.backward(&relu_backward(&pre, &g_out.d_input)?)?;
        let AffineLayer {
            weight: w1, bias: b1, ..
        } = &mut hidden;
        let AffineLayer {
            weight: w2, bias: b2, ..
        } = &mut out;
        opt.step(
            &mut [
                Param::new("hidden.weight", w1.as_mut_slice()),
                Param::new("hidden.bias", b1.as_mut_slice()),
                Param::new("out.weight", w2.as_mut_slice()),
                Param::new("out.bias", b2.as_mut_slice()),
            ],
            &[
                g_hidden.d_weight.into_vec(),
                g_hidden.d_bias,
                g_out.d_weight.into_vec(),
                g_out.d_bias,
            ],
        )?;
    }
    let probs = softmax_forward(&out.apply(&relu_forward(&hidden.apply(&eval_x)?))?);
    proxy_a_distance(&probs, &eval_tags)
}
