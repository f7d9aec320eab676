//! Topic proportions of unseen documents under a frozen model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ContinuousDomain, Corpus, Document};
use crate::gibbs::{blob_log_weights, Scratch};
use crate::math::{exp_normalize_in_place, sample_linear};
use crate::model::{theta_from_counts, TopicModel};
use crate::parallel;

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// Posterior mean topic proportions averaged over the last half of sweeps.
    pub theta: Vec<f64>,
    /// Blob-topic frequencies averaged the same way.
    pub zbar: Vec<f64>,
    /// No item survived the vocabulary filter; `theta` is the prior mean.
    pub empty: bool,
}

fn prior(model: &TopicModel) -> Inference {
    let k = model.num_topics();
    let alpha_sum = model.config.alpha_sum();
    Inference { theta: model.config.alpha.iter().map(|a| a / alpha_sum).collect(), zbar: vec![0.0; k], empty: true }
}

/// Gibbs sweeps over `doc`'s blobs with the item-topic counts and the
/// continuous densities of `model` held fixed.
pub fn infer_document(
    model: &TopicModel,
    doc: &Document,
    domains: &[ContinuousDomain],
    iterations: usize,
    seed: u64,
) -> Inference {
    if doc.num_items() == 0 {
        return prior(model);
    }
    let k_count = model.num_topics();
    let iterations = iterations.max(1);
    let burn_in = iterations / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<usize> = doc.blobs.iter().map(|_| rng.random_range(0..k_count)).collect();
    let mut row = vec![0u32; k_count];
    z.iter().for_each(|&t| row[t] += 1);

    let blobs = doc.blobs.len();
    let mut weights = vec![0.0; k_count];
    let mut scratch = Scratch::default();
    let mut theta_sum = vec![0.0; k_count];
    let mut zbar_sum = vec![0.0; k_count];
    for it in 0..iterations {
        for (b, blob) in doc.blobs.iter().enumerate() {
            row[z[b]] -= 1;
            blob_log_weights(&model.config, &model.params, domains, &row, blobs - 1, blob, None, &mut scratch, &mut weights);
            let total = exp_normalize_in_place(&mut weights);
            z[b] = sample_linear(&weights, total, rng.random::<f64>());
            row[z[b]] += 1;
        }
        if it >= burn_in {
            for (s, t) in theta_sum.iter_mut().zip(theta_from_counts(&row, &model.config.alpha)) {
                *s += t;
            }
            for (s, &m) in zbar_sum.iter_mut().zip(&row) {
                *s += m as f64 / blobs as f64;
            }
        }
    }
    let kept = (iterations - burn_in) as f64;
    let mut theta: Vec<f64> = theta_sum.iter().map(|s| s / kept).collect();
    // Averaging leaves rounding at the 1e-16 level; renormalize exactly.
    let norm: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= norm);
    Inference { theta, zbar: zbar_sum.iter().map(|s| s / kept).collect(), empty: false }
}

/// Infers every document of a held-out corpus; document `d` uses seed
/// `seed + d`. Documents with no known items come back flagged `empty`.
pub fn infer_corpus(model: &TopicModel, corpus: &Corpus, iterations: usize, seed: u64) -> Vec<Inference> {
    let indexed: Vec<(usize, &Document)> = corpus.documents.iter().enumerate().collect();
    parallel::map(&indexed, |&(d, doc)| infer_document(model, doc, &corpus.domains, iterations, seed.wrapping_add(d as u64)))
}
