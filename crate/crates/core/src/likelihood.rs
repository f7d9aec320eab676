//! Joint log-likelihood of a state: the collapsed Dirichlet-multinomial
//! terms for documents and discrete factors, plus continuous densities and
//! response densities when the schema has them.

use crate::math::{ln_gamma, normal_ln_pdf};
use crate::model::{DocTopicCounts, ModelState, WordTopicCounts};

/// ln Γ(x + n) - ln Γ(x) summed over the non-zero counts of a row.
fn ln_gamma_ratio_sum(counts: impl Iterator<Item = (u32, f64)>) -> f64 {
    counts.filter(|&(c, _)| c > 0).map(|(c, prior)| ln_gamma(c as f64 + prior) - ln_gamma(prior)).sum()
}

/// Document term: Σ_d [ln Γ(Σα) - ln Γ(B_d + Σα) + Σ_k ln Γ(m_dk + α_k) - ln Γ(α_k)].
pub fn document_term(doc_topic: &DocTopicCounts, alpha: &[f64]) -> f64 {
    let alpha_sum: f64 = alpha.iter().sum();
    let ln_norm = ln_gamma(alpha_sum);
    (0..doc_topic.num_docs())
        .map(|d| {
            let row = doc_topic.row(d);
            let blobs: u64 = row.iter().map(|&m| m as u64).sum();
            if blobs == 0 {
                return 0.0;
            }
            ln_norm - ln_gamma(blobs as f64 + alpha_sum)
                + ln_gamma_ratio_sum(row.iter().zip(alpha).map(|(&m, &a)| (m, a)))
        })
        .sum()
}

/// Discrete factor term with a symmetric prior `beta` over `vocab_size()` items.
pub fn word_term(counts: &WordTopicCounts, beta: f64) -> f64 {
    let prior_mass = counts.vocab_size() as f64 * beta;
    let ln_norm = ln_gamma(prior_mass);
    let topics: f64 = counts
        .totals()
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| ln_norm - ln_gamma(n as f64 + prior_mass))
        .sum();
    let ln_beta = ln_gamma(beta);
    let items: f64 = counts
        .raw()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| ln_gamma(c as f64 + beta) - ln_beta)
        .sum();
    topics + items
}

/// Σ ln p(v | ψ_z) over every continuous item.
pub fn continuous_term(state: &ModelState) -> f64 {
    let mut total = 0.0;
    for (doc, z) in state.corpus.documents.iter().zip(&state.assignments) {
        for (blob, &t) in doc.blobs.iter().zip(z) {
            for (j, values) in blob.continuous.iter().enumerate() {
                let dens = &state.params.continuous[j];
                for &v in values {
                    total += dens.ln_density(t as usize, state.corpus.domains[j].item(v));
                }
            }
        }
    }
    total
}

/// Σ_d ln N(y_d | η·z̄_d, σ²).
pub fn response_term(state: &ModelState) -> f64 {
    if !state.config.supervised() {
        return 0.0;
    }
    let sup = &state.params.supervised;
    state
        .corpus
        .documents
        .iter()
        .enumerate()
        .filter_map(|(d, doc)| doc.signal.map(|y| normal_ln_pdf(y, sup.predict(&state.zbar(d)), sup.sigma2)))
        .sum()
}

/// Joint log-likelihood of the observed items, blob topics and responses.
pub fn joint_log_likelihood(state: &ModelState) -> f64 {
    let cfg = &state.config;
    let words: f64 = state.params.word_topic.iter().zip(&cfg.beta).map(|(c, &b)| word_term(c, b)).sum();
    document_term(&state.doc_topic, &cfg.alpha) + words + continuous_term(state) + response_term(state)
}
