//! Collapsed Gibbs sampling over blobs.
//!
//! The full conditional of a blob's topic multiplies a document term, a
//! Dirichlet-multinomial ratio per discrete factor, the continuous
//! densities of the blob's values and, for supervised documents, the
//! Gaussian response density with the blob placed in the candidate topic.

use rand::Rng;

use crate::corpus::{Blob, ContinuousDomain};
use crate::math::{exp_normalize_in_place, ln_rising, sample_linear};
use crate::model::{ModelConfig, ModelError, ModelState, Parameters};

/// Supervised context of the blob being sampled.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResponseContext {
    pub y: f64,
    /// eta . m_d with the blob removed.
    pub eta_dot_rest: f64,
    pub blobs: f64,
}

/// Reusable buffers for per-blob item multiplicities.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    sorted: Vec<u32>,
    unique: Vec<(u32, u32)>,
}

impl Scratch {
    fn multiplicities(&mut self, tokens: &[u32]) -> &[(u32, u32)] {
        self.unique.clear();
        if tokens.len() == 1 {
            self.unique.push((tokens[0], 1));
            return &self.unique;
        }
        self.sorted.clear();
        self.sorted.extend_from_slice(tokens);
        self.sorted.sort_unstable();
        for &u in &self.sorted {
            match self.unique.last_mut() {
                Some((last, c)) if *last == u => *c += 1,
                _ => self.unique.push((u, 1)),
            }
        }
        &self.unique
    }
}

/// Log of the full conditional for every topic. `doc_row` holds the
/// document's blob-topic counts with the blob removed and `params` holds
/// item counts with the blob removed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn blob_log_weights(
    config: &ModelConfig,
    params: &Parameters,
    domains: &[ContinuousDomain],
    doc_row: &[u32],
    other_blobs: usize,
    blob: &Blob,
    response: Option<ResponseContext>,
    scratch: &mut Scratch,
    out: &mut [f64],
) {
    let k_count = config.num_topics;
    let doc_norm = (other_blobs as f64 + config.alpha_sum()).ln();
    for k in 0..k_count {
        out[k] = (doc_row[k] as f64 + config.alpha[k]).ln() - doc_norm;
    }
    for (i, tokens) in blob.discrete.iter().enumerate() {
        if tokens.is_empty() {
            continue;
        }
        let counts = &params.word_topic[i];
        let beta = config.beta[i];
        let prior_mass = counts.vocab_size() as f64 * beta;
        let n_items = tokens.len() as u32;
        for (k, o) in out.iter_mut().enumerate() {
            *o -= ln_rising(counts.total(k) as f64 + prior_mass, n_items);
        }
        for &(u, mult) in scratch.multiplicities(tokens) {
            let row = counts.row(u);
            for (o, &n) in out.iter_mut().zip(row) {
                *o += ln_rising(n as f64 + beta, mult);
            }
        }
    }
    for (j, values) in blob.continuous.iter().enumerate() {
        let dens = &params.continuous[j];
        for &v in values {
            let item = domains[j].item(v);
            for (k, o) in out.iter_mut().enumerate() {
                *o += dens.ln_density(k, item);
            }
        }
    }
    if let Some(r) = response {
        let sup = &params.supervised;
        for (k, o) in out.iter_mut().enumerate() {
            *o += sup.ln_density(r.y, (r.eta_dot_rest + sup.eta[k]) / r.blobs);
        }
    }
}

pub(crate) fn response_context(state: &ModelState, doc: usize) -> Option<ResponseContext> {
    if !state.config.supervised() {
        return None;
    }
    let d = &state.corpus.documents[doc];
    let y = d.signal?;
    let eta = &state.params.supervised.eta;
    let eta_dot_rest = state.doc_topic.row(doc).iter().zip(eta).map(|(&m, e)| m as f64 * e).sum();
    Some(ResponseContext { y, eta_dot_rest, blobs: d.blobs.len() as f64 })
}

fn require_detached(state: &ModelState, doc: usize, blob: usize) -> Result<(), ModelError> {
    if state.detached != Some((doc, blob)) {
        return Err(ModelError::InconsistentCounts { doc, blob });
    }
    Ok(())
}

/// Log of the unnormalized full conditional of blob `(doc, blob)`; the blob
/// must be detached from the counts first.
pub fn gibbs_log_conditional(state: &ModelState, doc: usize, blob: usize) -> Result<Vec<f64>, ModelError> {
    require_detached(state, doc, blob)?;
    let d = &state.corpus.documents[doc];
    let mut out = vec![0.0; state.config.num_topics];
    blob_log_weights(
        &state.config,
        &state.params,
        &state.corpus.domains,
        state.doc_topic.row(doc),
        d.blobs.len() - 1,
        &d.blobs[blob],
        response_context(state, doc),
        &mut Scratch::default(),
        &mut out,
    );
    Ok(out)
}

/// Unnormalized full conditional of blob `(doc, blob)`.
pub fn gibbs_conditional(state: &ModelState, doc: usize, blob: usize) -> Result<Vec<f64>, ModelError> {
    Ok(gibbs_log_conditional(state, doc, blob)?.into_iter().map(f64::exp).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub changed: usize,
    pub blobs: usize,
}

/// One systematic-scan sweep in document order then blob order.
pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut ModelState, rng: &mut R) -> Result<SweepStats, ModelError> {
    let k_count = state.config.num_topics;
    let mut weights = vec![0.0; k_count];
    let mut scratch = Scratch::default();
    let mut stats = SweepStats::default();
    for doc in 0..state.corpus.documents.len() {
        let n_blobs = state.corpus.documents[doc].blobs.len();
        for blob in 0..n_blobs {
            stats.blobs += 1;
            let old = state.detach_blob(doc, blob)?;
            let response = response_context(state, doc);
            blob_log_weights(
                &state.config,
                &state.params,
                &state.corpus.domains,
                state.doc_topic.row(doc),
                n_blobs - 1,
                &state.corpus.documents[doc].blobs[blob],
                response,
                &mut scratch,
                &mut weights,
            );
            let total = exp_normalize_in_place(&mut weights);
            let new = sample_linear(&weights, total, rng.random::<f64>()) as u32;
            state.attach_blob(doc, blob, new)?;
            if new != old {
                stats.changed += 1;
            }
        }
    }
    Ok(stats)
}
