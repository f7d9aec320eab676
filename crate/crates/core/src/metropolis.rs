//! Alias-table Metropolis-Hastings.
//!
//! The target is the factorized approximation of the full conditional:
//! document term times one `(n_ku + beta) / (n_k + U beta)` factor per
//! discrete item occurrence, times continuous densities and the response
//! density. Each blob runs a cascade of proposals (document, response,
//! discrete items, continuous items), each corrected by its own
//! acceptance ratio. Item and response tables are built once per
//! iteration and reused, and acceptance uses the weights the table was
//! built from.

use rand::Rng;
use thiserror::Error;

use crate::alias::{AliasError, AliasTable};
use crate::gibbs::SweepStats;
use crate::math::exp_normalize_in_place;
use crate::model::{ModelError, ModelState};
use crate::parallel;

#[derive(Debug, Error)]
pub enum MetropolisError {
    #[error("acceptance ratio is not a number")]
    NonFiniteRatio,
    #[error("mh_steps must be at least 1")]
    ZeroSteps,
    #[error(transparent)]
    Alias(#[from] AliasError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Alias tables for one iteration.
#[derive(Debug, Clone)]
pub struct ProposalSet {
    /// Iteration the tables were built at.
    pub iteration: usize,
    /// Per discrete factor, one table per item row.
    pub items: Vec<Vec<AliasTable>>,
    /// Per continuous factor, one table per observed value.
    pub continuous: Vec<Vec<AliasTable>>,
    /// Per document, the response table when the document is supervised.
    pub response: Vec<Option<AliasTable>>,
}

fn table_from_logs(mut logs: Vec<f64>) -> Result<AliasTable, AliasError> {
    exp_normalize_in_place(&mut logs);
    AliasTable::new(&logs)
}

/// Builds every proposal table from the current counts and parameters.
pub fn build_proposals(state: &ModelState, iteration: usize) -> Result<ProposalSet, MetropolisError> {
    let cfg = &state.config;
    let k_count = cfg.num_topics;

    let mut items = Vec::with_capacity(state.params.word_topic.len());
    for (i, counts) in state.params.word_topic.iter().enumerate() {
        let beta = cfg.beta[i];
        let prior_mass = counts.vocab_size() as f64 * beta;
        let inv_norm: Vec<f64> = (0..k_count).map(|k| 1.0 / (counts.total(k) as f64 + prior_mass)).collect();
        let rows: Vec<u32> = (0..counts.num_rows() as u32).collect();
        let tables = parallel::map(&rows, |&u| {
            let weights: Vec<f64> =
                counts.row(u).iter().zip(&inv_norm).map(|(&n, inv)| (n as f64 + beta) * inv).collect();
            AliasTable::new(&weights)
        });
        items.push(tables.into_iter().collect::<Result<Vec<_>, _>>()?);
    }

    let mut continuous = Vec::with_capacity(state.params.continuous.len());
    for (j, dens) in state.params.continuous.iter().enumerate() {
        let domain = &state.corpus.domains[j];
        let tables = parallel::map(domain.items(), |item| {
            table_from_logs((0..k_count).map(|k| dens.ln_density(k, item)).collect())
        });
        continuous.push(tables.into_iter().collect::<Result<Vec<_>, _>>()?);
    }

    let mut response = Vec::with_capacity(state.corpus.documents.len());
    for (d, doc) in state.corpus.documents.iter().enumerate() {
        let table = match (cfg.supervised(), doc.signal) {
            (true, Some(y)) => {
                let sup = &state.params.supervised;
                let blobs = doc.blobs.len() as f64;
                // Iteration-start zbar with one average blob replaced by the candidate.
                let eta_dot_zbar: f64 =
                    state.doc_topic.row(d).iter().zip(&sup.eta).map(|(&m, e)| m as f64 * e).sum::<f64>() / blobs;
                let base = eta_dot_zbar * (blobs - 1.0) / blobs;
                let logs = sup.eta.iter().map(|e| sup.ln_density(y, base + e / blobs)).collect();
                Some(table_from_logs(logs)?)
            }
            _ => None,
        };
        response.push(table);
    }

    Ok(ProposalSet { iteration, items, continuous, response })
}

/// Running quantities of the document being swept.
#[derive(Clone, Copy)]
struct DocContext {
    /// Number of blobs excluding the detached one.
    other_blobs: usize,
    /// eta . m_d with the detached blob removed, and the response.
    response: Option<(f64, f64)>,
    blobs: f64,
}

fn log_target_with(state: &ModelState, doc: usize, blob: usize, ctx: &DocContext, k: usize) -> f64 {
    let cfg = &state.config;
    let b = &state.corpus.documents[doc].blobs[blob];
    let mut q = (state.doc_topic.row(doc)[k] as f64 + cfg.alpha[k]).ln() - (ctx.other_blobs as f64 + cfg.alpha_sum()).ln();
    for (i, tokens) in b.discrete.iter().enumerate() {
        if tokens.is_empty() {
            continue;
        }
        let counts = &state.params.word_topic[i];
        let beta = cfg.beta[i];
        let norm = (counts.total(k) as f64 + counts.vocab_size() as f64 * beta).ln();
        for &u in tokens {
            q += (counts.get(u, k) as f64 + beta).ln() - norm;
        }
    }
    for (j, values) in b.continuous.iter().enumerate() {
        let dens = &state.params.continuous[j];
        for &v in values {
            q += dens.ln_density(k, state.corpus.domains[j].item(v));
        }
    }
    if let Some((y, rest)) = ctx.response {
        let sup = &state.params.supervised;
        q += sup.ln_density(y, (rest + sup.eta[k]) / ctx.blobs);
    }
    q
}

fn doc_context(state: &ModelState, doc: usize) -> DocContext {
    let d = &state.corpus.documents[doc];
    let response = crate::gibbs::response_context(state, doc).map(|r| (r.y, r.eta_dot_rest));
    DocContext { other_blobs: d.blobs.len() - 1, response, blobs: d.blobs.len() as f64 }
}

/// Log of the approximate target for blob `(doc, blob)` in topic `k`; the
/// blob must be detached.
pub fn mh_log_target(state: &ModelState, doc: usize, blob: usize, k: usize) -> Result<f64, ModelError> {
    if state.detached != Some((doc, blob)) {
        return Err(ModelError::InconsistentCounts { doc, blob });
    }
    if k >= state.config.num_topics {
        return Err(ModelError::TopicOutOfRange { topic: k, num_topics: state.config.num_topics });
    }
    Ok(log_target_with(state, doc, blob, &doc_context(state, doc), k))
}

pub fn mh_target(state: &ModelState, doc: usize, blob: usize, k: usize) -> Result<f64, ModelError> {
    mh_log_target(state, doc, blob, k).map(f64::exp)
}

/// Draws from the document-topic proposal `(m_dk + alpha_k)` by returning
/// the topic of a uniformly chosen blob, or a prior draw. `exclude` skips
/// a detached blob so the proposal matches its removed counts.
pub fn draw_doc_proposal<R: Rng + ?Sized>(state: &ModelState, doc: usize, exclude: Option<usize>, rng: &mut R) -> u32 {
    let z = &state.assignments[doc];
    let others = z.len() - usize::from(exclude.is_some());
    let u = rng.random::<f64>() * (others as f64 + state.config.alpha_sum());
    if u < others as f64 {
        let mut pick = (u as usize).min(others - 1);
        if let Some(skip) = exclude {
            if pick >= skip {
                pick += 1;
            }
        }
        z[pick]
    } else {
        state.alpha_table.sample(rng) as u32
    }
}

/// Metropolis-Hastings test in log space: accepts the move `from -> to`
/// with probability `min(1, Q(to) q(from) / (Q(from) q(to)))`.
pub fn mh_accept<R: Rng + ?Sized>(
    from: u32,
    to: u32,
    log_target: (f64, f64),
    log_proposal: (f64, f64),
    rng: &mut R,
) -> Result<bool, MetropolisError> {
    if from == to {
        return Ok(true);
    }
    let log_ratio = (log_target.1 - log_target.0) + (log_proposal.0 - log_proposal.1);
    if log_ratio.is_nan() {
        return Err(MetropolisError::NonFiniteRatio);
    }
    if log_ratio >= 0.0 {
        return Ok(true);
    }
    Ok(rng.random::<f64>() < log_ratio.exp())
}

struct Chain {
    topic: u32,
    log_q: f64,
}

impl Chain {
    #[allow(clippy::too_many_arguments)]
    fn step<R: Rng + ?Sized>(
        &mut self,
        state: &ModelState,
        doc: usize,
        blob: usize,
        ctx: &DocContext,
        proposal: u32,
        log_prop_from: f64,
        log_prop_to: f64,
        rng: &mut R,
    ) -> Result<(), MetropolisError> {
        if proposal == self.topic {
            return Ok(());
        }
        let log_q_to = log_target_with(state, doc, blob, ctx, proposal as usize);
        if mh_accept(self.topic, proposal, (self.log_q, log_q_to), (log_prop_from, log_prop_to), rng)? {
            self.topic = proposal;
            self.log_q = log_q_to;
        }
        Ok(())
    }
}

/// One Metropolis-Hastings sweep in document order then blob order.
pub fn mh_sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    proposals: &ProposalSet,
    mh_steps: usize,
    rng: &mut R,
) -> Result<SweepStats, MetropolisError> {
    if mh_steps == 0 {
        return Err(MetropolisError::ZeroSteps);
    }
    let mut stats = SweepStats::default();
    for doc in 0..state.corpus.documents.len() {
        let n_blobs = state.corpus.documents[doc].blobs.len();
        // eta . m_d, maintained in O(1) per blob.
        let mut response = crate::gibbs::response_context(state, doc).map(|r| (r.y, r.eta_dot_rest));
        for blob in 0..n_blobs {
            stats.blobs += 1;
            let old = state.detach_blob(doc, blob)?;
            let eta = &state.params.supervised.eta;
            let ctx = DocContext {
                other_blobs: n_blobs - 1,
                response: response.map(|(y, dot)| (y, dot - eta[old as usize])),
                blobs: n_blobs as f64,
            };
            let mut chain = Chain { topic: old, log_q: log_target_with(state, doc, blob, &ctx, old as usize) };
            let alpha = &state.config.alpha;
            for _ in 0..mh_steps {
                // Document proposal: q(k) is proportional to m_dk + alpha_k.
                let j = draw_doc_proposal(state, doc, Some(blob), rng);
                let row = state.doc_topic.row(doc);
                let lp = |k: u32| (row[k as usize] as f64 + alpha[k as usize]).ln();
                chain.step(state, doc, blob, &ctx, j, lp(chain.topic), lp(j), rng)?;

                if let Some(table) = &proposals.response[doc] {
                    let j = table.sample(rng) as u32;
                    let (pf, pt) = (table.probability(chain.topic as usize).ln(), table.probability(j as usize).ln());
                    chain.step(state, doc, blob, &ctx, j, pf, pt, rng)?;
                }

                let b = &state.corpus.documents[doc].blobs[blob];
                for (i, tokens) in b.discrete.iter().enumerate() {
                    for &u in tokens {
                        let table = &proposals.items[i][u as usize];
                        let j = table.sample(rng) as u32;
                        let (pf, pt) = (table.probability(chain.topic as usize).ln(), table.probability(j as usize).ln());
                        chain.step(state, doc, blob, &ctx, j, pf, pt, rng)?;
                    }
                }
                for (jf, values) in b.continuous.iter().enumerate() {
                    for &v in values {
                        let table = &proposals.continuous[jf][v as usize];
                        let j = table.sample(rng) as u32;
                        let (pf, pt) = (table.probability(chain.topic as usize).ln(), table.probability(j as usize).ln());
                        chain.step(state, doc, blob, &ctx, j, pf, pt, rng)?;
                    }
                }
            }
            state.attach_blob(doc, blob, chain.topic)?;
            let eta = &state.params.supervised.eta;
            response = ctx.response.map(|(y, rest)| (y, rest + eta[chain.topic as usize]));
            if chain.topic != old {
                stats.changed += 1;
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Schema};
    use crate::model::{ModelConfig, SupervisedParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lda_state(text: &str, k: usize, alpha: f64, beta: f64, z: Vec<Vec<u32>>) -> ModelState {
        let c = Corpus::parse(text, &Schema::discrete_only()).unwrap();
        let cfg = ModelConfig::new(c.schema.clone(), k).with_alpha(alpha).with_beta(beta);
        ModelState::from_assignments(c, cfg, z).unwrap()
    }

    #[test]
    fn target_matches_gibbs_on_empty_counts() {
        let mut s = lda_state("0:a b c", 3, 0.4, 0.2, vec![vec![1]]);
        s.detach_blob(0, 0).unwrap();
        let gs = crate::gibbs::gibbs_conditional(&s, 0, 0).unwrap();
        for k in 0..3 {
            let mh = mh_target(&s, 0, 0, k).unwrap();
            // Distinct items on empty counts differ only by the shift terms
            // of the denominator, identical across topics.
            let ratio = gs[k] / mh;
            let ratio0 = gs[0] / mh_target(&s, 0, 0, 0).unwrap();
            assert!((ratio - ratio0).abs() < 1e-10 * ratio0);
        }
        let mut single = lda_state("0:a", 2, 0.4, 0.2, vec![vec![1]]);
        single.detach_blob(0, 0).unwrap();
        let gs = crate::gibbs::gibbs_conditional(&single, 0, 0).unwrap();
        for k in 0..2 {
            assert!((gs[k] - mh_target(&single, 0, 0, k).unwrap()).abs() < 1e-10 * gs[k]);
        }
    }

    #[test]
    fn target_for_one_topic() {
        let mut s = lda_state("0:a b | 0:c", 1, 0.4, 0.2, vec![vec![0, 0]]);
        s.detach_blob(0, 1).unwrap();
        let q = mh_target(&s, 0, 1, 0).unwrap();
        assert!(q > 0.0 && q.is_finite());
    }

    #[test]
    fn uniform_counts_give_uniform_item_tables() {
        let s = lda_state("0:a | 0:a | 0:b | 0:b", 2, 1.0, 0.1, vec![vec![0, 1, 0, 1]]);
        let p = build_proposals(&s, 0).unwrap();
        for table in &p.items[0] {
            assert!((table.probability(0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn concentrated_item_table() {
        // Item "w" seen 10 times, only under topic 3. Every other topic
        // holds one "x" so that no topic is empty (an empty topic gives 1/U).
        let text = (0..10).map(|_| "0:w").collect::<Vec<_>>().join(" | ") + " | 0:x | 0:x | 0:x | 0:x";
        let mut z = vec![3u32; 10];
        z.extend([0, 1, 2, 4]);
        let s = lda_state(&text, 5, 1.0, 1e-4, vec![z]);
        let p = build_proposals(&s, 0).unwrap();
        assert!(p.items[0][0].probability(3) > 0.99);
    }

    #[test]
    fn zero_eta_gives_uniform_response_table() {
        let schema = Schema::parse("factor 0 discrete\nsupervised true").unwrap();
        let c = Corpus::parse("y=3.5\t0:a | 0:b | 0:c", &schema).unwrap();
        let cfg = ModelConfig::new(schema, 4);
        let mut s = ModelState::from_assignments(c, cfg, vec![vec![0, 1, 1]]).unwrap();
        s.set_supervised(SupervisedParams { eta: vec![0.0; 4], sigma2: 0.3 });
        let p = build_proposals(&s, 0).unwrap();
        let t = p.response[0].as_ref().unwrap();
        assert!((0..4).all(|k| (t.probability(k) - 0.25).abs() < 1e-12));
    }

    #[test]
    fn doc_proposal_cases() {
        let s = lda_state("0:a | 0:b | 0:c", 4, 1e-12, 0.1, vec![vec![2, 2, 2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!((0..1000).all(|_| draw_doc_proposal(&s, 0, None, &mut rng) == 2));

        let s = lda_state("0:a | 0:b", 2, 1.0, 0.1, vec![vec![0, 1]]);
        let hits = (0..200_000).filter(|_| draw_doc_proposal(&s, 0, None, &mut rng) == 0).count();
        assert!((hits as f64 / 200_000.0 - 0.5).abs() < 0.005);
    }

    #[test]
    fn doc_proposal_excludes_detached_blob() {
        let mut s = lda_state("0:a | 0:b", 2, 1e-12, 0.1, vec![vec![0, 1]]);
        s.detach_blob(0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!((0..1000).all(|_| draw_doc_proposal(&s, 0, Some(1), &mut rng) == 0));
    }

    #[test]
    fn accept_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(mh_accept(1, 1, (0.0, -50.0), (0.0, 0.0), &mut rng).unwrap());
        assert!(mh_accept(0, 1, (0.0, 2f64.ln()), (0.0, 0.0), &mut rng).unwrap());
        assert!(matches!(
            mh_accept(0, 1, (f64::INFINITY, f64::INFINITY), (0.0, 0.0), &mut rng),
            Err(MetropolisError::NonFiniteRatio)
        ));
    }

    #[test]
    fn single_topic_sweep_is_identity() {
        let mut s = lda_state("0:a b | 0:c\n0:a", 1, 1.0, 0.1, vec![vec![0, 0], vec![0]]);
        let p = build_proposals(&s, 0).unwrap();
        let before = s.to_model(true);
        let stats = mh_sweep(&mut s, &p, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(stats.changed, 0);
        assert_eq!(s.to_model(true), before);
    }

    #[test]
    fn zero_steps_rejected() {
        let mut s = lda_state("0:a", 2, 1.0, 0.1, vec![vec![0]]);
        let p = build_proposals(&s, 0).unwrap();
        assert!(matches!(mh_sweep(&mut s, &p, 0, &mut ChaCha8Rng::seed_from_u64(3)), Err(MetropolisError::ZeroSteps)));
    }

    #[test]
    fn seeded_sweeps_repeat() {
        let run = || {
            let c = Corpus::parse("0:a b | 0:c | 0:a\n0:b | 0:c c | 0:d", &Schema::discrete_only()).unwrap();
            let cfg = ModelConfig::new(c.schema.clone(), 3);
            let mut s = ModelState::init(c, cfg, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for it in 0..10 {
                let p = build_proposals(&s, it).unwrap();
                mh_sweep(&mut s, &p, 2, &mut rng).unwrap();
            }
            assert!(s.counts_consistent());
            s.assignments().to_vec()
        };
        assert_eq!(run(), run());
    }
}
