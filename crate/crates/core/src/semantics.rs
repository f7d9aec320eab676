//! Distances between topic distributions and query-document scores.

use thiserror::Error;

use crate::model::{ModelError, TopicModel};

#[derive(Debug, Error, PartialEq)]
pub enum SemanticsError {
    #[error("q is zero at index {index} where p is positive")]
    UnsupportedSupport { index: usize },
    #[error("vectors have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("no query token is in the vocabulary")]
    EmptyQueryAfterFilter,
    #[error("theta has {found} entries, model has {expected} topics")]
    TopicCount { found: usize, expected: usize },
    #[error("{0}")]
    Model(String),
}

impl From<ModelError> for SemanticsError {
    fn from(e: ModelError) -> Self {
        SemanticsError::Model(e.to_string())
    }
}

fn same_len(p: &[f64], q: &[f64]) -> Result<(), SemanticsError> {
    if p.len() != q.len() {
        return Err(SemanticsError::LengthMismatch(p.len(), q.len()));
    }
    Ok(())
}

/// Kullback-Leibler divergence in nats, with 0 ln 0 = 0.
pub fn kld(p: &[f64], q: &[f64]) -> Result<f64, SemanticsError> {
    same_len(p, q)?;
    let mut sum = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(SemanticsError::UnsupportedSupport { index });
        }
        sum += pi * (pi / qi).ln();
    }
    Ok(sum.max(0.0))
}

/// Jensen-Shannon divergence in bits, so the result lies in [0, 1].
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, SemanticsError> {
    same_len(p, q)?;
    // Summed per index in a symmetric form, so jsd(p, q) == jsd(q, p) bit for bit.
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        let term = |x: f64| if x > 0.0 { x * (x / mi).log2() } else { 0.0 };
        sum += 0.5 * (term(pi) + term(qi));
    }
    Ok(sum.clamp(0.0, 1.0))
}

/// 1 - JSD: a similarity in [0, 1].
pub fn js_score(theta_q: &[f64], theta_d: &[f64]) -> Result<f64, SemanticsError> {
    Ok(1.0 - jsd(theta_q, theta_d)?)
}

pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64, SemanticsError> {
    same_len(p, q)?;
    let s: f64 = p.iter().zip(q).map(|(&a, &b)| (a.max(0.0).sqrt() - b.max(0.0).sqrt()).powi(2)).sum();
    Ok((s.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SemanticsError> {
    same_len(a, b)?;
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(SemanticsError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerativeScore {
    pub log_score: f64,
    /// `exp(log_score)`, or `None` when it underflows.
    pub score: Option<f64>,
    pub dropped: usize,
}

/// Probability that the document's topic mixture generates every query
/// item: Π_w Σ_k φ(w|k) θ_d(k), with per-topic item probabilities given
/// as `phi[k][w]`.
pub fn generative_score_with_phi(query: &[u32], theta_d: &[f64], phi: &[Vec<f64>]) -> Result<f64, SemanticsError> {
    if query.is_empty() {
        return Err(SemanticsError::EmptyQueryAfterFilter);
    }
    if phi.len() != theta_d.len() {
        return Err(SemanticsError::TopicCount { found: theta_d.len(), expected: phi.len() });
    }
    Ok(query
        .iter()
        .map(|&w| phi.iter().zip(theta_d).map(|(row, t)| row[w as usize] * t).sum::<f64>().ln())
        .sum())
}

/// Generative score of raw query tokens against a trained model's
/// discrete factor `factor_id`; unseen tokens are dropped and counted.
pub fn generative_score(
    query_tokens: &[&str],
    theta_d: &[f64],
    model: &TopicModel,
    factor_id: usize,
) -> Result<GenerativeScore, SemanticsError> {
    let k = model.num_topics();
    if theta_d.len() != k {
        return Err(SemanticsError::TopicCount { found: theta_d.len(), expected: k });
    }
    let ordinal = match model.config.schema.slot(factor_id) {
        Some(crate::corpus::FactorSlot::Discrete(i)) => i,
        _ => return Err(ModelError::NotADiscreteFactor(factor_id).into()),
    };
    let vocab = &model.vocabs[ordinal];
    let ids: Vec<u32> = query_tokens.iter().filter_map(|t| vocab.id(t)).collect();
    let dropped = query_tokens.len() - ids.len();
    let phi: Vec<Vec<f64>> = (0..k).map(|t| model.phi(factor_id, t)).collect::<Result<_, _>>()?;
    let log_score = generative_score_with_phi(&ids, theta_d, &phi)?;
    let linear = log_score.exp();
    Ok(GenerativeScore { log_score, score: (linear > 0.0).then_some(linear), dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn kld_cases() {
        assert_eq!(kld(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(close(kld(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 2f64.ln()));
        assert_eq!(kld(&[0.5, 0.5], &[1.0, 0.0]), Err(SemanticsError::UnsupportedSupport { index: 1 }));
    }

    #[test]
    fn jsd_and_hellinger_extremes() {
        assert_eq!(jsd(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(hellinger(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!(close(hellinger(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0));
        assert_eq!(js_score(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(js_score(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn cosine_cases() {
        assert!(close(cosine(&[2.0, 1.0], &[2.0, 1.0]).unwrap(), 1.0));
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!(close(cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5f64.sqrt()));
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), Err(SemanticsError::ZeroVector));
    }

    #[test]
    fn generative_hand_example() {
        let phi = vec![vec![0.1, 0.9], vec![0.3, 0.7]];
        let s = generative_score_with_phi(&[0], &[0.6, 0.4], &phi).unwrap().exp();
        assert!((s - 0.18).abs() < 1e-9);
        let twice = generative_score_with_phi(&[0, 0], &[0.6, 0.4], &phi).unwrap().exp();
        assert!((twice - 0.18 * 0.18).abs() < 1e-12);
        assert_eq!(generative_score_with_phi(&[], &[0.6, 0.4], &phi), Err(SemanticsError::EmptyQueryAfterFilter));
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn distances_bounded_and_symmetric(p in simplex(6), q in simplex(6)) {
            let (a, b) = (jsd(&p, &q).unwrap(), jsd(&q, &p).unwrap());
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
            let (h1, h2) = (hellinger(&p, &q).unwrap(), hellinger(&q, &p).unwrap());
            prop_assert!((h1 - h2).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&h1));
            prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-12);
        }

        #[test]
        fn hellinger_triangle(p in simplex(5), q in simplex(5), r in simplex(5)) {
            prop_assert!(hellinger(&p, &r).unwrap() <= hellinger(&p, &q).unwrap() + hellinger(&q, &r).unwrap() + 1e-12);
        }

        #[test]
        fn ranking_invariant_under_topic_permutation(q in simplex(4), docs in prop::collection::vec(simplex(4), 5), seed in 0u64..24) {
            let perm = permutation(4, seed);
            let apply = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let rank = |q: &[f64], ds: &[Vec<f64>]| {
                let scores: Vec<f64> = ds.iter().map(|d| js_score(q, d).unwrap()).collect();
                let mut idx: Vec<usize> = (0..ds.len()).collect();
                idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
                (idx, scores)
            };
            let (r1, s1) = rank(&q, &docs);
            let permuted: Vec<Vec<f64>> = docs.iter().map(|d| apply(d)).collect();
            let (r2, s2) = rank(&apply(&q), &permuted);
            for (a, b) in s1.iter().zip(&s2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // Orders agree except between scores equal up to rounding.
            for w in r1.windows(2).zip(r2.windows(2)) {
                let ((a0, a1), (b0, b1)) = ((w.0[0], w.0[1]), (w.1[0], w.1[1]));
                prop_assert!((a0 == b0 && a1 == b1) || (s1[a0] - s1[a1]).abs() < 1e-12 || (s1[b0] - s1[b1]).abs() < 1e-12);
            }
        }

        #[test]
        fn generative_monotone_in_theta(shift in 0.0f64..0.5, phi0 in 0.01f64..0.5, phi1 in 0.01f64..0.5) {
            // Moving theta mass toward the topic with the larger phi(w) never lowers the score.
            let (lo, hi) = if phi0 <= phi1 { (phi0, phi1) } else { (phi1, phi0) };
            let phi = vec![vec![lo, 1.0 - lo], vec![hi, 1.0 - hi]];
            let before = generative_score_with_phi(&[0], &[0.5 + shift, 0.5 - shift], &phi).unwrap();
            let after = generative_score_with_phi(&[0], &[0.5 - shift, 0.5 + shift], &phi).unwrap();
            prop_assert!(after >= before - 1e-15);
        }
    }

    fn permutation(n: usize, mut seed: u64) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        let mut out = Vec::with_capacity(n);
        while !pool.is_empty() {
            out.push(pool.remove((seed % pool.len() as u64) as usize));
            seed /= 7;
        }
        out
    }
}
