mod common;

use familia::corpus::{Corpus, Schema};
use familia::gibbs::gibbs_sweep;
use familia::metropolis::{build_proposals, draw_doc_proposal, mh_accept, mh_log_target};
use familia::model::{ModelConfig, ModelState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn state(text: &str, alpha: Vec<f64>, beta: f64, z: Vec<Vec<u32>>) -> ModelState {
    let schema = Schema::discrete_only();
    let corpus = Corpus::parse(text, &schema).unwrap();
    let k = alpha.len();
    let config = ModelConfig::new(schema, k).with_alpha_vector(alpha).with_beta(beta);
    ModelState::from_assignments(corpus, config, z).unwrap()
}

/// Index of the joint assignment in the enumeration order of the oracle.
fn joint_code(state: &ModelState, k: usize) -> usize {
    let flat: Vec<u32> = state.assignments().iter().flatten().copied().collect();
    flat.iter().rev().fold(0, |acc, &t| acc * k + t as usize)
}

fn exact_joint(corpus: &Corpus, k: usize, alpha: &[f64], beta: f64) -> Vec<f64> {
    let b = corpus.num_blobs();
    let logs: Vec<f64> = (0..k.pow(b as u32))
        .map(|code| {
            let mut c = code;
            let z: Vec<usize> = (0..b)
                .map(|_| {
                    let t = c % k;
                    c /= k;
                    t
                })
                .collect();
            exact_log_joint(corpus, k, alpha, beta, &z)
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

#[test]
fn gibbs_joint_matches_enumeration() {
    let alpha = vec![0.4, 1.3];
    let mut s = state("0:a a b | 0:c\n0:b c c | 0:a b\n", alpha.clone(), 0.6, vec![vec![0, 1], vec![1, 0]]);
    let exact = exact_joint(s.corpus(), 2, &alpha, 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        gibbs_sweep(&mut s, &mut rng).unwrap();
    }
    let mut hits = vec![0u64; exact.len()];
    for _ in 0..200_000 {
        gibbs_sweep(&mut s, &mut rng).unwrap();
        hits[joint_code(&s, 2)] += 1;
    }
    let d = tv(&normalize(&hits), &exact);
    assert!(d < 0.05, "joint TV {d}");
}

/// Frozen two-topic state with blob (0, 0) detached.
fn frozen() -> ModelState {
    let mut s = state(
        "0:a | 0:b | 0:a | 0:c\n0:a | 0:c | 0:c\n",
        vec![0.7, 0.4],
        0.2,
        vec![vec![0, 1, 1, 0], vec![0, 1, 1]],
    );
    s.detach_blob(0, 0).unwrap();
    s
}

/// Estimates P(i -> j) from `trials` proposal/acceptance pairs started at
/// `from`, for a proposal given as sampler plus log-probability.
fn transition_rate<D, L>(s: &ModelState, from: u32, trials: usize, seed: u64, mut draw: D, log_q: L) -> f64
where
    D: FnMut(&mut ChaCha8Rng) -> u32,
    L: Fn(u32) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = |k: u32| mh_log_target(s, 0, 0, k as usize).unwrap();
    let mut moved = 0usize;
    for _ in 0..trials {
        let to = draw(&mut rng);
        if to != from && mh_accept(from, to, (target(from), target(to)), (log_q(from), log_q(to)), &mut rng).unwrap() {
            moved += 1;
        }
    }
    moved as f64 / trials as f64
}

fn assert_balanced<D, L>(s: &ModelState, draw: D, log_q: L)
where
    D: Fn(&mut ChaCha8Rng) -> u32 + Copy,
    L: Fn(u32) -> f64 + Copy,
{
    let pi: Vec<f64> = {
        let t: Vec<f64> = (0..2).map(|k| mh_log_target(s, 0, 0, k).unwrap().exp()).collect();
        let z: f64 = t.iter().sum();
        t.iter().map(|x| x / z).collect()
    };
    let p01 = transition_rate(s, 0, 1_000_000, 1, draw, log_q);
    let p10 = transition_rate(s, 1, 1_000_000, 2, draw, log_q);
    let (f01, f10) = (pi[0] * p01, pi[1] * p10);
    assert!(f01 > 0.0, "no moves");
    assert!((f01 - f10).abs() / f01.max(f10) < 0.01, "flux 0->1 {f01} vs 1->0 {f10}");
}

#[test]
fn document_proposal_satisfies_detailed_balance() {
    let s = frozen();
    let m = s.doc_topic().row(0).to_vec();
    let alpha = s.config().alpha.clone();
    assert_balanced(&s, |rng| draw_doc_proposal(&s, 0, Some(0), rng), |k| (m[k as usize] as f64 + alpha[k as usize]).ln());
}

#[test]
fn item_proposal_satisfies_detailed_balance() {
    let s = frozen();
    let tables = build_proposals(&s, 0).unwrap();
    let a = s.corpus().vocabs[0].id("a").unwrap() as usize;
    let table = &tables.items[0][a];
    assert_balanced(&s, |rng| table.sample(rng) as u32, |k| table.probability(k as usize).ln());
}

#[test]
fn document_proposal_frequencies_match_weights() {
    let s = state("0:a | 0:b | 0:a | 0:c | 0:b\n", vec![0.3, 0.5, 1.2], 0.1, vec![vec![0, 1, 1, 2, 0]]);
    let mut s = s;
    s.detach_blob(0, 1).unwrap();
    let m = s.doc_topic().row(0).to_vec();
    let weights: Vec<f64> = (0..3).map(|k| m[k] as f64 + s.config().alpha[k]).collect();
    let total: f64 = weights.iter().sum();
    let expected: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut hits = vec![0u64; 3];
    for _ in 0..1_000_000 {
        hits[draw_doc_proposal(&s, 0, Some(1), &mut rng) as usize] += 1;
    }
    let d = tv(&normalize(&hits), &expected);
    assert!(d < 0.005, "TV {d}");
}

#[test]
fn item_table_frequencies_match_weights() {
    let beta = 0.1;
    let s = state("0:a | 0:b | 0:a | 0:c | 0:a\n0:a | 0:c\n", vec![0.5; 3], beta, vec![vec![0, 1, 0, 2, 1], vec![2, 2]]);
    let tables = build_proposals(&s, 0).unwrap();
    let counts = s.word_topic(0);
    let u = counts.vocab_size() as f64;
    let a = s.corpus().vocabs[0].id("a").unwrap();
    // Independent evaluation of (n_ka + beta) / (n_k + U beta) from the raw assignments.
    let mut n_ka = [0.0; 3];
    let mut n_k = [0.0; 3];
    for (d, doc) in s.corpus().documents.iter().enumerate() {
        for (b, blob) in doc.blobs.iter().enumerate() {
            let t = s.topic(d, b) as usize;
            n_k[t] += blob.discrete[0].len() as f64;
            n_ka[t] += blob.discrete[0].iter().filter(|&&w| w == a).count() as f64;
        }
    }
    let weights: Vec<f64> = (0..3).map(|k| (n_ka[k] + beta) / (n_k[k] + u * beta)).collect();
    let total: f64 = weights.iter().sum();
    let expected: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut hits = vec![0u64; 3];
    for _ in 0..1_000_000 {
        hits[tables.items[0][a as usize].sample(&mut rng)] += 1;
    }
    let d = tv(&normalize(&hits), &expected);
    assert!(d < 0.005, "TV {d}");
}

#[test]
fn alias_build_scales_linearly() {
    use familia::alias::AliasTable;
    use rand::Rng;
    use std::time::Instant;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let time = |w: &[f64]| {
        let start = Instant::now();
        std::hint::black_box(AliasTable::new(w).unwrap());
        start.elapsed().as_secs_f64()
    };
    for n in [1 << 16, 1 << 17, 1 << 18] {
        let small: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let large: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        // Interleaved minima, so other threads on a shared CPU hit both sizes alike.
        let (mut best_small, mut best_large) = (f64::INFINITY, f64::INFINITY);
        for _ in 0..15 {
            best_small = best_small.min(time(&small));
            best_large = best_large.min(time(&large));
        }
        let ratio = best_large / best_small;
        assert!(ratio < 2.5, "doubling {n} -> {} multiplied build time by {ratio}", 2 * n);
    }
}

#[test]
fn gibbs_matches_enumeration_with_a_beta_factor() {
    use familia::model::{BetaParams, ContinuousTopicParams};
    use statrs::function::gamma::ln_gamma;

    let schema = Schema::parse("factor 0 discrete\nfactor 1 continuous beta\n").unwrap();
    let text = "0:a ; 1:0.2 | 0:b ; 1:0.7 | 0:a ; 1:0.9\n0:b ; 1:0.3 | 0:c ; 1:0.8\n";
    let corpus = Corpus::parse(text, &schema).unwrap();
    let (alpha, beta) = (vec![0.6, 0.8], 0.4);
    let psi = [(2.0, 5.0), (5.0, 2.0)];
    let config = ModelConfig::new(schema, 2).with_alpha_vector(alpha.clone()).with_beta(beta);
    let mut s = ModelState::from_assignments(corpus.clone(), config, vec![vec![0, 0, 0], vec![1, 1]]).unwrap();
    s.set_continuous(0, ContinuousTopicParams::beta(psi.iter().map(|&(a, b)| BetaParams { a, b }).collect()));

    // Discrete oracle plus fixed Beta densities per blob.
    let ln_beta_pdf = |x: f64, (a, b): (f64, f64)| {
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
    };
    let stamps: Vec<f64> = corpus
        .documents
        .iter()
        .flat_map(|d| d.blobs.iter().map(|b| corpus.domains[0].value(b.continuous[0][0])))
        .collect();
    let n = stamps.len();
    let logs: Vec<f64> = (0..1usize << n)
        .map(|code| {
            let z: Vec<usize> = (0..n).map(|i| (code >> i) & 1).collect();
            exact_log_joint(&corpus, 2, &alpha, beta, &z)
                + z.iter().zip(&stamps).map(|(&t, &x)| ln_beta_pdf(x, psi[t])).sum::<f64>()
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let exact: Vec<f64> = w.iter().map(|x| x / w.iter().sum::<f64>()).collect();

    // Beta parameters stay fixed: no barrier updates run between sweeps.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut hits = vec![0u64; exact.len()];
    for it in 0..201_000 {
        gibbs_sweep(&mut s, &mut rng).unwrap();
        if it >= 1000 {
            hits[joint_code(&s, 2)] += 1;
        }
    }
    let d = tv(&normalize(&hits), &exact);
    assert!(d < 0.05, "joint TV {d}");
}
