//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's own likelihood or sampler arithmetic.
#![allow(dead_code)]

use familia::corpus::Corpus;

/// ln of x (x+1) ... (x+n-1), by direct product.
pub fn ln_rise(x: f64, n: u64) -> f64 {
    (0..n).map(|i| (x + i as f64).ln()).sum()
}

/// Exact log joint of discrete-only blob assignments `z` (flattened in
/// document then blob order).
pub fn exact_log_joint(corpus: &Corpus, k: usize, alpha: &[f64], beta: f64, z: &[usize]) -> f64 {
    let u = corpus.vocabs[0].len();
    let alpha_sum: f64 = alpha.iter().sum();
    let mut n = vec![vec![0u64; u]; k];
    let mut total = 0.0;
    let mut idx = 0;
    for doc in &corpus.documents {
        let mut m = vec![0u64; k];
        for blob in &doc.blobs {
            let t = z[idx];
            idx += 1;
            m[t] += 1;
            for &w in &blob.discrete[0] {
                n[t][w as usize] += 1;
            }
        }
        total += (0..k).map(|t| ln_rise(alpha[t], m[t])).sum::<f64>() - ln_rise(alpha_sum, doc.blobs.len() as u64);
    }
    for row in &n {
        let nk: u64 = row.iter().sum();
        total += row.iter().map(|&c| ln_rise(beta, c)).sum::<f64>() - ln_rise(u as f64 * beta, nk);
    }
    total
}

/// Exact per-blob topic marginals by enumerating all K^B assignments.
pub fn exact_marginals(corpus: &Corpus, k: usize, alpha: &[f64], beta: f64) -> Vec<Vec<f64>> {
    let b = corpus.num_blobs();
    let states = k.pow(b as u32);
    let mut logs = Vec::with_capacity(states);
    let mut zs = Vec::with_capacity(states);
    for code in 0..states {
        let mut z = vec![0; b];
        let mut c = code;
        for slot in z.iter_mut() {
            *slot = c % k;
            c /= k;
        }
        logs.push(exact_log_joint(corpus, k, alpha, beta, &z));
        zs.push(z);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let norm: f64 = weights.iter().sum();
    let mut marg = vec![vec![0.0; k]; b];
    for (z, w) in zs.iter().zip(&weights) {
        for (blob, &t) in z.iter().enumerate() {
            marg[blob][t] += w / norm;
        }
    }
    marg
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn normalize(counts: &[u64]) -> Vec<f64> {
    let s: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / s as f64).collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best matching `map[true_topic] = learned_topic` minimizing the summed
/// L1 distance between item distributions, by brute force.
pub fn align_topics(truth: &[Vec<f64>], learned: &[Vec<f64>]) -> Vec<usize> {
    let k = truth.len();
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| learned.iter().map(|l| t.iter().zip(l).map(|(a, b)| (a - b).abs()).sum()).collect())
        .collect();
    permutations(k)
        .into_iter()
        .min_by(|a, b| {
            let ca: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let cb: f64 = b.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            ca.total_cmp(&cb)
        })
        .unwrap()
}

/// Learned phi re-indexed to the true vocabulary `w0..w{V-1}`.
pub fn phi_in_true_vocab(state: &familia::ModelState, true_vocab: usize) -> Vec<Vec<f64>> {
    let vocab = &state.corpus().vocabs[0];
    (0..state.num_topics())
        .map(|k| {
            let phi = state.phi(0, k).unwrap();
            (0..true_vocab).map(|w| vocab.id(&format!("w{w}")).map_or(0.0, |id| phi[id as usize])).collect()
        })
        .collect()
}

/// `a >= b` allowing `a` to fall short of `b` by `rel` of |b|.
pub fn at_least(a: f64, b: f64, rel: f64) -> bool {
    a >= b - rel * b.abs()
}
