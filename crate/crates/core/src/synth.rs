//! Synthetic corpora drawn from known models, with the ground truth kept
//! alongside. Used by tests, benchmarks and the shipped example corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::alias::AliasTable;
use crate::corpus::{Corpus, CorpusError, Schema};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    pub blobs_per_doc: usize,
    /// Items per blob; only SentenceLDA blobs hold more than one.
    pub items_per_blob: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(num_docs: usize, num_topics: usize, vocab_size: usize, seed: u64) -> Self {
        SynthConfig { num_docs, num_topics, vocab_size, blobs_per_doc: 50, items_per_blob: 1, alpha: 0.1, beta: 0.05, seed }
    }
}

/// How the generated documents are organized.
#[derive(Debug, Clone)]
pub enum Organization {
    /// One word per blob.
    Lda,
    /// `items_per_blob` words per blob, all drawn from the blob's topic.
    SentenceLda,
    /// One word and one Beta-distributed timestamp per blob; `(a, b)` per topic.
    Tot { time_params: Vec<(f64, f64)> },
    /// One word per blob and a response y = eta . zbar + N(0, noise_sd²).
    Slda { eta: Vec<f64>, noise_sd: f64 },
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub schema_text: String,
    pub corpus_text: String,
    /// True item distribution per topic.
    pub phi: Vec<Vec<f64>>,
    /// True topic proportions per document.
    pub theta: Vec<Vec<f64>>,
    /// True blob topics.
    pub topics: Vec<Vec<u32>>,
    pub signals: Vec<f64>,
}

impl Synthetic {
    pub fn schema(&self) -> Schema {
        Schema::parse(&self.schema_text).expect("generated schema parses")
    }

    pub fn corpus(&self) -> Result<Corpus, CorpusError> {
        Corpus::parse(&self.corpus_text, &self.schema())
    }
}

fn dirichlet<R: Rng>(rng: &mut R, concentration: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 {
            return draws.into_iter().map(|x| x / sum).collect();
        }
    }
}

fn categorical<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    let mut u: f64 = rng.random();
    for (i, &x) in p.iter().enumerate() {
        u -= x;
        if u < 0.0 {
            return i;
        }
    }
    p.len() - 1
}

pub fn generate(cfg: &SynthConfig, org: &Organization) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.num_topics;
    let phi: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(&mut rng, cfg.beta, cfg.vocab_size)).collect();
    let time_dists: Vec<Beta<f64>> = match org {
        Organization::Tot { time_params } => {
            assert_eq!(time_params.len(), k, "one timestamp distribution per topic");
            time_params.iter().map(|&(a, b)| Beta::new(a, b).expect("valid beta parameters")).collect()
        }
        _ => Vec::new(),
    };
    let word_tables: Vec<AliasTable> = phi.iter().map(|p| AliasTable::new(p).expect("dirichlet draw is a valid pmf")).collect();
    let items = match org {
        Organization::SentenceLda => cfg.items_per_blob.max(1),
        _ => 1,
    };

    let mut lines = Vec::with_capacity(cfg.num_docs);
    let mut theta = Vec::with_capacity(cfg.num_docs);
    let mut topics = Vec::with_capacity(cfg.num_docs);
    let mut signals = Vec::new();
    for _ in 0..cfg.num_docs {
        let th = dirichlet(&mut rng, cfg.alpha, k);
        let mut z = Vec::with_capacity(cfg.blobs_per_doc);
        let mut blobs = Vec::with_capacity(cfg.blobs_per_doc);
        for _ in 0..cfg.blobs_per_doc {
            let t = categorical(&mut rng, &th);
            z.push(t as u32);
            let words: Vec<String> = (0..items).map(|_| format!("w{}", word_tables[t].sample(&mut rng))).collect();
            let mut blob = format!("0:{}", words.join(" "));
            if !time_dists.is_empty() {
                let stamp = time_dists[t].sample(&mut rng);
                blob.push_str(&format!(" ; 1:{stamp:.4}"));
            }
            blobs.push(blob);
        }
        let body = blobs.join(" | ");
        match org {
            Organization::Slda { eta, noise_sd } => {
                let mut zbar = vec![0.0; k];
                z.iter().for_each(|&t| zbar[t as usize] += 1.0 / cfg.blobs_per_doc as f64);
                let mean: f64 = zbar.iter().zip(eta).map(|(a, b)| a * b).sum();
                let y = if *noise_sd > 0.0 { mean + Normal::new(0.0, *noise_sd).unwrap().sample(&mut rng) } else { mean };
                signals.push(y);
                lines.push(format!("y={y:.6}\t{body}"));
            }
            _ => lines.push(body),
        }
        theta.push(th);
        topics.push(z);
    }

    let schema_text = match org {
        Organization::Tot { .. } => "factor 0 discrete\nfactor 1 continuous beta\n",
        Organization::Slda { .. } => "factor 0 discrete\nsupervised true\n",
        _ => "factor 0 discrete\n",
    }
    .to_string();
    Synthetic { schema_text, corpus_text: lines.join("\n") + "\n", phi, theta, topics, signals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_corpora_parse() {
        let cfg = SynthConfig { blobs_per_doc: 5, items_per_blob: 3, ..SynthConfig::new(20, 3, 30, 1) };
        for org in [
            Organization::Lda,
            Organization::SentenceLda,
            Organization::Tot { time_params: vec![(8.0, 2.0), (2.0, 8.0), (1.0, 1.0)] },
            Organization::Slda { eta: vec![1.0, -1.0, 0.0], noise_sd: 0.1 },
        ] {
            let s = generate(&cfg, &org);
            let c = s.corpus().unwrap();
            assert_eq!(c.num_documents(), 20);
            assert_eq!(c.num_blobs(), 100);
            assert_eq!(s.topics.len(), 20);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig::new(5, 2, 10, 7);
        assert_eq!(generate(&cfg, &Organization::Lda).corpus_text, generate(&cfg, &Organization::Lda).corpus_text);
    }
}
