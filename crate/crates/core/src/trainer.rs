//! Training loop: runs a schedule of Gibbs and Metropolis-Hastings
//! iterations, re-estimates continuous and response parameters at every
//! iteration barrier and records the joint log-likelihood.
//!
//! With more than one worker the documents are split round-robin into
//! shards. Each shard owns its documents' blob-topic rows and pulls the
//! item-topic rows it needs from a [`ParameterService`] at the start of the
//! iteration. Shards sample against that snapshot and push additive
//! deltas back, which are merged at the barrier.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::continuous::{update_state_params, UpdateError};
use crate::gibbs::{gibbs_sweep, SweepStats};
use crate::likelihood::joint_log_likelihood;
use crate::metropolis::{build_proposals, mh_sweep, MetropolisError};
use crate::model::{DocTopicCounts, ModelConfig, ModelError, ModelState, Parameters, WordTopicCounts};
use crate::parallel;
use crate::schedule::{Sampler, Schedule};
use crate::corpus::Corpus;

pub const DEFAULT_CHECKPOINT_EVERY: usize = 10;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("workers must be at least 1")]
    ZeroWorkers,
    #[error("shard delta for factor {factor}, item {item}, topic {topic} leaves a negative count")]
    ShardMergeConflict { factor: usize, item: u32, topic: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metropolis(#[from] MetropolisError),
    #[error(transparent)]
    Update(#[from] UpdateError),
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: ModelError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub schedule: Schedule,
    pub seed: u64,
    pub workers: usize,
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainOptions {
    pub fn new(schedule: Schedule, seed: u64) -> Self {
        TrainOptions { schedule, seed, workers: 1, checkpoint_every: DEFAULT_CHECKPOINT_EVERY, checkpoint_dir: None }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sampler: Sampler,
    pub log_likelihood: f64,
    /// Sampling plus barrier, excluding the likelihood evaluation.
    pub wall_ms: f64,
    pub changed: usize,
    /// Slowest shard plus barrier: the iteration time with one core per shard.
    pub critical_ms: f64,
    /// All shards back to back plus barrier.
    pub serial_ms: f64,
    pub likelihood_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub initial_log_likelihood: f64,
    pub records: Vec<IterationRecord>,
    pub model_path: Option<PathBuf>,
}

impl TrainReport {
    pub fn final_log_likelihood(&self) -> f64 {
        self.records.last().map_or(self.initial_log_likelihood, |r| r.log_likelihood)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,sampler,log_likelihood,wall_ms,changed\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{:.6},{:.3},{}", r.iteration, r.sampler, r.log_likelihood, r.wall_ms, r.changed);
        }
        out
    }

    pub fn mean_wall_ms(&self) -> f64 {
        mean(self.records.iter().map(|r| r.wall_ms))
    }

    pub fn mean_critical_ms(&self) -> f64 {
        mean(self.records.iter().map(|r| r.critical_ms))
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// Sparse additive change to one factor's item-topic counts, keyed by
/// global item id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountDelta {
    pub factor: usize,
    pub entries: Vec<(u32, u32, i64)>,
    pub totals: Vec<i64>,
}

/// Holds the global item-topic counts. Pulls copy rows out; pushes add
/// deltas. Deltas commute, so merge order does not matter.
#[derive(Debug)]
pub struct ParameterService {
    tables: Vec<WordTopicCounts>,
}

impl ParameterService {
    pub fn new(tables: Vec<WordTopicCounts>) -> Self {
        ParameterService { tables }
    }

    /// Rows `items` of factor `factor` as a matrix whose normalizer still
    /// uses the global vocabulary size and totals.
    pub fn pull(&self, factor: usize, items: &[u32]) -> WordTopicCounts {
        let t = &self.tables[factor];
        let mut counts = Vec::with_capacity(items.len() * t.num_topics());
        for &u in items {
            counts.extend_from_slice(t.row(u));
        }
        WordTopicCounts::from_parts(t.num_topics(), t.vocab_size(), counts, t.totals().to_vec())
    }

    pub fn push(&mut self, delta: &CountDelta) -> Result<(), TrainError> {
        let t = &mut self.tables[delta.factor];
        for &(item, topic, change) in &delta.entries {
            t.add(item, topic as usize, change)
                .ok_or(TrainError::ShardMergeConflict { factor: delta.factor, item, topic: topic as usize })?;
        }
        for (k, &change) in delta.totals.iter().enumerate() {
            t.add_total(k, change)
                .ok_or(TrainError::ShardMergeConflict { factor: delta.factor, item: u32::MAX, topic: k })?;
        }
        Ok(())
    }

    pub fn into_tables(self) -> Vec<WordTopicCounts> {
        self.tables
    }
}

/// Difference between a shard's counts after sampling and the snapshot it
/// pulled, translated to global item ids.
fn shard_delta(factor: usize, local_to_global: &[u32], before: &WordTopicCounts, after: &WordTopicCounts) -> CountDelta {
    let k = after.num_topics();
    let mut entries = Vec::new();
    for (local, &global) in local_to_global.iter().enumerate() {
        let (b, a) = (before.row(local as u32), after.row(local as u32));
        for t in 0..k {
            if a[t] != b[t] {
                entries.push((global, t as u32, a[t] as i64 - b[t] as i64));
            }
        }
    }
    let totals = after.totals().iter().zip(before.totals()).map(|(&a, &b)| a as i64 - b as i64).collect();
    CountDelta { factor, entries, totals }
}

struct Shard {
    doc_ids: Vec<usize>,
    local_to_global: Vec<Vec<u32>>,
    state: ModelState,
    snapshot: Vec<WordTopicCounts>,
}

struct ShardOutcome {
    stats: SweepStats,
    elapsed_ms: f64,
    deltas: Vec<CountDelta>,
}

/// Per (seed, iteration, shard) generator, so every run with the same
/// seed and worker count draws the same numbers.
fn stream_rng(seed: u64, iteration: usize, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 16) | shard as u64);
    rng
}

fn sweep(state: &mut ModelState, sampler: Sampler, iteration: usize, rng: &mut ChaCha8Rng) -> Result<SweepStats, TrainError> {
    Ok(match sampler {
        Sampler::Gibbs => gibbs_sweep(state, rng)?,
        Sampler::Metropolis { steps } => {
            let proposals = build_proposals(state, iteration)?;
            mh_sweep(state, &proposals, steps, rng)?
        }
    })
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Stepwise trainer over one global state.
pub struct Trainer {
    state: ModelState,
    shards: Vec<Shard>,
    seed: u64,
    iteration: usize,
}

impl Trainer {
    pub fn new(state: ModelState, seed: u64, workers: usize) -> Result<Self, TrainError> {
        if workers == 0 {
            return Err(TrainError::ZeroWorkers);
        }
        let shards = if workers > 1 { Self::make_shards(&state, workers) } else { Vec::new() };
        Ok(Trainer { state, shards, seed, iteration: 0 })
    }

    fn make_shards(state: &ModelState, workers: usize) -> Vec<Shard> {
        let k = state.config.num_topics;
        state
            .corpus
            .round_robin(workers)
            .into_iter()
            .filter(|ids| !ids.is_empty())
            .map(|doc_ids| {
                let (corpus, local_to_global) = state.corpus.shard(&doc_ids);
                let assignments: Vec<Vec<u32>> = doc_ids.iter().map(|&d| state.assignments[d].clone()).collect();
                let mut doc_topic = DocTopicCounts::zeros(doc_ids.len(), k);
                for (l, z) in assignments.iter().enumerate() {
                    z.iter().for_each(|&t| doc_topic.increment(l, t as usize));
                }
                let word_topic = local_to_global
                    .iter()
                    .enumerate()
                    .map(|(i, ids)| WordTopicCounts::zeros(ids.len(), k).with_vocab_size(state.params.word_topic[i].vocab_size()))
                    .collect();
                let params = Parameters {
                    word_topic,
                    continuous: state.params.continuous.clone(),
                    supervised: state.params.supervised.clone(),
                };
                let shard_state = ModelState {
                    config: state.config.clone(),
                    corpus,
                    params,
                    assignments,
                    doc_topic,
                    detached: None,
                    alpha_table: state.alpha_table.clone(),
                };
                Shard { doc_ids, local_to_global, state: shard_state, snapshot: Vec::new() }
            })
            .collect()
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn into_state(self) -> ModelState {
        self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len().max(1)
    }

    /// Runs one iteration: sweep, barrier updates and likelihood.
    pub fn step(&mut self, sampler: Sampler) -> Result<IterationRecord, TrainError> {
        let iteration = self.iteration;
        let start = Instant::now();
        let (stats, max_shard_ms, sum_shard_ms, barrier_start) = if self.shards.is_empty() {
            let mut rng = stream_rng(self.seed, iteration, 0);
            let stats = sweep(&mut self.state, sampler, iteration, &mut rng)?;
            let ms = ms_since(start);
            (stats, ms, ms, Instant::now())
        } else {
            self.sharded_sweep(sampler, iteration)?
        };
        update_state_params(&mut self.state)?;
        let barrier_ms = ms_since(barrier_start);
        let wall_ms = ms_since(start);

        let ll_start = Instant::now();
        let log_likelihood = joint_log_likelihood(&self.state);
        let likelihood_ms = ms_since(ll_start);
        self.iteration += 1;
        debug!("iteration {iteration} {sampler}: ll {log_likelihood:.3}, changed {}", stats.changed);
        Ok(IterationRecord {
            iteration,
            sampler,
            log_likelihood,
            wall_ms,
            changed: stats.changed,
            critical_ms: max_shard_ms + barrier_ms,
            serial_ms: sum_shard_ms + barrier_ms,
            likelihood_ms,
        })
    }

    fn sharded_sweep(&mut self, sampler: Sampler, iteration: usize) -> Result<(SweepStats, f64, f64, Instant), TrainError> {
        let service = ParameterService::new(std::mem::take(&mut self.state.params.word_topic));
        // Pull: item rows, continuous and response parameters.
        for shard in &mut self.shards {
            let pulled: Vec<WordTopicCounts> =
                shard.local_to_global.iter().enumerate().map(|(i, ids)| service.pull(i, ids)).collect();
            shard.state.params.word_topic = pulled.clone();
            shard.snapshot = pulled;
            shard.state.params.continuous.clone_from(&self.state.params.continuous);
            shard.state.params.supervised.clone_from(&self.state.params.supervised);
        }
        let seed = self.seed;
        let outcomes = parallel::map_mut(&mut self.shards, |s, shard| -> Result<ShardOutcome, TrainError> {
            let start = Instant::now();
            let mut rng = stream_rng(seed, iteration, s);
            let stats = sweep(&mut shard.state, sampler, iteration, &mut rng)?;
            let deltas = shard
                .local_to_global
                .iter()
                .enumerate()
                .map(|(i, ids)| shard_delta(i, ids, &shard.snapshot[i], &shard.state.params.word_topic[i]))
                .collect();
            Ok(ShardOutcome { stats, elapsed_ms: ms_since(start), deltas })
        });

        let barrier = Instant::now();
        let mut service = service;
        let mut stats = SweepStats::default();
        let (mut max_ms, mut sum_ms) = (0.0f64, 0.0);
        for outcome in outcomes {
            let outcome = outcome?;
            for delta in &outcome.deltas {
                service.push(delta)?;
            }
            stats.changed += outcome.stats.changed;
            stats.blobs += outcome.stats.blobs;
            max_ms = max_ms.max(outcome.elapsed_ms);
            sum_ms += outcome.elapsed_ms;
        }
        self.state.params.word_topic = service.into_tables();
        for shard in &self.shards {
            for (l, &d) in shard.doc_ids.iter().enumerate() {
                for (b, &new) in shard.state.assignments[l].iter().enumerate() {
                    let old = self.state.assignments[d][b];
                    if old != new {
                        self.state.doc_topic.decrement(d, old as usize);
                        self.state.doc_topic.increment(d, new as usize);
                        self.state.assignments[d][b] = new;
                    }
                }
            }
        }
        Ok((stats, max_ms, sum_ms, barrier))
    }
}

fn checkpoint(state: &ModelState, dir: &PathBuf, iteration: usize) -> Result<PathBuf, TrainError> {
    fs::create_dir_all(dir).map_err(|source| TrainError::Io { path: dir.clone(), source })?;
    let path = dir.join(format!("checkpoint-{iteration:05}.json"));
    state.to_model(true).save(&path).map_err(|source| TrainError::Checkpoint { path: path.clone(), source })?;
    Ok(path)
}

/// Trains from an already initialized state.
pub fn train_state(state: ModelState, options: &TrainOptions) -> Result<(ModelState, TrainReport), TrainError> {
    if state.corpus.documents.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut trainer = Trainer::new(state, options.seed, options.workers)?;
    let mut report = TrainReport { initial_log_likelihood: joint_log_likelihood(trainer.state()), ..Default::default() };
    for &sampler in options.schedule.entries() {
        let record = trainer.step(sampler)?;
        let done = record.iteration + 1;
        report.records.push(record);
        if let Some(dir) = &options.checkpoint_dir {
            if options.checkpoint_every > 0 && done % options.checkpoint_every == 0 {
                report.model_path = Some(checkpoint(trainer.state(), dir, done)?);
            }
        }
    }
    info!(
        "trained {} iterations with {} shard(s): log-likelihood {:.3} -> {:.3}",
        report.records.len(),
        trainer.num_shards(),
        report.initial_log_likelihood,
        report.final_log_likelihood()
    );
    Ok((trainer.into_state(), report))
}

/// Random initialization from `options.seed`, then the schedule.
pub fn train(corpus: Corpus, config: ModelConfig, options: &TrainOptions) -> Result<(ModelState, TrainReport), TrainError> {
    if corpus.documents.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let state = ModelState::init(corpus, config, options.seed)?;
    train_state(state, options)
}
