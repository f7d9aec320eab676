//! Inferable state: topic assignments, count matrices, continuous topic
//! densities and the supervised regression.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alias::AliasTable;
use crate::corpus::{ContinuousItem, Corpus, FactorKind, FactorSlot, Schema, Vocabulary};
use crate::math::{ln_beta, normal_ln_pdf};

pub const MODEL_FORMAT: &str = "familia-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("corpus does not match the model: {0}")]
    SchemaMismatch(String),
    #[error("unknown document {0}")]
    UnknownDocument(usize),
    #[error("document {doc} has no blob {blob}")]
    UnknownBlob { doc: usize, blob: usize },
    #[error("topic {topic} out of range for {num_topics} topics")]
    TopicOutOfRange { topic: usize, num_topics: usize },
    #[error("factor {0} is not a discrete factor")]
    NotADiscreteFactor(usize),
    #[error("blob ({doc}, {blob}) counts are inconsistent with the requested operation")]
    InconsistentCounts { doc: usize, blob: usize },
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_topics: usize,
    /// Per-topic Dirichlet prior on document-topic proportions.
    pub alpha: Vec<f64>,
    /// Symmetric Dirichlet prior of each discrete factor, by ordinal.
    pub beta: Vec<f64>,
    pub schema: Schema,
}

impl ModelConfig {
    /// Symmetric defaults: alpha = 50 / K, beta = 0.01.
    pub fn new(schema: Schema, num_topics: usize) -> Self {
        let alpha = if num_topics > 0 { 50.0 / num_topics as f64 } else { 1.0 };
        ModelConfig {
            num_topics,
            alpha: vec![alpha; num_topics],
            beta: vec![0.01; schema.num_discrete()],
            schema,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = vec![alpha; self.num_topics];
        self
    }

    pub fn with_alpha_vector(mut self, alpha: Vec<f64>) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = vec![beta; self.schema.num_discrete()];
        self
    }

    pub fn supervised(&self) -> bool {
        self.schema.supervised()
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_topics == 0 {
            return Err(ModelError::Config("topic count must be at least 1".into()));
        }
        if self.alpha.len() != self.num_topics {
            return Err(ModelError::Config(format!(
                "alpha has {} entries for {} topics",
                self.alpha.len(),
                self.num_topics
            )));
        }
        if self.beta.len() != self.schema.num_discrete() {
            return Err(ModelError::Config(format!(
                "beta has {} entries for {} discrete factors",
                self.beta.len(),
                self.schema.num_discrete()
            )));
        }
        if !self.alpha.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err(ModelError::Config("alpha entries must be positive".into()));
        }
        if !self.beta.iter().all(|&b| b > 0.0 && b.is_finite()) {
            return Err(ModelError::Config("beta entries must be positive".into()));
        }
        Ok(())
    }
}

/// Item-topic counts n_ku of one discrete factor, stored row-major by item.
///
/// `vocab_size` is the U used by the Dirichlet normalizer. It equals the
/// row count except in shard views, which hold only the rows a worker
/// pulled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTopicCounts {
    num_topics: usize,
    vocab_size: usize,
    counts: Vec<u32>,
    totals: Vec<u64>,
}

impl WordTopicCounts {
    pub fn zeros(rows: usize, num_topics: usize) -> Self {
        WordTopicCounts { num_topics, vocab_size: rows, counts: vec![0; rows * num_topics], totals: vec![0; num_topics] }
    }

    pub(crate) fn from_parts(num_topics: usize, vocab_size: usize, counts: Vec<u32>, totals: Vec<u64>) -> Self {
        WordTopicCounts { num_topics, vocab_size, counts, totals }
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn num_rows(&self) -> usize {
        self.counts.len() / self.num_topics.max(1)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    #[inline]
    pub fn row(&self, item: u32) -> &[u32] {
        let k = self.num_topics;
        &self.counts[item as usize * k..(item as usize + 1) * k]
    }

    #[inline]
    pub fn get(&self, item: u32, topic: usize) -> u32 {
        self.counts[item as usize * self.num_topics + topic]
    }

    #[inline]
    pub fn total(&self, topic: usize) -> u64 {
        self.totals[topic]
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub(crate) fn raw(&self) -> &[u32] {
        &self.counts
    }

    #[inline]
    pub(crate) fn increment(&mut self, item: u32, topic: usize) {
        self.counts[item as usize * self.num_topics + topic] += 1;
        self.totals[topic] += 1;
    }

    #[inline]
    pub(crate) fn decrement(&mut self, item: u32, topic: usize) {
        self.counts[item as usize * self.num_topics + topic] -= 1;
        self.totals[topic] -= 1;
    }

    /// Same rows, normalized against a vocabulary of `vocab_size` items.
    pub(crate) fn with_vocab_size(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    /// Adds a signed change to one cell; `None` if it would leave the
    /// cell negative or overflow it.
    pub(crate) fn add(&mut self, item: u32, topic: usize, change: i64) -> Option<()> {
        let cell = self.counts.get_mut(item as usize * self.num_topics + topic)?;
        *cell = u32::try_from(*cell as i64 + change).ok()?;
        Some(())
    }

    pub(crate) fn add_total(&mut self, topic: usize, change: i64) -> Option<()> {
        let total = self.totals.get_mut(topic)?;
        *total = u64::try_from(*total as i64 + change).ok()?;
        Some(())
    }

    /// Posterior mean item distribution of `topic`.
    pub fn phi(&self, topic: usize, beta: f64) -> Vec<f64> {
        let denom = self.totals[topic] as f64 + self.vocab_size as f64 * beta;
        (0..self.num_rows() as u32).map(|u| (self.get(u, topic) as f64 + beta) / denom).collect()
    }

    /// Single entry of `phi`.
    pub fn phi_entry(&self, item: u32, topic: usize, beta: f64) -> f64 {
        (self.get(item, topic) as f64 + beta) / (self.totals[topic] as f64 + self.vocab_size as f64 * beta)
    }

    fn check(&self) -> Result<(), String> {
        if self.num_topics == 0 || self.counts.len() % self.num_topics != 0 || self.totals.len() != self.num_topics {
            return Err("count matrix shape".into());
        }
        let mut sums = vec![0u64; self.num_topics];
        for row in self.counts.chunks(self.num_topics) {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += c as u64;
            }
        }
        if sums != self.totals {
            return Err("count totals disagree with rows".into());
        }
        Ok(())
    }
}

/// Blob-topic counts m_dk, one dense row per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTopicCounts {
    num_topics: usize,
    counts: Vec<u32>,
}

impl DocTopicCounts {
    pub fn zeros(num_docs: usize, num_topics: usize) -> Self {
        DocTopicCounts { num_topics, counts: vec![0; num_docs * num_topics] }
    }

    pub fn num_docs(&self) -> usize {
        self.counts.len() / self.num_topics.max(1)
    }

    #[inline]
    pub fn row(&self, doc: usize) -> &[u32] {
        &self.counts[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    #[inline]
    pub(crate) fn increment(&mut self, doc: usize, topic: usize) {
        self.counts[doc * self.num_topics + topic] += 1;
    }

    #[inline]
    pub(crate) fn decrement(&mut self, doc: usize, topic: usize) {
        self.counts[doc * self.num_topics + topic] -= 1;
    }
}

/// Posterior mean topic proportions from one row of blob-topic counts.
pub fn theta_from_counts(row: &[u32], alpha: &[f64]) -> Vec<f64> {
    let denom: f64 = row.iter().zip(alpha).map(|(&m, &a)| m as f64 + a).sum();
    row.iter().zip(alpha).map(|(&m, &a)| (m as f64 + a) / denom).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "topics", rename_all = "snake_case")]
enum ContinuousRepr {
    Gaussian(Vec<GaussianParams>),
    Beta(Vec<BetaParams>),
}

/// Per-topic densities of one continuous factor, with cached normalizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ContinuousRepr", into = "ContinuousRepr")]
pub struct ContinuousTopicParams {
    repr: ContinuousRepr,
    log_norm: Vec<f64>,
}

impl From<ContinuousRepr> for ContinuousTopicParams {
    fn from(repr: ContinuousRepr) -> Self {
        let log_norm = match &repr {
            ContinuousRepr::Gaussian(ps) => ps.iter().map(|p| -0.5 * (2.0 * std::f64::consts::PI * p.variance).ln()).collect(),
            ContinuousRepr::Beta(ps) => ps.iter().map(|p| -ln_beta(p.a, p.b)).collect(),
        };
        ContinuousTopicParams { repr, log_norm }
    }
}

impl From<ContinuousTopicParams> for ContinuousRepr {
    fn from(p: ContinuousTopicParams) -> Self {
        p.repr
    }
}

impl ContinuousTopicParams {
    /// Initial densities: Gaussian(0.5, 1) or Beta(1, 1).
    pub fn initial(kind: FactorKind, num_topics: usize) -> Self {
        match kind {
            FactorKind::Gaussian => Self::gaussian(vec![GaussianParams { mean: 0.5, variance: 1.0 }; num_topics]),
            _ => Self::beta(vec![BetaParams { a: 1.0, b: 1.0 }; num_topics]),
        }
    }

    pub fn gaussian(params: Vec<GaussianParams>) -> Self {
        ContinuousRepr::Gaussian(params).into()
    }

    pub fn beta(params: Vec<BetaParams>) -> Self {
        ContinuousRepr::Beta(params).into()
    }

    pub fn kind(&self) -> FactorKind {
        match self.repr {
            ContinuousRepr::Gaussian(_) => FactorKind::Gaussian,
            ContinuousRepr::Beta(_) => FactorKind::Beta,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.log_norm.len()
    }

    pub fn gaussian_params(&self) -> Option<&[GaussianParams]> {
        match &self.repr {
            ContinuousRepr::Gaussian(p) => Some(p),
            ContinuousRepr::Beta(_) => None,
        }
    }

    pub fn beta_params(&self) -> Option<&[BetaParams]> {
        match &self.repr {
            ContinuousRepr::Beta(p) => Some(p),
            ContinuousRepr::Gaussian(_) => None,
        }
    }

    /// Mean of topic `k`'s density.
    pub fn mean(&self, k: usize) -> f64 {
        match &self.repr {
            ContinuousRepr::Gaussian(p) => p[k].mean,
            ContinuousRepr::Beta(p) => p[k].a / (p[k].a + p[k].b),
        }
    }

    #[inline]
    pub fn ln_density(&self, k: usize, item: &ContinuousItem) -> f64 {
        match &self.repr {
            ContinuousRepr::Gaussian(p) => {
                let d = item.value - p[k].mean;
                self.log_norm[k] - d * d / (2.0 * p[k].variance)
            }
            ContinuousRepr::Beta(p) => {
                self.log_norm[k] + (p[k].a - 1.0) * item.ln_value + (p[k].b - 1.0) * item.ln_one_minus
            }
        }
    }

    fn check(&self, num_topics: usize) -> Result<(), String> {
        let ok = match &self.repr {
            ContinuousRepr::Gaussian(p) => p.len() == num_topics && p.iter().all(|g| g.variance > 0.0 && g.mean.is_finite()),
            ContinuousRepr::Beta(p) => p.len() == num_topics && p.iter().all(|b| b.a > 0.0 && b.b > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err("continuous parameters invalid".into())
        }
    }
}

/// Gaussian response y_d ~ N(eta . zbar_d, sigma2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedParams {
    pub eta: Vec<f64>,
    pub sigma2: f64,
}

impl SupervisedParams {
    pub fn initial(num_topics: usize) -> Self {
        SupervisedParams { eta: vec![0.0; num_topics], sigma2: 1.0 }
    }

    #[inline]
    pub fn ln_density(&self, y: f64, mean: f64) -> f64 {
        normal_ln_pdf(y, mean, self.sigma2)
    }

    pub fn predict(&self, zbar: &[f64]) -> f64 {
        self.eta.iter().zip(zbar).map(|(e, z)| e * z).sum()
    }
}

/// Global model parameters shared by every document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub word_topic: Vec<WordTopicCounts>,
    pub continuous: Vec<ContinuousTopicParams>,
    pub supervised: SupervisedParams,
}

impl Parameters {
    pub fn initial(config: &ModelConfig, vocab_sizes: &[usize]) -> Self {
        let k = config.num_topics;
        let schema = &config.schema;
        Parameters {
            word_topic: vocab_sizes.iter().map(|&u| WordTopicCounts::zeros(u, k)).collect(),
            continuous: (0..schema.num_continuous())
                .map(|j| ContinuousTopicParams::initial(schema.continuous_kind(j), k))
                .collect(),
            supervised: SupervisedParams::initial(k),
        }
    }
}

/// Assignments and blob-topic counts, present in checkpoint files only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub assignments: Vec<Vec<u32>>,
    pub doc_topic: DocTopicCounts,
}

/// A trained model as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub config: ModelConfig,
    pub vocabs: Vec<Vocabulary>,
    pub params: Parameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<Checkpoint>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
}

#[derive(Serialize)]
struct ModelFileOut<'a> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    model: &'a TopicModel,
}

#[derive(Deserialize)]
struct ModelFileIn {
    #[serde(flatten)]
    model: TopicModel,
}

impl TopicModel {
    pub fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    /// Topic-item distribution of the discrete factor with id `factor_id`.
    pub fn phi(&self, factor_id: usize, topic: usize) -> Result<Vec<f64>, ModelError> {
        let i = discrete_ordinal(&self.config.schema, factor_id)?;
        check_topic(topic, self.config.num_topics)?;
        Ok(self.params.word_topic[i].phi(topic, self.config.beta[i]))
    }

    /// Topic proportions of a training document; needs a checkpoint.
    pub fn theta(&self, doc: usize) -> Result<Vec<f64>, ModelError> {
        let cp = self.checkpoint.as_ref().ok_or(ModelError::UnknownDocument(doc))?;
        if doc >= cp.doc_topic.num_docs() {
            return Err(ModelError::UnknownDocument(doc));
        }
        Ok(theta_from_counts(cp.doc_topic.row(doc), &self.config.alpha))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFileOut { format: MODEL_FORMAT, version: MODEL_VERSION, model: self })
            .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let header: ModelHeader = serde_json::from_str(text).map_err(|e| ModelError::CorruptFile(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(ModelError::CorruptFile(format!("unexpected format tag `{}`", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(ModelError::VersionMismatch { found: header.version, expected: MODEL_VERSION });
        }
        let file: ModelFileIn = serde_json::from_str(text).map_err(|e| ModelError::CorruptFile(e.to_string()))?;
        file.model.check().map_err(ModelError::CorruptFile)?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), String> {
        self.config.validate().map_err(|e| e.to_string())?;
        let k = self.config.num_topics;
        let schema = &self.config.schema;
        if self.vocabs.len() != schema.num_discrete() || self.params.word_topic.len() != schema.num_discrete() {
            return Err("discrete factor count".into());
        }
        for (vocab, counts) in self.vocabs.iter().zip(&self.params.word_topic) {
            if counts.num_topics() != k || counts.num_rows() != vocab.len() || counts.vocab_size() != vocab.len() {
                return Err("count matrix does not match vocabulary".into());
            }
            counts.check()?;
        }
        if self.params.continuous.len() != schema.num_continuous() {
            return Err("continuous factor count".into());
        }
        for (j, p) in self.params.continuous.iter().enumerate() {
            if p.kind() != schema.continuous_kind(j) {
                return Err("continuous factor kind".into());
            }
            p.check(k)?;
        }
        let sup = &self.params.supervised;
        if sup.eta.len() != k || !sup.eta.iter().all(|e| e.is_finite()) || !(sup.sigma2 >= 0.0) {
            return Err("supervised parameters".into());
        }
        if let Some(cp) = &self.checkpoint {
            if cp.assignments.len() != cp.doc_topic.num_docs() || cp.doc_topic.num_topics != k {
                return Err("checkpoint shape".into());
            }
            for (d, z) in cp.assignments.iter().enumerate() {
                let mut row = vec![0u32; k];
                for &t in z {
                    *row.get_mut(t as usize).ok_or("checkpoint topic out of range")? += 1;
                }
                if row != cp.doc_topic.row(d) {
                    return Err("checkpoint counts disagree with assignments".into());
                }
            }
        }
        Ok(())
    }
}

fn discrete_ordinal(schema: &Schema, factor_id: usize) -> Result<usize, ModelError> {
    match schema.slot(factor_id) {
        Some(FactorSlot::Discrete(i)) => Ok(i),
        _ => Err(ModelError::NotADiscreteFactor(factor_id)),
    }
}

fn check_topic(topic: usize, num_topics: usize) -> Result<(), ModelError> {
    if topic >= num_topics {
        return Err(ModelError::TopicOutOfRange { topic, num_topics });
    }
    Ok(())
}

/// Full sampler state over a corpus. Counts are kept consistent with the
/// assignments by every public mutator; between `detach_blob` and
/// `attach_blob` exactly one blob is missing from the counts.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub(crate) config: ModelConfig,
    pub(crate) corpus: Corpus,
    pub(crate) params: Parameters,
    pub(crate) assignments: Vec<Vec<u32>>,
    pub(crate) doc_topic: DocTopicCounts,
    pub(crate) detached: Option<(usize, usize)>,
    pub(crate) alpha_table: AliasTable,
}

impl ModelState {
    /// Random initial state: every blob gets an independent uniform topic.
    pub fn init(corpus: Corpus, config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = config.num_topics.max(1);
        let assignments: Vec<Vec<u32>> = corpus
            .documents
            .iter()
            .map(|doc| doc.blobs.iter().map(|_| rng.random_range(0..k) as u32).collect())
            .collect();
        Self::from_assignments(corpus, config, assignments)
    }

    /// Builds counts from explicit assignments, with initial continuous
    /// and supervised parameters.
    pub fn from_assignments(corpus: Corpus, config: ModelConfig, assignments: Vec<Vec<u32>>) -> Result<Self, ModelError> {
        config.validate()?;
        if corpus.schema != config.schema {
            return Err(ModelError::SchemaMismatch("corpus schema differs from config schema".into()));
        }
        let vocab_sizes: Vec<usize> = corpus.vocabs.iter().map(Vocabulary::len).collect();
        let params = Parameters::initial(&config, &vocab_sizes);
        Self::from_parts(corpus, config, params, assignments)
    }

    pub(crate) fn from_parts(
        corpus: Corpus,
        config: ModelConfig,
        mut params: Parameters,
        assignments: Vec<Vec<u32>>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let k = config.num_topics;
        if assignments.len() != corpus.documents.len() {
            return Err(ModelError::SchemaMismatch("assignment count differs from document count".into()));
        }
        if config.supervised() && corpus.documents.iter().any(|d| d.signal.is_none()) {
            return Err(ModelError::SchemaMismatch("supervised model needs a signal on every document".into()));
        }
        for (d, (doc, z)) in corpus.documents.iter().zip(&assignments).enumerate() {
            if z.len() != doc.blobs.len() {
                return Err(ModelError::SchemaMismatch(format!("document {d} assignment length")));
            }
            if let Some(&t) = z.iter().find(|&&t| t as usize >= k) {
                return Err(ModelError::TopicOutOfRange { topic: t as usize, num_topics: k });
            }
        }
        let mut doc_topic = DocTopicCounts::zeros(corpus.documents.len(), k);
        for counts in params.word_topic.iter_mut() {
            counts.counts.iter_mut().for_each(|c| *c = 0);
            counts.totals.iter_mut().for_each(|c| *c = 0);
        }
        for (d, (doc, z)) in corpus.documents.iter().zip(&assignments).enumerate() {
            for (blob, &t) in doc.blobs.iter().zip(z) {
                doc_topic.increment(d, t as usize);
                for (i, tokens) in blob.discrete.iter().enumerate() {
                    for &u in tokens {
                        if u as usize >= params.word_topic[i].num_rows() {
                            return Err(ModelError::SchemaMismatch(format!("token id {u} outside vocabulary")));
                        }
                        params.word_topic[i].increment(u, t as usize);
                    }
                }
            }
        }
        let alpha_table = AliasTable::new(&config.alpha).map_err(|e| ModelError::Config(e.to_string()))?;
        Ok(ModelState { config, corpus, params, assignments, doc_topic, detached: None, alpha_table })
    }

    /// Rebuilds a state from a checkpoint over the corpus it was trained on.
    pub fn resume(corpus: Corpus, model: TopicModel) -> Result<Self, ModelError> {
        let cp = model.checkpoint.ok_or_else(|| ModelError::CorruptFile("model has no checkpoint".into()))?;
        if corpus.vocabs != model.vocabs {
            return Err(ModelError::SchemaMismatch("corpus vocabulary differs from the model".into()));
        }
        let state = Self::from_parts(corpus, model.config, model.params.clone(), cp.assignments)?;
        if state.params.word_topic != model.params.word_topic {
            return Err(ModelError::SchemaMismatch("checkpoint counts disagree with the corpus".into()));
        }
        Ok(state)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    pub fn num_documents(&self) -> usize {
        self.corpus.documents.len()
    }

    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.assignments
    }

    pub fn topic(&self, doc: usize, blob: usize) -> u32 {
        self.assignments[doc][blob]
    }

    pub fn doc_topic(&self) -> &DocTopicCounts {
        &self.doc_topic
    }

    pub fn word_topic(&self, ordinal: usize) -> &WordTopicCounts {
        &self.params.word_topic[ordinal]
    }

    pub fn continuous(&self, ordinal: usize) -> &ContinuousTopicParams {
        &self.params.continuous[ordinal]
    }

    pub fn supervised(&self) -> &SupervisedParams {
        &self.params.supervised
    }

    pub fn set_continuous(&mut self, ordinal: usize, params: ContinuousTopicParams) {
        assert_eq!(params.kind(), self.config.schema.continuous_kind(ordinal));
        assert_eq!(params.num_topics(), self.config.num_topics);
        self.params.continuous[ordinal] = params;
    }

    pub fn set_supervised(&mut self, params: SupervisedParams) {
        assert_eq!(params.eta.len(), self.config.num_topics);
        self.params.supervised = params;
    }

    pub fn detached(&self) -> Option<(usize, usize)> {
        self.detached
    }

    fn check_blob(&self, doc: usize, blob: usize) -> Result<(), ModelError> {
        let d = self.corpus.documents.get(doc).ok_or(ModelError::UnknownDocument(doc))?;
        if blob >= d.blobs.len() {
            return Err(ModelError::UnknownBlob { doc, blob });
        }
        Ok(())
    }

    /// Posterior mean topic proportions of document `doc`.
    pub fn theta(&self, doc: usize) -> Result<Vec<f64>, ModelError> {
        if doc >= self.num_documents() {
            return Err(ModelError::UnknownDocument(doc));
        }
        Ok(theta_from_counts(self.doc_topic.row(doc), &self.config.alpha))
    }

    /// Posterior mean item distribution of `topic` in discrete factor `factor_id`.
    pub fn phi(&self, factor_id: usize, topic: usize) -> Result<Vec<f64>, ModelError> {
        let i = discrete_ordinal(&self.config.schema, factor_id)?;
        check_topic(topic, self.config.num_topics)?;
        Ok(self.params.word_topic[i].phi(topic, self.config.beta[i]))
    }

    /// Per-document blob-topic frequencies, normalized by the blob count.
    pub fn zbar(&self, doc: usize) -> Vec<f64> {
        let blobs = self.corpus.documents[doc].blobs.len().max(1) as f64;
        self.doc_topic.row(doc).iter().map(|&m| m as f64 / blobs).collect()
    }

    /// Removes blob `(doc, blob)` from the counts, returning its topic.
    pub fn detach_blob(&mut self, doc: usize, blob: usize) -> Result<u32, ModelError> {
        self.check_blob(doc, blob)?;
        if self.detached.is_some() {
            return Err(ModelError::InconsistentCounts { doc, blob });
        }
        let topic = self.assignments[doc][blob];
        self.remove_counts(doc, blob, topic as usize);
        self.detached = Some((doc, blob));
        Ok(topic)
    }

    /// Re-inserts the detached blob under `topic`.
    pub fn attach_blob(&mut self, doc: usize, blob: usize, topic: u32) -> Result<(), ModelError> {
        check_topic(topic as usize, self.config.num_topics)?;
        if self.detached != Some((doc, blob)) {
            return Err(ModelError::InconsistentCounts { doc, blob });
        }
        self.add_counts(doc, blob, topic as usize);
        self.assignments[doc][blob] = topic;
        self.detached = None;
        Ok(())
    }

    /// Moves blob `(doc, blob)` to `new_topic`, updating every count.
    pub fn apply_assignment(&mut self, doc: usize, blob: usize, new_topic: u32) -> Result<(), ModelError> {
        self.check_blob(doc, blob)?;
        check_topic(new_topic as usize, self.config.num_topics)?;
        if self.detached.is_some() {
            return Err(ModelError::InconsistentCounts { doc, blob });
        }
        let old = self.assignments[doc][blob];
        if old != new_topic {
            self.remove_counts(doc, blob, old as usize);
            self.add_counts(doc, blob, new_topic as usize);
            self.assignments[doc][blob] = new_topic;
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn remove_counts(&mut self, doc: usize, blob: usize, topic: usize) {
        self.doc_topic.decrement(doc, topic);
        let b = &self.corpus.documents[doc].blobs[blob];
        for (i, tokens) in b.discrete.iter().enumerate() {
            for &u in tokens {
                self.params.word_topic[i].decrement(u, topic);
            }
        }
    }

    #[inline]
    pub(crate) fn add_counts(&mut self, doc: usize, blob: usize, topic: usize) {
        self.doc_topic.increment(doc, topic);
        let b = &self.corpus.documents[doc].blobs[blob];
        for (i, tokens) in b.discrete.iter().enumerate() {
            for &u in tokens {
                self.params.word_topic[i].increment(u, topic);
            }
        }
    }

    /// Recomputes counts from the assignments and compares them with the
    /// maintained ones.
    pub fn counts_consistent(&self) -> bool {
        if self.detached.is_some() {
            return false;
        }
        match Self::from_parts(self.corpus.clone(), self.config.clone(), self.params.clone(), self.assignments.clone()) {
            Ok(fresh) => fresh.doc_topic == self.doc_topic && fresh.params.word_topic == self.params.word_topic,
            Err(_) => false,
        }
    }

    /// Frozen model; `with_checkpoint` adds assignments and blob counts.
    pub fn to_model(&self, with_checkpoint: bool) -> TopicModel {
        TopicModel {
            config: self.config.clone(),
            vocabs: self.corpus.vocabs.clone(),
            params: self.params.clone(),
            checkpoint: with_checkpoint
                .then(|| Checkpoint { assignments: self.assignments.clone(), doc_topic: self.doc_topic.clone() }),
        }
    }

    pub fn into_parts(self) -> (Corpus, ModelConfig, Parameters, Vec<Vec<u32>>) {
        (self.corpus, self.config, self.params, self.assignments)
    }
}
