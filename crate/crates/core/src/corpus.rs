//! Corpus organization: documents made of blobs, blobs made of factors,
//! factors made of items.
//!
//! Text formats
//! ------------
//! Schema files contain one declaration per line:
//!
//! ```text
//! factor 0 discrete
//! factor 1 continuous beta
//! supervised true
//! ```
//!
//! Corpus files contain one document per line. An optional `y=<float>`
//! prefix followed by a TAB carries the supervised signal. Blobs are
//! separated by ` | `, factors inside a blob by ` ; `, and a factor is
//! written `<factor_id>:` followed by space separated items:
//!
//! ```text
//! y=1.5	0:the cat sat ; 1:0.25 | 0:on the mat ; 1:0.5
//! ```
//!
//! The characters `|` and `;` are reserved as delimiters and whitespace
//! separates items, so tokens never contain them. Lines starting with `#`
//! are comments.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Beta items are clamped into `[BETA_CLAMP, 1 - BETA_CLAMP]`.
pub const BETA_CLAMP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("schema line {line}: malformed declaration `{text}`")]
    MalformedSchemaLine { line: usize, text: String },
    #[error("schema line {line}: factor id {id} declared twice")]
    DuplicateFactorId { line: usize, id: usize },
    #[error("schema line {line}: unknown factor kind `{kind}`")]
    UnknownFactorKind { line: usize, kind: String },
    #[error("schema declares no discrete factor")]
    NoDiscreteFactor,
    #[error("schema factor ids are not dense: missing id {missing}")]
    SparseFactorIds { missing: usize },
    #[error("corpus line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("corpus line {line}: unknown factor id {id}")]
    UnknownFactorId { line: usize, id: usize },
    #[error("corpus line {line}: continuous item `{item}` is not a finite number")]
    NonNumericContinuousItem { line: usize, item: String },
    #[error("corpus line {line}: beta item {value} lies outside [0, 1]")]
    BetaItemOutOfRange { line: usize, value: f64 },
    #[error("corpus line {line}: supervised signal missing")]
    MissingSupervisedSignal { line: usize },
    #[error("corpus line {line}: supervised signal given but schema is unsupervised")]
    UnexpectedSupervisedSignal { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Discrete,
    Gaussian,
    Beta,
}

impl FactorKind {
    pub fn is_discrete(self) -> bool {
        matches!(self, FactorKind::Discrete)
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorKind::Discrete => f.write_str("discrete"),
            FactorKind::Gaussian => f.write_str("continuous gaussian"),
            FactorKind::Beta => f.write_str("continuous beta"),
        }
    }
}

/// Position of a factor among the factors of its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSlot {
    Discrete(usize),
    Continuous(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SchemaRepr {
    factors: Vec<FactorKind>,
    supervised: bool,
}

/// Factor layout shared by every blob of a corpus. Factor ids are the
/// indices into `kinds`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct Schema {
    kinds: Vec<FactorKind>,
    supervised: bool,
    slots: Vec<FactorSlot>,
    discrete_ids: Vec<usize>,
    continuous_ids: Vec<usize>,
}

impl TryFrom<SchemaRepr> for Schema {
    type Error = CorpusError;
    fn try_from(repr: SchemaRepr) -> Result<Self, Self::Error> {
        Schema::new(repr.factors, repr.supervised)
    }
}

impl From<Schema> for SchemaRepr {
    fn from(schema: Schema) -> Self {
        SchemaRepr { factors: schema.kinds, supervised: schema.supervised }
    }
}

impl Schema {
    pub fn new(kinds: Vec<FactorKind>, supervised: bool) -> Result<Self, CorpusError> {
        let mut slots = Vec::with_capacity(kinds.len());
        let mut discrete_ids = Vec::new();
        let mut continuous_ids = Vec::new();
        for (id, kind) in kinds.iter().enumerate() {
            if kind.is_discrete() {
                slots.push(FactorSlot::Discrete(discrete_ids.len()));
                discrete_ids.push(id);
            } else {
                slots.push(FactorSlot::Continuous(continuous_ids.len()));
                continuous_ids.push(id);
            }
        }
        if discrete_ids.is_empty() {
            return Err(CorpusError::NoDiscreteFactor);
        }
        Ok(Schema { kinds, supervised, slots, discrete_ids, continuous_ids })
    }

    /// Single discrete factor, unsupervised: the LDA / SentenceLDA layout.
    pub fn discrete_only() -> Self {
        Schema::new(vec![FactorKind::Discrete], false).expect("one discrete factor")
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut declared: Vec<Option<FactorKind>> = Vec::new();
        let mut supervised = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            let malformed = || CorpusError::MalformedSchemaLine { line: line_no, text: line.to_string() };
            match words.as_slice() {
                ["supervised", flag] => {
                    supervised = match *flag {
                        "true" => true,
                        "false" => false,
                        _ => return Err(malformed()),
                    };
                }
                ["factor", id, kind @ ..] => {
                    let id: usize = id.parse().map_err(|_| malformed())?;
                    let kind = match kind {
                        ["discrete"] => FactorKind::Discrete,
                        ["continuous", "gaussian"] => FactorKind::Gaussian,
                        ["continuous", "beta"] => FactorKind::Beta,
                        [] => return Err(malformed()),
                        other => {
                            return Err(CorpusError::UnknownFactorKind {
                                line: line_no,
                                kind: other.join(" "),
                            })
                        }
                    };
                    if declared.len() <= id {
                        declared.resize(id + 1, None);
                    }
                    if declared[id].is_some() {
                        return Err(CorpusError::DuplicateFactorId { line: line_no, id });
                    }
                    declared[id] = Some(kind);
                }
                _ => return Err(malformed()),
            }
        }
        let mut kinds = Vec::with_capacity(declared.len());
        for (id, kind) in declared.into_iter().enumerate() {
            kinds.push(kind.ok_or(CorpusError::SparseFactorIds { missing: id })?);
        }
        Schema::new(kinds, supervised)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, kind) in self.kinds.iter().enumerate() {
            out.push_str(&format!("factor {id} {kind}\n"));
        }
        if self.supervised {
            out.push_str("supervised true\n");
        }
        out
    }

    pub fn num_factors(&self) -> usize {
        self.kinds.len()
    }

    /// Number of discrete factors (M).
    pub fn num_discrete(&self) -> usize {
        self.discrete_ids.len()
    }

    /// Number of continuous factors (N).
    pub fn num_continuous(&self) -> usize {
        self.continuous_ids.len()
    }

    pub fn supervised(&self) -> bool {
        self.supervised
    }

    pub fn kind(&self, factor_id: usize) -> Option<FactorKind> {
        self.kinds.get(factor_id).copied()
    }

    pub fn slot(&self, factor_id: usize) -> Option<FactorSlot> {
        self.slots.get(factor_id).copied()
    }

    pub fn discrete_factor_id(&self, ordinal: usize) -> usize {
        self.discrete_ids[ordinal]
    }

    pub fn continuous_factor_id(&self, ordinal: usize) -> usize {
        self.continuous_ids[ordinal]
    }

    pub fn continuous_kind(&self, ordinal: usize) -> FactorKind {
        self.kinds[self.continuous_ids[ordinal]]
    }
}

/// Token to id mapping of one discrete factor, in first-appearance order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { tokens, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(vocab: Vocabulary) -> Self {
        vocab.tokens
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }
}

/// A continuous item with the logs a Beta density needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousItem {
    pub value: f64,
    pub ln_value: f64,
    pub ln_one_minus: f64,
}

impl ContinuousItem {
    pub fn new(value: f64) -> Self {
        ContinuousItem { value, ln_value: value.ln(), ln_one_minus: (-value).ln_1p() }
    }
}

/// Interned observed values of one continuous factor. Blobs refer to
/// values by id so per-value proposal tables can be indexed directly.
#[derive(Debug, Clone, Default)]
pub struct ContinuousDomain {
    items: Vec<ContinuousItem>,
    index: HashMap<u64, u32>,
}

impl PartialEq for ContinuousDomain {
    fn eq(&self, other: &Self) -> bool {
        self.items.len() == other.items.len()
            && self.items.iter().zip(&other.items).all(|(a, b)| a.value.to_bits() == b.value.to_bits())
    }
}

impl ContinuousDomain {
    pub fn intern(&mut self, value: f64) -> u32 {
        let key = value.to_bits();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = self.items.len() as u32;
        self.items.push(ContinuousItem::new(value));
        self.index.insert(key, id);
        id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: u32) -> &ContinuousItem {
        &self.items[id as usize]
    }

    pub fn value(&self, id: u32) -> f64 {
        self.items[id as usize].value
    }

    pub fn items(&self) -> &[ContinuousItem] {
        &self.items
    }
}

/// Smallest unit sharing one topic. Items are grouped by factor ordinal:
/// `discrete[i]` holds token ids of the i-th discrete factor and
/// `continuous[j]` holds value ids of the j-th continuous factor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Blob {
    pub discrete: Vec<Vec<u32>>,
    pub continuous: Vec<Vec<u32>>,
}

impl Blob {
    pub fn empty(schema: &Schema) -> Self {
        Blob {
            discrete: vec![Vec::new(); schema.num_discrete()],
            continuous: vec![Vec::new(); schema.num_continuous()],
        }
    }

    /// Blob with a single discrete factor: the LDA / SentenceLDA shape.
    pub fn from_tokens(tokens: Vec<u32>) -> Self {
        Blob { discrete: vec![tokens], continuous: Vec::new() }
    }

    pub fn num_items(&self) -> usize {
        self.discrete.iter().map(Vec::len).sum::<usize>() + self.continuous.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.num_items() == 0
    }

    /// Occurrence count N_bu of `token` in discrete factor `ordinal`.
    pub fn multiplicity(&self, ordinal: usize, token: u32) -> usize {
        self.discrete[ordinal].iter().filter(|&&u| u == token).count()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub blobs: Vec<Blob>,
    pub signal: Option<f64>,
}

impl Document {
    pub fn num_items(&self) -> usize {
        self.blobs.iter().map(Blob::num_items).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub schema: Schema,
    pub vocabs: Vec<Vocabulary>,
    pub domains: Vec<ContinuousDomain>,
    pub documents: Vec<Document>,
}

/// Documents parsed against a frozen vocabulary.
#[derive(Debug, Clone)]
pub struct HeldOut {
    pub corpus: Corpus,
    /// Per document, how many tokens were dropped as unseen.
    pub dropped: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SignalPolicy {
    Strict,
    Optional,
}

struct LineParser<'a> {
    schema: &'a Schema,
    vocabs: Vec<Vocabulary>,
    frozen: bool,
    domains: Vec<ContinuousDomain>,
    signal: SignalPolicy,
}

impl LineParser<'_> {
    fn parse_line(&mut self, line_no: usize, line: &str) -> Result<(Document, usize), CorpusError> {
        let malformed = |reason: &str| CorpusError::MalformedLine { line: line_no, reason: reason.to_string() };
        let (signal, body) = match line.strip_prefix("y=") {
            Some(rest) => {
                let (value, body) = rest.split_once('\t').ok_or_else(|| malformed("`y=` prefix must end with a TAB"))?;
                let y: f64 = value.trim().parse().map_err(|_| malformed("supervised signal is not a number"))?;
                if !y.is_finite() {
                    return Err(malformed("supervised signal is not finite"));
                }
                (Some(y), body)
            }
            None => (None, line),
        };
        if self.signal == SignalPolicy::Strict {
            match (signal.is_some(), self.schema.supervised()) {
                (false, true) => return Err(CorpusError::MissingSupervisedSignal { line: line_no }),
                (true, false) => return Err(CorpusError::UnexpectedSupervisedSignal { line: line_no }),
                _ => {}
            }
        }

        let mut dropped = 0;
        let mut blobs = Vec::new();
        if !body.trim().is_empty() {
            for blob_text in body.split('|') {
                let mut blob = Blob::empty(self.schema);
                let mut seen = vec![false; self.schema.num_factors()];
                let mut raw_items = 0;
                for factor_text in blob_text.split(';') {
                    let factor_text = factor_text.trim();
                    if factor_text.is_empty() {
                        return Err(malformed("empty factor"));
                    }
                    let (id_text, items) = factor_text.split_once(':').ok_or_else(|| malformed("factor lacks `<id>:` prefix"))?;
                    let id: usize = id_text.trim().parse().map_err(|_| malformed("factor id is not an integer"))?;
                    let slot = self.schema.slot(id).ok_or(CorpusError::UnknownFactorId { line: line_no, id })?;
                    if std::mem::replace(&mut seen[id], true) {
                        return Err(malformed("factor repeated within a blob"));
                    }
                    match slot {
                        FactorSlot::Discrete(i) => {
                            for token in items.split_whitespace() {
                                raw_items += 1;
                                let id = if self.frozen { self.vocabs[i].id(token) } else { Some(self.vocabs[i].intern(token)) };
                                match id {
                                    Some(id) => blob.discrete[i].push(id),
                                    None => dropped += 1,
                                }
                            }
                        }
                        FactorSlot::Continuous(j) => {
                            let kind = self.schema.continuous_kind(j);
                            for item in items.split_whitespace() {
                                raw_items += 1;
                                let mut value: f64 = item.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                                    CorpusError::NonNumericContinuousItem { line: line_no, item: item.to_string() }
                                })?;
                                if kind == FactorKind::Beta {
                                    if !(0.0..=1.0).contains(&value) {
                                        return Err(CorpusError::BetaItemOutOfRange { line: line_no, value });
                                    }
                                    value = value.clamp(BETA_CLAMP, 1.0 - BETA_CLAMP);
                                }
                                let vid = self.domains[j].intern(value);
                                blob.continuous[j].push(vid);
                            }
                        }
                    }
                }
                if raw_items == 0 {
                    return Err(malformed("blob has no items"));
                }
                if !blob.is_empty() {
                    blobs.push(blob);
                }
            }
        }
        Ok((Document { blobs, signal }, dropped))
    }
}

impl Corpus {
    pub fn new(schema: Schema) -> Self {
        Corpus {
            vocabs: vec![Vocabulary::default(); schema.num_discrete()],
            domains: vec![ContinuousDomain::default(); schema.num_continuous()],
            schema,
            documents: Vec::new(),
        }
    }

    /// Parses a training corpus. Blank and `#` lines are skipped.
    pub fn parse(text: &str, schema: &Schema) -> Result<Self, CorpusError> {
        let mut parser = LineParser {
            schema,
            vocabs: vec![Vocabulary::default(); schema.num_discrete()],
            frozen: false,
            domains: vec![ContinuousDomain::default(); schema.num_continuous()],
            signal: SignalPolicy::Strict,
        };
        let mut documents = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (doc, _) = parser.parse_line(idx + 1, line)?;
            if doc.blobs.is_empty() {
                return Err(CorpusError::MalformedLine { line: idx + 1, reason: "document has no blobs".into() });
            }
            documents.push(doc);
        }
        Ok(Corpus { schema: schema.clone(), vocabs: parser.vocabs, domains: parser.domains, documents })
    }

    /// Parses documents against a frozen vocabulary, one document per
    /// non-comment line. Unseen tokens are dropped and counted, empty lines
    /// become empty documents and supervised signals are optional.
    pub fn parse_heldout(text: &str, schema: &Schema, vocabs: &[Vocabulary]) -> Result<HeldOut, CorpusError> {
        let mut parser = LineParser {
            schema,
            vocabs: vocabs.to_vec(),
            frozen: true,
            domains: vec![ContinuousDomain::default(); schema.num_continuous()],
            signal: SignalPolicy::Optional,
        };
        let mut documents = Vec::new();
        let mut dropped = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.starts_with('#') {
                continue;
            }
            let (doc, lost) = parser.parse_line(idx + 1, line)?;
            documents.push(doc);
            dropped.push(lost);
        }
        Ok(HeldOut {
            corpus: Corpus { schema: schema.clone(), vocabs: parser.vocabs, domains: parser.domains, documents },
            dropped,
        })
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn num_blobs(&self) -> usize {
        self.documents.iter().map(|d| d.blobs.len()).sum()
    }

    /// Vocabulary size U_i of discrete factor `ordinal`.
    pub fn vocab_size(&self, ordinal: usize) -> usize {
        self.vocabs[ordinal].len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Serializes back into the corpus line format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for doc in &self.documents {
            out.push_str(&self.document_line(doc));
            out.push('\n');
        }
        out
    }

    pub fn document_line(&self, doc: &Document) -> String {
        let mut line = String::new();
        if let Some(y) = doc.signal {
            line.push_str(&format!("y={y}\t"));
        }
        let blobs: Vec<String> = doc.blobs.iter().map(|blob| self.blob_text(blob)).collect();
        line.push_str(&blobs.join(" | "));
        line
    }

    fn blob_text(&self, blob: &Blob) -> String {
        let mut factors: Vec<(usize, String)> = Vec::new();
        for (i, tokens) in blob.discrete.iter().enumerate() {
            if tokens.is_empty() {
                continue;
            }
            let words: Vec<&str> = tokens.iter().map(|&u| self.vocabs[i].token(u).unwrap_or("")).collect();
            factors.push((self.schema.discrete_factor_id(i), words.join(" ")));
        }
        for (j, values) in blob.continuous.iter().enumerate() {
            if values.is_empty() {
                continue;
            }
            let items: Vec<String> = values.iter().map(|&v| self.domains[j].value(v).to_string()).collect();
            factors.push((self.schema.continuous_factor_id(j), items.join(" ")));
        }
        factors.sort_by_key(|(id, _)| *id);
        factors.iter().map(|(id, items)| format!("{id}:{items}")).collect::<Vec<_>>().join(" ; ")
    }

    /// Splits documents round-robin into `parts` shards and returns the
    /// document ids of each shard.
    pub fn round_robin(&self, parts: usize) -> Vec<Vec<usize>> {
        let parts = parts.max(1);
        let mut shards = vec![Vec::new(); parts];
        for d in 0..self.documents.len() {
            shards[d % parts].push(d);
        }
        shards
    }

    /// Builds a sub-corpus over `doc_ids` whose discrete vocabularies are
    /// re-indexed to the tokens the shard actually uses. Returns the
    /// sub-corpus and, per discrete factor, the local-to-global token map.
    pub fn shard(&self, doc_ids: &[usize]) -> (Corpus, Vec<Vec<u32>>) {
        let m = self.schema.num_discrete();
        let mut remap: Vec<HashMap<u32, u32>> = vec![HashMap::new(); m];
        let mut local_to_global: Vec<Vec<u32>> = vec![Vec::new(); m];
        let mut documents = Vec::with_capacity(doc_ids.len());
        for &d in doc_ids {
            let doc = &self.documents[d];
            let blobs = doc
                .blobs
                .iter()
                .map(|blob| Blob {
                    discrete: blob
                        .discrete
                        .iter()
                        .enumerate()
                        .map(|(i, tokens)| {
                            tokens
                                .iter()
                                .map(|&u| {
                                    *remap[i].entry(u).or_insert_with(|| {
                                        local_to_global[i].push(u);
                                        (local_to_global[i].len() - 1) as u32
                                    })
                                })
                                .collect()
                        })
                        .collect(),
                    continuous: blob.continuous.clone(),
                })
                .collect();
            documents.push(Document { blobs, signal: doc.signal });
        }
        let vocabs = local_to_global
            .iter()
            .enumerate()
            .map(|(i, ids)| Vocabulary::from(ids.iter().map(|&u| self.vocabs[i].tokens[u as usize].clone()).collect::<Vec<_>>()))
            .collect();
        (Corpus { schema: self.schema.clone(), vocabs, domains: self.domains.clone(), documents }, local_to_global)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tot_schema() -> Schema {
        Schema::parse("factor 0 discrete\nfactor 1 continuous beta").unwrap()
    }

    #[test]
    fn minimal_schema() {
        let s = Schema::parse("factor 0 discrete").unwrap();
        assert_eq!((s.num_discrete(), s.num_continuous()), (1, 0));
        assert!(!s.supervised());
    }

    #[test]
    fn tot_schema_counts() {
        let s = tot_schema();
        assert_eq!((s.num_discrete(), s.num_continuous()), (1, 1));
        assert_eq!(s.slot(1), Some(FactorSlot::Continuous(0)));
        assert_eq!(s.continuous_kind(0), FactorKind::Beta);
    }

    #[test]
    fn schema_errors() {
        assert_eq!(
            Schema::parse("factor 0 discrete\nfactor 0 discrete"),
            Err(CorpusError::DuplicateFactorId { line: 2, id: 0 })
        );
        assert!(matches!(Schema::parse("factor 0 poisson"), Err(CorpusError::UnknownFactorKind { .. })));
        assert!(matches!(Schema::parse("factor 0 continuous beta"), Err(CorpusError::NoDiscreteFactor)));
        assert!(matches!(Schema::parse("factor 1 discrete"), Err(CorpusError::SparseFactorIds { missing: 0 })));
        assert!(matches!(Schema::parse("topic 0 discrete"), Err(CorpusError::MalformedSchemaLine { .. })));
    }

    #[test]
    fn schema_supervised_and_comments() {
        let s = Schema::parse("# sLDA\nfactor 0 discrete\n\nsupervised true\n").unwrap();
        assert!(s.supervised());
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn lda_line() {
        let c = Corpus::parse("0:apple | 0:banana | 0:apple", &Schema::discrete_only()).unwrap();
        assert_eq!(c.num_documents(), 1);
        let doc = &c.documents[0];
        assert_eq!(doc.blobs.len(), 3);
        assert!(doc.blobs.iter().all(|b| b.discrete[0].len() == 1));
        assert_eq!(c.vocabs[0].id("apple"), Some(0));
        assert_eq!(c.vocabs[0].id("banana"), Some(1));
        assert_eq!(doc.blobs[2].discrete[0], vec![0]);
    }

    #[test]
    fn sentence_lda_line() {
        let c = Corpus::parse("0:w1 w2 | 0:w3", &Schema::discrete_only()).unwrap();
        let sizes: Vec<usize> = c.documents[0].blobs.iter().map(Blob::num_items).collect();
        assert_eq!(sizes, vec![2, 1]);
    }

    #[test]
    fn supervised_line() {
        let schema = Schema::parse("factor 0 discrete\nsupervised true").unwrap();
        let c = Corpus::parse("y=1.0\t0:w1 | 0:w2", &schema).unwrap();
        assert_eq!(c.documents[0].signal, Some(1.0));
        assert_eq!(
            Corpus::parse("0:w1 | 0:w2", &schema),
            Err(CorpusError::MissingSupervisedSignal { line: 1 })
        );
        assert_eq!(
            Corpus::parse("y=2\t0:w1", &Schema::discrete_only()),
            Err(CorpusError::UnexpectedSupervisedSignal { line: 1 })
        );
    }

    #[test]
    fn corpus_errors() {
        let schema = tot_schema();
        assert!(matches!(Corpus::parse("3:a", &schema), Err(CorpusError::UnknownFactorId { id: 3, .. })));
        assert!(matches!(Corpus::parse("0:a ; 1:soon", &schema), Err(CorpusError::NonNumericContinuousItem { .. })));
        assert!(matches!(Corpus::parse("0:a ; 1:1.5", &schema), Err(CorpusError::BetaItemOutOfRange { .. })));
        assert!(matches!(Corpus::parse("a b c", &schema), Err(CorpusError::MalformedLine { line: 1, .. })));
        assert!(matches!(Corpus::parse("0:a |  | 0:b", &schema), Err(CorpusError::MalformedLine { .. })));
        assert!(matches!(Corpus::parse("0:a ; 0:b", &schema), Err(CorpusError::MalformedLine { .. })));
    }

    #[test]
    fn beta_items_are_clamped() {
        let c = Corpus::parse("0:a ; 1:0 | 0:b ; 1:1 0.5", &tot_schema()).unwrap();
        let values: Vec<f64> = c.domains[0].items().iter().map(|i| i.value).collect();
        assert_eq!(values, vec![BETA_CLAMP, 1.0 - BETA_CLAMP, 0.5]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let c = Corpus::parse("# header\n\n0:a b\n# mid\n0:c\n", &Schema::discrete_only()).unwrap();
        assert_eq!(c.num_documents(), 2);
    }

    #[test]
    fn heldout_drops_unseen_tokens() {
        let schema = Schema::discrete_only();
        let train = Corpus::parse("0:a b | 0:c", &schema).unwrap();
        let held = Corpus::parse_heldout("0:a zz | 0:qq\n\n0:c", &schema, &train.vocabs).unwrap();
        assert_eq!(held.dropped, vec![2, 0, 0]);
        assert_eq!(held.corpus.documents[0].blobs.len(), 1);
        assert!(held.corpus.documents[1].blobs.is_empty());
        assert_eq!(held.corpus.documents[2].blobs[0].discrete[0], vec![2]);
    }

    #[test]
    fn shard_remaps_vocabulary() {
        let c = Corpus::parse("0:a b\n0:c d\n0:b e", &Schema::discrete_only()).unwrap();
        let shards = c.round_robin(2);
        assert_eq!(shards, vec![vec![0, 2], vec![1]]);
        let (sub, map) = c.shard(&shards[0]);
        assert_eq!(map[0], vec![0, 1, 4]);
        assert_eq!(sub.vocabs[0].tokens(), &["a", "b", "e"]);
        assert_eq!(sub.documents[1].blobs[0].discrete[0], vec![1, 2]);
    }

    #[test]
    fn item_counts_add_up() {
        let c = Corpus::parse("0:a b ; 1:0.2 | 0:c ; 1:0.4 0.3", &tot_schema()).unwrap();
        let doc = &c.documents[0];
        assert_eq!(doc.num_items(), 6);
        assert_eq!(doc.blobs.iter().map(Blob::num_items).sum::<usize>(), doc.num_items());
    }
}
