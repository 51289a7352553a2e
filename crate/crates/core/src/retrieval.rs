//! Case indexes (BM25, TF-IDF, external embeddings) and top-k retrieval,
//! including the coarse-then-rerank pipeline.
//!
//! Indexes are immutable once built and are `Sync`, so any number of threads
//! may query one concurrently. Rankings break score ties by ascending id.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CaseRepository;
use crate::similarity::{cosine, ProgramTokens, ScoreWeights, TokenInterner};

/// Lowercase alphanumeric tokens; everything else separates.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn tokenize_filtered(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let mut tokens = tokenize(text);
    if !stopwords.is_empty() {
        tokens.retain(|t| !stopwords.contains(t));
    }
    tokens
}

/// L2-normalized sparse vector, sorted by term id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector(Vec<(u32, f64)>);

impl SparseVector {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.0[i].1 * other.0[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// TF-IDF weighting with smoothed IDF `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, Default)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, u32>,
    idf: Vec<f64>,
    stopwords: HashSet<String>,
}

impl TfIdfModel {
    pub fn fit<'a>(documents: impl IntoIterator<Item = &'a str>) -> Self {
        Self::fit_with_stopwords(documents, HashSet::new())
    }

    pub fn fit_with_stopwords<'a>(documents: impl IntoIterator<Item = &'a str>, stopwords: HashSet<String>) -> Self {
        let mut vocabulary: HashMap<String, u32> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        let mut n = 0usize;
        for doc in documents {
            n += 1;
            let unique: HashSet<String> = tokenize_filtered(doc, &stopwords).into_iter().collect();
            for term in unique {
                let next = vocabulary.len() as u32;
                let id = *vocabulary.entry(term).or_insert(next);
                if id as usize == df.len() {
                    df.push(0);
                }
                df[id as usize] += 1;
            }
        }
        let idf = df.iter().map(|&d| ((1 + n) as f64 / (1 + d) as f64).ln() + 1.0).collect();
        TfIdfModel { vocabulary, idf, stopwords }
    }

    /// Normalized TF-IDF vector; out-of-vocabulary terms are dropped.
    pub fn vector(&self, text: &str) -> SparseVector {
        let mut counts: HashMap<u32, f64> = HashMap::new();
        for token in tokenize_filtered(text, &self.stopwords) {
            if let Some(&id) = self.vocabulary.get(&token) {
                *counts.entry(id).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(u32, f64)> = counts.into_iter().map(|(id, tf)| (id, tf * self.idf[id as usize])).collect();
        entries.sort_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            entries.iter_mut().for_each(|e| e.1 /= norm);
        }
        SparseVector(entries)
    }

    /// Cosine of two vectors from this model, clamped to `[0, 1]`.
    pub fn similarity(&self, a: &SparseVector, b: &SparseVector) -> f64 {
        a.dot(b).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    Bm25,
    Tfidf,
    Embedding,
}

impl fmt::Display for IndexMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexMode::Bm25 => "bm25",
            IndexMode::Tfidf => "tfidf",
            IndexMode::Embedding => "embedding",
        })
    }
}

impl std::str::FromStr for IndexMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bm25" => Ok(IndexMode::Bm25),
            "tfidf" | "tf-idf" => Ok(IndexMode::Tfidf),
            "embedding" | "embeddings" => Ok(IndexMode::Embedding),
            other => Err(format!("unknown index mode `{other}`; expected bm25, tfidf or embedding")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexParams {
    pub k1: f64,
    pub b: f64,
    pub stopwords: Vec<String>,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams { k1: 1.5, b: 0.75, stopwords: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty repository")]
    EmptyRepository,
    #[error("no embedding for case `{0}`")]
    MissingEmbeddings(String),
    #[error("embedding for `{id}` is unusable: {reason}")]
    InvalidEmbedding { id: String, reason: String },
    #[error("query does not match index mode {0}")]
    ModeMismatch(IndexMode),
    #[error("no rerank score for query `{query_id}`, case `{case_id}`")]
    MissingRerankScore { query_id: String, case_id: String },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone)]
struct Bm25Index {
    vocabulary: HashMap<String, u32>,
    /// Per term: (document, term frequency).
    postings: Vec<Vec<(u32, u32)>>,
    doc_lengths: Vec<u32>,
    average_length: f64,
    k1: f64,
    b: f64,
    stopwords: HashSet<String>,
}

impl Bm25Index {
    fn build(texts: &[&str], params: &IndexParams, stopwords: HashSet<String>) -> Self {
        let mut vocabulary: HashMap<String, u32> = HashMap::new();
        let mut postings: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut doc_lengths = Vec::with_capacity(texts.len());
        for (doc, text) in texts.iter().enumerate() {
            let tokens = tokenize_filtered(text, &stopwords);
            doc_lengths.push(tokens.len() as u32);
            let mut counts: HashMap<String, u32> = HashMap::new();
            for token in tokens {
                *counts.entry(token).or_default() += 1;
            }
            let mut counts: Vec<_> = counts.into_iter().collect();
            counts.sort();
            for (term, tf) in counts {
                let next = vocabulary.len() as u32;
                let id = *vocabulary.entry(term).or_insert(next) as usize;
                if id == postings.len() {
                    postings.push(Vec::new());
                }
                postings[id].push((doc as u32, tf));
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let average_length = if texts.is_empty() { 0.0 } else { total as f64 / texts.len() as f64 };
        Bm25Index { vocabulary, postings, doc_lengths, average_length, k1: params.k1, b: params.b, stopwords }
    }

    fn scores(&self, query: &str) -> Vec<f64> {
        let n = self.doc_lengths.len() as f64;
        let mut scores = vec![0.0; self.doc_lengths.len()];
        let unique: HashSet<String> = tokenize_filtered(query, &self.stopwords).into_iter().collect();
        let mut terms: Vec<u32> = unique.iter().filter_map(|t| self.vocabulary.get(t).copied()).collect();
        terms.sort_unstable();
        for term in terms {
            let postings = &self.postings[term as usize];
            let df = postings.len() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            for &(doc, tf) in postings {
                let tf = tf as f64;
                let length_ratio =
                    if self.average_length > 0.0 { self.doc_lengths[doc as usize] as f64 / self.average_length } else { 0.0 };
                let norm = tf + self.k1 * (1.0 - self.b + self.b * length_ratio);
                scores[doc as usize] += idf * tf * (self.k1 + 1.0) / norm;
            }
        }
        scores
    }
}

#[derive(Debug, Clone)]
struct TfIdfIndex {
    model: TfIdfModel,
    /// Per term: (document, normalized weight).
    postings: HashMap<u32, Vec<(u32, f64)>>,
    documents: usize,
}

impl TfIdfIndex {
    fn build(texts: &[&str], stopwords: HashSet<String>) -> Self {
        let model = TfIdfModel::fit_with_stopwords(texts.iter().copied(), stopwords);
        let mut postings: HashMap<u32, Vec<(u32, f64)>> = HashMap::new();
        for (doc, text) in texts.iter().enumerate() {
            for &(term, weight) in &model.vector(text).0 {
                postings.entry(term).or_default().push((doc as u32, weight));
            }
        }
        TfIdfIndex { model, postings, documents: texts.len() }
    }

    fn scores(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.documents];
        for &(term, weight) in &self.model.vector(query).0 {
            for &(doc, doc_weight) in self.postings.get(&term).map(Vec::as_slice).unwrap_or_default() {
                scores[doc as usize] += weight * doc_weight;
            }
        }
        scores
    }
}

#[derive(Debug, Clone)]
enum IndexKind {
    Bm25(Bm25Index),
    Tfidf(TfIdfIndex),
    Embedding { dim: usize, vectors: Vec<Vec<f64>> },
}

/// A query against a [`CaseIndex`]; its variant must match the index mode.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Text(&'a str),
    Vector(&'a [f64]),
}

/// Immutable retrieval structure over a set of documents keyed by id.
#[derive(Debug, Clone)]
pub struct CaseIndex {
    ids: Vec<String>,
    kind: IndexKind,
}

impl CaseIndex {
    /// Lexical index over `(id, text)` documents.
    pub fn build_text<I, S, T>(documents: I, mode: IndexMode, params: &IndexParams) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let (ids, texts): (Vec<String>, Vec<T>) = documents.into_iter().map(|(id, text)| (id.into(), text)).unzip();
        if ids.is_empty() {
            return Err(RetrievalError::EmptyRepository);
        }
        let texts: Vec<&str> = texts.iter().map(AsRef::as_ref).collect();
        let stopwords: HashSet<String> = params.stopwords.iter().map(|w| w.to_lowercase()).collect();
        let kind = match mode {
            IndexMode::Bm25 => IndexKind::Bm25(Bm25Index::build(&texts, params, stopwords)),
            IndexMode::Tfidf => IndexKind::Tfidf(TfIdfIndex::build(&texts, stopwords)),
            IndexMode::Embedding => {
                return Err(RetrievalError::InvalidParameters("embedding indexes are built from vectors".into()))
            }
        };
        Ok(CaseIndex { ids, kind })
    }

    /// Embedding index over the given ids, each of which must have a vector.
    pub fn build_embedding<I, S>(ids: I, table: &EmbeddingTable) -> Result<Self, RetrievalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        if ids.is_empty() {
            return Err(RetrievalError::EmptyRepository);
        }
        let vectors = ids
            .iter()
            .map(|id| {
                let v = table.get(id).ok_or_else(|| RetrievalError::MissingEmbeddings(id.clone()))?;
                if v.iter().all(|x| *x == 0.0) {
                    return Err(RetrievalError::InvalidEmbedding { id: id.clone(), reason: "zero norm".into() });
                }
                Ok(v.to_vec())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CaseIndex { ids, kind: IndexKind::Embedding { dim: table.dim(), vectors } })
    }

    /// Index over the questions (or embeddings) of every case in `repo`.
    pub fn build(
        repo: &CaseRepository,
        mode: IndexMode,
        params: &IndexParams,
        embeddings: Option<&EmbeddingTable>,
    ) -> Result<Self, RetrievalError> {
        match mode {
            IndexMode::Embedding => {
                let table = embeddings.ok_or_else(|| {
                    RetrievalError::MissingEmbeddings(repo.iter().next().map(|c| c.id.clone()).unwrap_or_default())
                })?;
                Self::build_embedding(repo.iter().map(|c| c.id.clone()), table)
            }
            _ => Self::build_text(repo.iter().map(|c| (c.id.clone(), c.question.as_str())), mode, params),
        }
    }

    pub fn mode(&self) -> IndexMode {
        match self.kind {
            IndexKind::Bm25(_) => IndexMode::Bm25,
            IndexKind::Tfidf(_) => IndexMode::Tfidf,
            IndexKind::Embedding { .. } => IndexMode::Embedding,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Score of every indexed document, in index order.
    pub fn scores(&self, query: Query<'_>) -> Result<Vec<f64>, RetrievalError> {
        match (&self.kind, query) {
            (IndexKind::Bm25(index), Query::Text(text)) => Ok(index.scores(text)),
            (IndexKind::Tfidf(index), Query::Text(text)) => Ok(index.scores(text)),
            (IndexKind::Embedding { dim, vectors }, Query::Vector(v)) => {
                if v.len() != *dim {
                    return Err(RetrievalError::InvalidParameters(format!(
                        "query vector has dimension {}, index has {dim}",
                        v.len()
                    )));
                }
                vectors
                    .iter()
                    .map(|d| cosine(v, d).map_err(|e| RetrievalError::InvalidParameters(e.to_string())))
                    .collect()
            }
            _ => Err(RetrievalError::ModeMismatch(self.mode())),
        }
    }

    /// Every document ranked by score, optionally leaving one id out.
    pub fn rank_all(&self, query: Query<'_>, exclude: Option<&str>) -> Result<Vec<RankedCase>, RetrievalError> {
        let scores = self.scores(query)?;
        let mut ranked: Vec<RankedCase> = self
            .ids
            .iter()
            .zip(scores)
            .filter(|(id, _)| Some(id.as_str()) != exclude)
            .map(|(id, score)| RankedCase { case_id: id.clone(), score })
            .collect();
        ranked.sort_by(rank_order);
        Ok(ranked)
    }
}

fn rank_order(a: &RankedCase, b: &RankedCase) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.case_id.cmp(&b.case_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCase {
    pub case_id: String,
    pub score: f64,
}

/// Top-k cases for one query; scores are non-increasing and the query's own
/// id never appears.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub k: usize,
    pub ranked: Vec<RankedCase>,
}

impl RetrievalResult {
    pub fn top_ids(&self, k: usize) -> impl Iterator<Item = &str> {
        self.ranked.iter().take(k).map(|r| r.case_id.as_str())
    }
}

pub fn retrieve(index: &CaseIndex, query_id: &str, query: Query<'_>, k: usize) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidParameters("k must be at least 1".into()));
    }
    let mut ranked = index.rank_all(query, Some(query_id))?;
    ranked.truncate(k);
    Ok(RetrievalResult { query_id: query_id.to_string(), k, ranked })
}

/// Retrieves for many queries in parallel; output order follows the input.
pub fn retrieve_all(
    index: &CaseIndex,
    queries: &[(String, Query<'_>)],
    k: usize,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    queries.par_iter().map(|(id, query)| retrieve(index, id, *query, k)).collect()
}

/// Fine-stage scores for (query, case) pairs.
pub trait RerankScorer: Sync {
    fn rerank_score(&self, query_id: &str, case_id: &str) -> Option<f64>;
}

/// Externally produced scores, e.g. from a cross-encoder.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RerankScores {
    scores: HashMap<(String, String), f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl RerankScores {
    pub fn insert(&mut self, query_id: impl Into<String>, case_id: impl Into<String>, score: f64) {
        self.scores.insert((query_id.into(), case_id.into()), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Parses `query_id<TAB>case_id<TAB>score` lines. Blank lines and lines
    /// starting with `#` are skipped; a repeated pair is an error.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut out = RerankScores::default();
        for (number, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FormatError { line: number + 1, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let score: f64 = fields[2].trim().parse().map_err(|_| err(format!("invalid score `{}`", fields[2])))?;
            if !score.is_finite() {
                return Err(err(format!("non-finite score `{}`", fields[2])));
            }
            let key = (fields[0].to_string(), fields[1].to_string());
            if out.scores.insert(key, score).is_some() {
                return Err(err(format!("duplicate pair ({}, {})", fields[0], fields[1])));
            }
        }
        Ok(out)
    }

    /// Serialized form, sorted by query then case id.
    pub fn to_text(&self) -> String {
        let mut entries: Vec<_> = self.scores.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        entries.into_iter().map(|((q, c), s)| format!("{q}\t{c}\t{s}\n")).collect()
    }
}

impl RerankScorer for RerankScores {
    fn rerank_score(&self, query_id: &str, case_id: &str) -> Option<f64> {
        self.scores.get(&(query_id.to_string(), case_id.to_string())).copied()
    }
}

/// Diagnostic reranker: the program score of each case's gold program
/// against the query's gold program.
pub struct ProgramScoreOracle {
    weights: ScoreWeights,
    queries: HashMap<String, ProgramTokens>,
    cases: HashMap<String, ProgramTokens>,
}

impl ProgramScoreOracle {
    pub fn new(queries: &CaseRepository, cases: &CaseRepository, weights: ScoreWeights) -> Self {
        let mut interner = TokenInterner::default();
        let cases = cases.iter().map(|c| (c.id.clone(), interner.tokens(&c.program))).collect();
        let queries = queries.iter().map(|q| (q.id.clone(), interner.lookup(&q.program))).collect();
        ProgramScoreOracle { weights, queries, cases }
    }
}

impl RerankScorer for ProgramScoreOracle {
    fn rerank_score(&self, query_id: &str, case_id: &str) -> Option<f64> {
        let query = self.queries.get(query_id)?;
        let case = self.cases.get(case_id)?;
        query.score(case, self.weights).ok().map(|s| s.s)
    }
}

/// Takes the `n_coarse` best cases from `coarse`, reorders them by the
/// reranker's scores and keeps the top `k`.
pub fn two_stage_retrieve(
    coarse: &CaseIndex,
    query_id: &str,
    query: Query<'_>,
    reranker: &dyn RerankScorer,
    n_coarse: usize,
    k: usize,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 || n_coarse < k {
        return Err(RetrievalError::InvalidParameters(format!("need 1 <= k <= n_coarse, got k={k}, n_coarse={n_coarse}")));
    }
    let candidates = retrieve(coarse, query_id, query, n_coarse)?;
    let mut ranked = candidates
        .ranked
        .into_iter()
        .map(|c| {
            reranker
                .rerank_score(query_id, &c.case_id)
                .map(|score| RankedCase { case_id: c.case_id.clone(), score })
                .ok_or_else(|| RetrievalError::MissingRerankScore { query_id: query_id.to_string(), case_id: c.case_id })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(rank_order);
    ranked.truncate(k);
    Ok(RetrievalResult { query_id: query_id.to_string(), k, ranked })
}

/// Question embeddings read from a text file.
///
/// The first non-comment line is the header `dim <d>`; every other line is an
/// id followed by `d` numbers. Fields are separated by whitespace or commas.
/// Lines starting with `#` are comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    ids: Vec<String>,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, ..Default::default() }
    }

    pub fn insert(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<(), String> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(format!("`{id}` has {} values, expected {}", values.len(), self.dim));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("`{id}` has a non-finite value"));
        }
        if self.vectors.contains_key(&id) {
            return Err(format!("duplicate id `{id}`"));
        }
        self.ids.push(id.clone());
        self.vectors.insert(id, values);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut table: Option<EmbeddingTable> = None;
        for (number, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: String| FormatError { line: number + 1, message };
            let fields: Vec<&str> = trimmed.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            match table.as_mut() {
                None => {
                    let dim = match fields.as_slice() {
                        ["dim", d] => d.parse::<usize>().ok().filter(|&d| d > 0),
                        _ => None,
                    }
                    .ok_or_else(|| err(format!("expected header `dim <d>`, found `{trimmed}`")))?;
                    table = Some(EmbeddingTable::new(dim));
                }
                Some(table) => {
                    let (id, values) = fields.split_first().expect("non-empty line");
                    let values = values
                        .iter()
                        .map(|v| v.parse::<f64>().map_err(|_| err(format!("invalid number `{v}`"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    table.insert(*id, values).map_err(err)?;
                }
            }
        }
        table.ok_or(FormatError { line: 0, message: "missing `dim <d>` header".into() })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dim {}\n", self.dim);
        for id in &self.ids {
            let values: Vec<String> = self.vectors[id].iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!("{id} {}\n", values.join(" ")));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Retrieval output: one JSON object per line.
pub fn write_results(results: &[RetrievalResult]) -> String {
    results.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

pub fn read_results(text: &str) -> Result<Vec<RetrievalResult>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| FormatError { line: i + 1, message: e.to_string() }))
        .collect()
}
