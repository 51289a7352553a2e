//! Question similarity, program score and gold-case mining.
//!
//! The program score of a candidate against a target program is
//!
//! ```text
//! S = clamp((l_ops - d_ops) / l_ops) * w_ops + clamp((l_arg - d_arg) / l_arg) * w_arg
//! ```
//!
//! where `l_*` are the target's operation and argument counts and `d_*` the
//! word-level edit distances between the two sequences. Each term is clamped
//! to `[0, 1]`, so a much longer candidate scores zero on that term instead
//! of going negative.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CaseRecord, CaseRepository};
use crate::dsl::{arg_sequence, op_sequence, OpCode, Program};
use crate::retrieval::{tokenize, EmbeddingTable, SparseVector, TfIdfModel};

/// Word-level Levenshtein distance with unit costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.len() < b.len() {
        return levenshtein(b, a);
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let substitution = diagonal + usize::from(x != y);
            diagonal = row[j + 1];
            row[j + 1] = substitution.min(row[j] + 1).min(diagonal + 1);
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w_ops: f64,
    pub w_arg: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { w_ops: 0.7, w_arg: 0.3 }
    }
}

impl ScoreWeights {
    /// Weights with `w_arg = 1 - w_ops`.
    pub fn with_ops_weight(w_ops: f64) -> Result<Self, ScoreError> {
        let weights = ScoreWeights { w_ops, w_arg: 1.0 - w_ops };
        weights.validate()?;
        Ok(weights)
    }

    /// Weights must be non-negative, sum to one, and favour operations.
    pub fn validate(&self) -> Result<(), ScoreError> {
        let ScoreWeights { w_ops, w_arg } = *self;
        let valid = w_ops.is_finite()
            && w_arg.is_finite()
            && w_arg >= 0.0
            && w_ops >= w_arg
            && ((w_ops + w_arg) - 1.0).abs() <= 1e-9;
        if valid {
            Ok(())
        } else {
            Err(ScoreError::InvalidWeights { w_ops, w_arg })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("target program has no operations or arguments")]
    EmptyTargetProgram,
    #[error("invalid weights w_ops={w_ops}, w_arg={w_arg}: need w_ops >= w_arg >= 0 and w_ops + w_arg = 1")]
    InvalidWeights { w_ops: f64, w_arg: f64 },
}

/// A program score with every term it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramScore {
    pub s: f64,
    pub ops_term: f64,
    pub arg_term: f64,
    pub l_ops: usize,
    pub l_arg: usize,
    pub d_ops: usize,
    pub d_arg: usize,
    pub w_ops: f64,
    pub w_arg: f64,
}

/// Argument token as compared by the program score: lowercased, with `$`,
/// thousands separators and whitespace dropped from numbers. Step references
/// and constants compare literally.
pub fn normalize_arg_token(token: &str) -> String {
    let lowered = token.trim().to_lowercase();
    if crate::dsl::parse_number_literal(&lowered).is_some() {
        lowered.chars().filter(|c| !matches!(c, '$' | ',') && !c.is_whitespace()).collect()
    } else {
        lowered
    }
}

fn clamped_term(length: usize, distance: usize) -> f64 {
    ((length as f64 - distance as f64) / length as f64).clamp(0.0, 1.0)
}

fn score_sequences<O: PartialEq, A: PartialEq>(
    target_ops: &[O],
    target_args: &[A],
    candidate_ops: &[O],
    candidate_args: &[A],
    weights: ScoreWeights,
) -> Result<ProgramScore, ScoreError> {
    weights.validate()?;
    let (l_ops, l_arg) = (target_ops.len(), target_args.len());
    if l_ops == 0 || l_arg == 0 {
        return Err(ScoreError::EmptyTargetProgram);
    }
    let d_ops = levenshtein(target_ops, candidate_ops);
    let d_arg = levenshtein(target_args, candidate_args);
    let ops_term = clamped_term(l_ops, d_ops) * weights.w_ops;
    let arg_term = clamped_term(l_arg, d_arg) * weights.w_arg;
    Ok(ProgramScore {
        s: ops_term + arg_term,
        ops_term,
        arg_term,
        l_ops,
        l_arg,
        d_ops,
        d_arg,
        w_ops: weights.w_ops,
        w_arg: weights.w_arg,
    })
}

/// Scores `candidate` against `target`. Normalization uses the target's
/// lengths, so the score is not symmetric.
pub fn program_score(target: &Program, candidate: &Program, weights: ScoreWeights) -> Result<ProgramScore, ScoreError> {
    let norm = |p: &Program| arg_sequence(p).iter().map(|t| normalize_arg_token(t)).collect::<Vec<_>>();
    score_sequences(&op_sequence(target), &norm(target), &op_sequence(candidate), &norm(candidate), weights)
}

/// Programs pre-tokenized for bulk scoring: ops as codes, arguments interned.
#[derive(Debug, Clone)]
pub struct ProgramTokens {
    ops: Vec<OpCode>,
    args: Vec<u32>,
}

/// Interns normalized argument tokens so bulk scoring compares integers.
#[derive(Debug, Default)]
pub struct TokenInterner {
    ids: HashMap<String, u32>,
}

impl TokenInterner {
    pub fn tokens(&mut self, program: &Program) -> ProgramTokens {
        let args = arg_sequence(program)
            .iter()
            .map(|t| {
                let next = self.ids.len() as u32;
                *self.ids.entry(normalize_arg_token(t)).or_insert(next)
            })
            .collect();
        ProgramTokens { ops: op_sequence(program), args }
    }

    /// Like [`TokenInterner::tokens`] but read-only: tokens never seen before
    /// get fresh ids that match nothing already interned.
    pub fn lookup(&self, program: &Program) -> ProgramTokens {
        let base = self.ids.len() as u32;
        let mut fresh: HashMap<String, u32> = HashMap::new();
        let args = arg_sequence(program)
            .iter()
            .map(|t| {
                let token = normalize_arg_token(t);
                match self.ids.get(&token) {
                    Some(&id) => id,
                    None => {
                        let next = base + fresh.len() as u32;
                        *fresh.entry(token).or_insert(next)
                    }
                }
            })
            .collect();
        ProgramTokens { ops: op_sequence(program), args }
    }
}

impl ProgramTokens {
    pub fn score(&self, candidate: &ProgramTokens, weights: ScoreWeights) -> Result<ProgramScore, ScoreError> {
        score_sequences(&self.ops, &self.args, &candidate.ops, &candidate.args, weights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub id: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has zero norm")]
    ZeroNorm,
}

/// `a.b / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, SimilarityError> {
    if a.len() != b.len() {
        return Err(SimilarityError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, SimilarityError> {
    cosine(&a.values, &b.values)
}

/// TF-IDF cosine between two questions, with IDF estimated on the pair alone.
/// Returns 0 when either side has no tokens.
pub fn lexical_question_similarity(q1: &str, q2: &str) -> f64 {
    if tokenize(q1).is_empty() || tokenize(q2).is_empty() {
        return 0.0;
    }
    let model = TfIdfModel::fit([q1, q2]);
    model.similarity(&model.vector(q1), &model.vector(q2))
}

/// Which candidates are scored for a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidatePool {
    All,
    /// The `n` cases whose questions are most similar to the query's.
    TopN(usize),
}

impl std::str::FromStr for CandidatePool {
    type Err = String;

    /// `all`, `top:100` or `top100`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "all" {
            return Ok(CandidatePool::All);
        }
        s.strip_prefix("top")
            .map(|n| n.trim_start_matches([':', '_', '-', '=']))
            .and_then(|n| n.parse().ok())
            .filter(|&n| n > 0)
            .map(CandidatePool::TopN)
            .ok_or_else(|| format!("invalid pool `{s}`; expected `all` or `top:<n>`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub weights: ScoreWeights,
    pub threshold: f64,
    /// Accept scores equal to the threshold too.
    pub inclusive: bool,
    pub pool: CandidatePool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { weights: ScoreWeights::default(), threshold: 0.9, inclusive: false, pool: CandidatePool::All }
    }
}

impl MiningConfig {
    fn accepts(&self, score: f64) -> bool {
        if self.inclusive {
            score >= self.threshold
        } else {
            score > self.threshold
        }
    }
}

/// Source of question similarity for top-n pools.
#[derive(Debug, Clone, Copy)]
pub enum QuestionSimilarity<'a> {
    /// TF-IDF fitted on the case repository's questions.
    Lexical(&'a TfIdfModel),
    Embeddings(&'a EmbeddingTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldCase {
    pub case_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldCaseSet {
    pub query_id: String,
    /// Sorted by descending score, then ascending id.
    pub gold: Vec<GoldCase>,
    pub threshold: f64,
    pub pool: CandidatePool,
}

impl GoldCaseSet {
    pub fn ids(&self) -> BTreeSet<&str> {
        self.gold.iter().map(|g| g.case_id.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiningError {
    #[error("unknown query id `{0}`")]
    UnknownQueryId(String),
    #[error("no embedding for `{0}`")]
    MissingEmbeddings(String),
    #[error("top-n pool requested without a question similarity source")]
    MissingSimilaritySource,
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

/// Mines gold cases for queries against an immutable case repository.
///
/// Program tokens for every case are computed once; mining a query only reads
/// shared state, so [`GoldCaseMiner::mine_all`] fans out over queries.
pub struct GoldCaseMiner<'a> {
    cases: &'a CaseRepository,
    tokens: Vec<ProgramTokens>,
    interner: TokenInterner,
    config: MiningConfig,
    similarity: Option<QuestionSimilarity<'a>>,
    /// Question vectors of the cases under a lexical similarity.
    case_vectors: Vec<SparseVector>,
}

impl<'a> GoldCaseMiner<'a> {
    pub fn new(
        cases: &'a CaseRepository,
        config: MiningConfig,
        similarity: Option<QuestionSimilarity<'a>>,
    ) -> Result<Self, MiningError> {
        config.weights.validate()?;
        if matches!(config.pool, CandidatePool::TopN(_)) {
            match similarity {
                None => return Err(MiningError::MissingSimilaritySource),
                Some(QuestionSimilarity::Embeddings(table)) => {
                    if let Some(missing) = cases.iter().find(|c| table.get(&c.id).is_none()) {
                        return Err(MiningError::MissingEmbeddings(missing.id.clone()));
                    }
                }
                Some(QuestionSimilarity::Lexical(_)) => {}
            }
        }
        let mut interner = TokenInterner::default();
        let tokens = cases.iter().map(|c| interner.tokens(&c.program)).collect();
        let case_vectors = match (config.pool, similarity) {
            (CandidatePool::TopN(_), Some(QuestionSimilarity::Lexical(model))) => {
                cases.iter().map(|c| model.vector(&c.question)).collect()
            }
            _ => Vec::new(),
        };
        Ok(GoldCaseMiner { cases, tokens, interner, config, similarity, case_vectors })
    }

    pub fn config(&self) -> &MiningConfig {
        &self.config
    }

    /// Gold set for a case of the repository itself.
    pub fn mine_by_id(&self, query_id: &str) -> Result<GoldCaseSet, MiningError> {
        let query = self.cases.get(query_id).ok_or_else(|| MiningError::UnknownQueryId(query_id.to_string()))?;
        self.mine(query)
    }

    /// Gold set for any query record; a case with the query's id is skipped.
    pub fn mine(&self, query: &CaseRecord) -> Result<GoldCaseSet, MiningError> {
        let query_tokens = self.interner.lookup(&query.program);
        let pool = self.pool(query)?;
        let mut gold = Vec::new();
        for index in pool {
            let case = &self.cases.records()[index];
            if case.id == query.id {
                continue;
            }
            let score = query_tokens.score(&self.tokens[index], self.config.weights)?;
            if self.config.accepts(score.s) {
                gold.push(GoldCase { case_id: case.id.clone(), score: score.s });
            }
        }
        gold.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.case_id.cmp(&b.case_id)));
        Ok(GoldCaseSet { query_id: query.id.clone(), gold, threshold: self.config.threshold, pool: self.config.pool })
    }

    /// Mines every query in parallel; output order follows `queries`.
    pub fn mine_all(&self, queries: &[CaseRecord]) -> Result<Vec<GoldCaseSet>, MiningError> {
        queries.par_iter().map(|q| self.mine(q)).collect()
    }

    /// Repository indices to score, excluding the query itself.
    fn pool(&self, query: &CaseRecord) -> Result<Vec<usize>, MiningError> {
        let n = match self.config.pool {
            CandidatePool::All => return Ok((0..self.cases.len()).collect()),
            CandidatePool::TopN(n) => n,
        };
        let scores: Vec<f64> = match self.similarity.ok_or(MiningError::MissingSimilaritySource)? {
            QuestionSimilarity::Lexical(model) => {
                let q = model.vector(&query.question);
                self.case_vectors.iter().map(|c| model.similarity(&q, c)).collect()
            }
            QuestionSimilarity::Embeddings(table) => {
                let q = table.get(&query.id).ok_or_else(|| MiningError::MissingEmbeddings(query.id.clone()))?;
                self.cases
                    .iter()
                    .map(|c| {
                        let v = table.get(&c.id).ok_or_else(|| MiningError::MissingEmbeddings(c.id.clone()))?;
                        Ok(cosine(q, v)?)
                    })
                    .collect::<Result<_, MiningError>>()?
            }
        };
        let mut order: Vec<usize> = (0..self.cases.len()).filter(|&i| self.cases.records()[i].id != query.id).collect();
        order.sort_by(|&a, &b| {
            scores[b].total_cmp(&scores[a]).then_with(|| self.cases.records()[a].id.cmp(&self.cases.records()[b].id))
        });
        order.truncate(n);
        Ok(order)
    }
}

/// Convenience wrapper: mine one query of `repo` against the rest of `repo`.
pub fn mine_gold_cases(
    repo: &CaseRepository,
    query_id: &str,
    config: MiningConfig,
    similarity: Option<QuestionSimilarity<'_>>,
) -> Result<GoldCaseSet, MiningError> {
    GoldCaseMiner::new(repo, config, similarity)?.mine_by_id(query_id)
}
