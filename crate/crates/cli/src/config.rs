//! Run configuration: defaults, overlaid by a TOML file, overlaid by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use finqa_cbr::corpus::{FieldMap, LinearizeMode};
use finqa_cbr::retrieval::{IndexMode, IndexParams};
use finqa_cbr::similarity::{CandidatePool, MiningConfig, ScoreWeights};
use finqa_cbr::Tolerance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub split: String,
    pub out: PathBuf,
    /// Split name to dataset file.
    pub data: BTreeMap<String, PathBuf>,
    pub field_map: FieldMap,
    pub scoring: Scoring,
    pub mining: Mining,
    pub retrieval: Retrieval,
    pub tolerance: ToleranceConfig,
    pub linearize: Linearize,
    pub equivalence: Equivalence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scoring {
    pub w_ops: f64,
    pub w_arg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mining {
    pub threshold: f64,
    pub inclusive: bool,
    /// `all` or `top:<n>`.
    pub pool: String,
    /// `lexical` or `embedding`; ranks candidates for a top-n pool.
    pub question_similarity: String,
    /// Split that supplies the cases; empty means the query split.
    pub cases: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Retrieval {
    pub index_mode: IndexMode,
    pub k1: f64,
    pub b: f64,
    pub stopwords: Vec<String>,
    pub k: Vec<usize>,
    /// Embedding file covering queries and cases.
    pub embeddings: Option<PathBuf>,
    /// `none`, `oracle`, or a path to a rerank score file.
    pub rerank: String,
    pub n_coarse: usize,
    pub cases: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub scale_lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Linearize {
    pub mode: LinearizeMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Equivalence {
    pub oracle_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let data = ["train", "dev", "test"]
            .into_iter()
            .map(|s| (s.to_string(), PathBuf::from(format!("data/{s}.json"))))
            .collect();
        RunConfig {
            seed: 0,
            split: "train".into(),
            out: PathBuf::from("out"),
            data,
            field_map: FieldMap::default(),
            scoring: Scoring::default(),
            mining: Mining::default(),
            retrieval: Retrieval::default(),
            tolerance: ToleranceConfig::default(),
            linearize: Linearize::default(),
            equivalence: Equivalence::default(),
        }
    }
}

impl Default for Scoring {
    fn default() -> Self {
        let w = ScoreWeights::default();
        Scoring { w_ops: w.w_ops, w_arg: w.w_arg }
    }
}

impl Default for Mining {
    fn default() -> Self {
        Mining {
            threshold: 0.9,
            inclusive: false,
            pool: "all".into(),
            question_similarity: "lexical".into(),
            cases: String::new(),
        }
    }
}

impl Default for Retrieval {
    fn default() -> Self {
        let p = IndexParams::default();
        Retrieval {
            index_mode: IndexMode::Bm25,
            k1: p.k1,
            b: p.b,
            stopwords: p.stopwords,
            k: vec![1, 3, 5],
            embeddings: None,
            rerank: "none".into(),
            n_coarse: 100,
            cases: "train".into(),
        }
    }
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerance::default();
        ToleranceConfig { rel_tol: t.rel_tol, abs_tol: t.abs_tol, scale_lenient: t.scale_lenient }
    }
}

impl Default for Linearize {
    fn default() -> Self {
        Linearize { mode: LinearizeMode::Cell }
    }
}

impl Default for Equivalence {
    fn default() -> Self {
        Equivalence { oracle_trials: 100 }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub split: Option<String>,
    pub k: Option<Vec<usize>>,
    pub threshold: Option<f64>,
    pub w_ops: Option<f64>,
    pub pool: Option<String>,
    pub index_mode: Option<IndexMode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rerank {
    None,
    Oracle,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilaritySource {
    Lexical,
    Embedding,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(split) = &o.split {
            self.split = split.clone();
        }
        if let Some(k) = &o.k {
            self.retrieval.k = k.clone();
        }
        if let Some(threshold) = o.threshold {
            self.mining.threshold = threshold;
        }
        if let Some(w_ops) = o.w_ops {
            self.scoring.w_ops = w_ops;
            self.scoring.w_arg = 1.0 - w_ops;
        }
        if let Some(pool) = &o.pool {
            self.mining.pool = pool.clone();
        }
        if let Some(mode) = o.index_mode {
            self.retrieval.index_mode = mode;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
    }

    /// Checks every setting before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.weights()?;
        ensure!(self.mining.threshold.is_finite(), "mining.threshold must be finite");
        self.pool()?;
        self.similarity_source()?;
        ensure!(!self.retrieval.k.is_empty(), "retrieval.k must list at least one cutoff");
        ensure!(self.retrieval.k.iter().all(|&k| k >= 1), "every retrieval.k must be at least 1");
        ensure!(self.retrieval.k1 >= 0.0 && self.retrieval.k1.is_finite(), "retrieval.k1 must be non-negative");
        ensure!((0.0..=1.0).contains(&self.retrieval.b), "retrieval.b must lie in [0, 1]");
        let max_k = self.retrieval.k.iter().copied().max().unwrap_or(1);
        ensure!(self.retrieval.n_coarse >= max_k, "retrieval.n_coarse must be at least the largest k");
        let t = &self.tolerance;
        ensure!(t.rel_tol >= 0.0 && t.abs_tol >= 0.0, "tolerances must be non-negative");
        ensure!(self.equivalence.oracle_trials >= 1, "equivalence.oracle_trials must be at least 1");
        ensure!(!self.split.trim().is_empty(), "split must not be empty");
        Ok(())
    }

    pub fn weights(&self) -> Result<ScoreWeights> {
        let w = ScoreWeights { w_ops: self.scoring.w_ops, w_arg: self.scoring.w_arg };
        w.validate().map_err(|e| anyhow::anyhow!("scoring: {e}"))?;
        Ok(w)
    }

    pub fn pool(&self) -> Result<CandidatePool> {
        self.mining.pool.parse().map_err(|e: String| anyhow::anyhow!("mining.pool: {e}"))
    }

    pub fn similarity_source(&self) -> Result<SimilaritySource> {
        match self.mining.question_similarity.trim().to_ascii_lowercase().as_str() {
            "lexical" => Ok(SimilaritySource::Lexical),
            "embedding" | "embeddings" => Ok(SimilaritySource::Embedding),
            other => bail!("mining.question_similarity: unknown source `{other}`; expected lexical or embedding"),
        }
    }

    pub fn mining_config(&self) -> Result<MiningConfig> {
        Ok(MiningConfig {
            weights: self.weights()?,
            threshold: self.mining.threshold,
            inclusive: self.mining.inclusive,
            pool: self.pool()?,
        })
    }

    pub fn index_params(&self) -> IndexParams {
        IndexParams { k1: self.retrieval.k1, b: self.retrieval.b, stopwords: self.retrieval.stopwords.clone() }
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance { rel_tol: self.tolerance.rel_tol, abs_tol: self.tolerance.abs_tol, scale_lenient: self.tolerance.scale_lenient }
    }

    pub fn rerank(&self) -> Rerank {
        match self.retrieval.rerank.trim() {
            "" | "none" => Rerank::None,
            "oracle" => Rerank::Oracle,
            path => Rerank::File(PathBuf::from(path)),
        }
    }

    /// File behind a split name. A name that is not configured but names an
    /// existing file is used as a path.
    pub fn split_path(&self, split: &str) -> Result<PathBuf> {
        if let Some(path) = self.data.get(split) {
            return Ok(path.clone());
        }
        let path = PathBuf::from(split);
        if path.is_file() {
            return Ok(path);
        }
        bail!("split `{split}` is not configured under [data] and is not a file")
    }

    pub fn mining_cases_split(&self) -> &str {
        if self.mining.cases.trim().is_empty() {
            &self.split
        } else {
            &self.mining.cases
        }
    }
}
