//! Execution, program and operator accuracy over prediction files, and
//! precision@k over retrieval output.
//!
//! Prediction files hold one record per line:
//!
//! ```text
//! <id> TAB <program> [TAB <answer>]
//! ```
//!
//! Blank lines and lines starting with `#` are skipped. The program field is
//! kept verbatim and may be unparsable; the optional answer is a number,
//! `yes` or `no` and is echoed into the verdict table only. Accuracy always
//! comes from executing the predicted program.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CaseRepository;
use crate::dsl::{op_sequence, parse_program, Program};
use crate::equivalence::canonicalize;
use crate::executor::{answers_match, execute, ExecResult, Tolerance};
use crate::retrieval::RetrievalResult;
use crate::similarity::{levenshtein, GoldCaseSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub program_text: String,
    pub answer: Option<ExecResult>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, program_text: impl Into<String>) -> Self {
        PredictionRecord { id: id.into(), program_text: program_text.into(), answer: None }
    }

    pub fn program(&self) -> Option<Program> {
        parse_program(&self.program_text).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PredictionFormatError {
    pub line: usize,
    pub message: String,
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, PredictionFormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let fail = |message: String| PredictionFormatError { line: line_no, message };
        if !(2..=3).contains(&fields.len()) {
            return Err(fail(format!("expected 2 or 3 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(fail("empty id".into()));
        }
        let answer = match fields.get(2).map(|s| s.trim()) {
            None | Some("") => None,
            Some(text) => Some(ExecResult::parse(text).ok_or_else(|| fail(format!("unreadable answer `{text}`")))?),
        };
        out.push(PredictionRecord { id: id.to_string(), program_text: fields[1].to_string(), answer });
    }
    Ok(out)
}

pub fn write_predictions(predictions: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for p in predictions {
        match &p.answer {
            Some(answer) => writeln!(out, "{}\t{}\t{}", p.id, p.program_text, answer),
            None => writeln!(out, "{}\t{}", p.id, p.program_text),
        }
        .expect("writing to a String");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("prediction for unknown id `{0}`")]
    UnknownPredictionId(String),
    #[error("more than one prediction for id `{0}`")]
    DuplicatePredictionId(String),
    #[error("no gold-case set for query `{0}`")]
    MissingGoldSet(String),
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Unparsable { error: String },
    ExecError { class: String },
    Correct,
    Wrong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub outcome: Outcome,
    pub predicted_value: Option<ExecResult>,
    pub predicted_answer: Option<ExecResult>,
    pub gold_value: ExecResult,
    pub exec_correct: bool,
    pub program_correct: bool,
    pub ops_correct: bool,
    /// 1 - edit distance between op sequences / longer length.
    pub ops_token_accuracy: f64,
    /// Right answer from a non-equivalent program.
    pub exec_correct_program_wrong: bool,
    pub op_mismatch: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub total: usize,
    pub unparsable: usize,
    pub exec_error: usize,
    pub correct: usize,
    pub wrong: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtK {
    pub k: usize,
    pub precision: f64,
    pub evaluated: usize,
    /// Queries with an empty gold set, left out of the mean.
    pub excluded_empty: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub execution_accuracy: f64,
    pub program_accuracy: f64,
    pub operator_accuracy: f64,
    pub operator_token_accuracy: f64,
    pub precision_at_k: BTreeMap<usize, PrecisionAtK>,
    pub counts: OutcomeCounts,
    /// Records in the repository that received no prediction.
    pub unpredicted: usize,
    pub exec_correct_program_wrong: usize,
    pub verdicts: Vec<Verdict>,
}

fn judge(prediction: &PredictionRecord, gold_program: &Program, gold_value: ExecResult, table: &crate::executor::TableData, tol: Tolerance) -> Verdict {
    let mut verdict = Verdict {
        id: prediction.id.clone(),
        outcome: Outcome::Wrong,
        predicted_value: None,
        predicted_answer: prediction.answer,
        gold_value,
        exec_correct: false,
        program_correct: false,
        ops_correct: false,
        ops_token_accuracy: 0.0,
        exec_correct_program_wrong: false,
        op_mismatch: true,
    };
    let program = match parse_program(&prediction.program_text) {
        Ok(p) => p,
        Err(e) => {
            verdict.outcome = Outcome::Unparsable { error: e.to_string() };
            return verdict;
        }
    };

    let gold_canonical = canonicalize(gold_program);
    let canonical = canonicalize(&program);
    verdict.program_correct = canonical.encoding == gold_canonical.encoding;
    let (ops, gold_ops) = (op_sequence(&program), op_sequence(gold_program));
    verdict.ops_correct =
        ops == gold_ops || op_sequence(&canonical.program) == op_sequence(&gold_canonical.program);
    verdict.op_mismatch = !verdict.ops_correct;
    let longest = ops.len().max(gold_ops.len());
    verdict.ops_token_accuracy = 1.0 - levenshtein(&ops, &gold_ops) as f64 / longest as f64;

    match execute(&program, Some(table)) {
        Err(e) => verdict.outcome = Outcome::ExecError { class: e.class().to_string() },
        Ok(value) => {
            verdict.predicted_value = Some(value);
            verdict.exec_correct = answers_match(value, gold_value, tol).unwrap_or(false);
            verdict.outcome = if verdict.exec_correct { Outcome::Correct } else { Outcome::Wrong };
        }
    }
    verdict.exec_correct_program_wrong = verdict.exec_correct && !verdict.program_correct;
    verdict
}

/// Scores predictions against the repository. Results do not depend on the
/// order of `predictions`.
pub fn evaluate(predictions: &[PredictionRecord], repo: &CaseRepository, tol: Tolerance) -> Result<EvalReport, MetricsError> {
    let mut seen = HashSet::with_capacity(predictions.len());
    for p in predictions {
        if repo.get(&p.id).is_none() {
            return Err(MetricsError::UnknownPredictionId(p.id.clone()));
        }
        if !seen.insert(p.id.as_str()) {
            return Err(MetricsError::DuplicatePredictionId(p.id.clone()));
        }
    }
    let mut verdicts: Vec<Verdict> = predictions
        .par_iter()
        .map(|p| {
            let gold = repo.get(&p.id).expect("checked above");
            judge(p, &gold.program, gold.exec_answer, &gold.table, tol)
        })
        .collect();
    verdicts.sort_by(|a, b| a.id.cmp(&b.id));

    let mut counts = OutcomeCounts { total: verdicts.len(), ..Default::default() };
    let (mut exe, mut prog, mut ops, mut token, mut ecpw) = (0usize, 0usize, 0usize, 0.0, 0usize);
    for v in &verdicts {
        match v.outcome {
            Outcome::Unparsable { .. } => counts.unparsable += 1,
            Outcome::ExecError { .. } => counts.exec_error += 1,
            Outcome::Correct => counts.correct += 1,
            Outcome::Wrong => counts.wrong += 1,
        }
        exe += v.exec_correct as usize;
        prog += v.program_correct as usize;
        ops += v.ops_correct as usize;
        ecpw += v.exec_correct_program_wrong as usize;
        token += v.ops_token_accuracy;
    }
    let frac = |n: f64| if verdicts.is_empty() { 0.0 } else { n / verdicts.len() as f64 };
    Ok(EvalReport {
        execution_accuracy: frac(exe as f64),
        program_accuracy: frac(prog as f64),
        operator_accuracy: frac(ops as f64),
        operator_token_accuracy: frac(token),
        precision_at_k: BTreeMap::new(),
        counts,
        unpredicted: repo.len() - verdicts.len(),
        exec_correct_program_wrong: ecpw,
        verdicts,
    })
}

/// Mean of |top-k ∩ gold| / k over queries with a non-empty gold set.
pub fn precision_at_k(results: &[RetrievalResult], gold: &[GoldCaseSet], k: usize) -> Result<PrecisionAtK, MetricsError> {
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    let by_query: HashMap<&str, &GoldCaseSet> = gold.iter().map(|g| (g.query_id.as_str(), g)).collect();
    let mut sum = 0.0;
    let (mut evaluated, mut excluded_empty) = (0, 0);
    for result in results {
        let set = by_query.get(result.query_id.as_str()).ok_or_else(|| MetricsError::MissingGoldSet(result.query_id.clone()))?;
        if set.is_empty() {
            excluded_empty += 1;
            continue;
        }
        let ids = set.ids();
        let hits = result.top_ids(k).filter(|id| ids.contains(id)).count();
        sum += hits as f64 / k as f64;
        evaluated += 1;
    }
    let precision = if evaluated == 0 { 0.0 } else { sum / evaluated as f64 };
    Ok(PrecisionAtK { k, precision, evaluated, excluded_empty })
}

/// Why a stored answer disagrees with its gold program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldExceptionKind {
    /// The program does not execute; see `detail` for the error class.
    ExecError,
    /// Boolean against numeric.
    TypeMismatch,
    /// Off by a factor of 100, i.e. stored as a percentage or a fraction.
    Scale,
    /// Within 0.1% relative but outside the tolerance.
    Rounding,
    Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldException {
    pub id: String,
    pub kind: GoldExceptionKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldExecReport {
    pub total: usize,
    pub matched: usize,
    pub match_rate: f64,
    pub by_kind: BTreeMap<GoldExceptionKind, usize>,
    pub exceptions: Vec<GoldException>,
}

impl GoldExecReport {
    pub fn exception_ids(&self) -> HashSet<&str> {
        self.exceptions.iter().map(|e| e.id.as_str()).collect()
    }
}

/// Executes every gold program and compares it with the stored answer.
pub fn gold_execution_check(repo: &CaseRepository, tol: Tolerance) -> GoldExecReport {
    let mut exceptions: Vec<GoldException> = repo
        .records()
        .par_iter()
        .filter_map(|record| {
            let exception = |kind, detail: String| Some(GoldException { id: record.id.clone(), kind, detail });
            let value = match execute(&record.program, Some(&record.table)) {
                Ok(v) => v,
                Err(e) => return exception(GoldExceptionKind::ExecError, format!("{}: {e}", e.class())),
            };
            let gold = record.exec_answer;
            match answers_match(value, gold, tol) {
                Ok(true) => None,
                Err(_) => exception(GoldExceptionKind::TypeMismatch, format!("executed {value}, stored {gold}")),
                Ok(false) => {
                    let detail = format!("executed {value}, stored {gold}");
                    let (v, g) = (value.as_f64().unwrap_or(f64::NAN), gold.as_f64().unwrap_or(f64::NAN));
                    if answers_match(value, gold, tol.lenient()).unwrap_or(false) {
                        exception(GoldExceptionKind::Scale, detail)
                    } else if (v - g).abs() <= 1e-3 * g.abs().max(v.abs()) {
                        exception(GoldExceptionKind::Rounding, detail)
                    } else {
                        exception(GoldExceptionKind::Value, detail)
                    }
                }
            }
        })
        .collect();
    exceptions.sort_by(|a, b| a.id.cmp(&b.id));
    let mut by_kind = BTreeMap::new();
    for e in &exceptions {
        *by_kind.entry(e.kind).or_insert(0) += 1;
    }
    let total = repo.len();
    let matched = total - exceptions.len();
    GoldExecReport {
        total,
        matched,
        match_rate: if total == 0 { 0.0 } else { matched as f64 / total as f64 },
        by_kind,
        exceptions,
    }
}

fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Aligned text table: one header row and one value row, in percent.
pub fn render_table(report: &EvalReport) -> String {
    let mut headers = vec!["Exe Acc".to_string(), "Prog Acc".to_string(), "Ops Acc".to_string()];
    let mut values = vec![percent(report.execution_accuracy), percent(report.program_accuracy), percent(report.operator_accuracy)];
    for (k, p) in &report.precision_at_k {
        headers.push(format!("P@{k}"));
        values.push(percent(p.precision));
    }
    render_rows(&headers, &[values])
}

/// Left-aligned columns separated by two spaces.
pub fn render_rows(headers: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..headers.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([headers[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = line(headers);
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
