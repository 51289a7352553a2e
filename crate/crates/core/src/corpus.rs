//! Dataset ingestion, table linearization, corpus statistics and the lexical
//! evidence-retrieval baseline.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dsl::{parse_program, Operand, Program};
use crate::executor::{ExecResult, TableData, TableRow};
use crate::retrieval::{CaseIndex, IndexMode, IndexParams, Query};
use crate::similarity::GoldCaseSet;

/// A gold supporting fact: a sentence of `pre_text ++ post_text`, or a row of
/// the table grid (row 0 is the header row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceRef {
    Text(usize),
    TableRow(usize),
}

impl EvidenceRef {
    /// Parses `text_3` or `table_2`.
    pub fn parse(key: &str) -> Option<EvidenceRef> {
        let (kind, index) = key.trim().rsplit_once('_')?;
        let index = index.parse().ok()?;
        match kind {
            "text" => Some(EvidenceRef::Text(index)),
            "table" => Some(EvidenceRef::TableRow(index)),
            _ => None,
        }
    }
}

impl fmt::Display for EvidenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvidenceRef::Text(i) => write!(f, "text_{i}"),
            EvidenceRef::TableRow(i) => write!(f, "table_{i}"),
        }
    }
}

/// One dataset entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub question: String,
    pub program: Program,
    /// Program string exactly as stored in the source.
    pub program_text: String,
    pub exec_answer: ExecResult,
    /// Answer value exactly as stored in the source.
    pub raw_answer: Value,
    pub pre_text: Vec<String>,
    pub post_text: Vec<String>,
    pub table: TableData,
    pub gold_evidence: BTreeSet<EvidenceRef>,
    /// Evidence value exactly as stored in the source, if present.
    pub raw_evidence: Option<Value>,
}

impl CaseRecord {
    /// `pre_text` followed by `post_text`; evidence text indices point here.
    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.pre_text.iter().chain(&self.post_text).map(String::as_str)
    }

    pub fn sentence_count(&self) -> usize {
        self.pre_text.len() + self.post_text.len()
    }

    pub fn evidence_resolves(&self, evidence: EvidenceRef) -> bool {
        match evidence {
            EvidenceRef::Text(i) => i < self.sentence_count(),
            EvidenceRef::TableRow(i) => i <= self.table.rows.len(),
        }
    }

    /// Retrievable units of the document: every sentence, then every table
    /// row (header row included) rendered as one sentence.
    pub fn document_units(&self) -> Vec<(EvidenceRef, String)> {
        let mut units: Vec<(EvidenceRef, String)> =
            self.sentences().enumerate().map(|(i, s)| (EvidenceRef::Text(i), s.to_string())).collect();
        if !self.table.column_headers.is_empty() || !self.table.rows.is_empty() {
            let header = std::iter::once(self.table.corner.as_str())
                .chain(self.table.column_headers.iter().map(String::as_str))
                .filter(|s| !s.trim().is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            units.push((EvidenceRef::TableRow(0), header));
        }
        for (i, row) in self.table.rows.iter().enumerate() {
            units.push((EvidenceRef::TableRow(i + 1), row_sentence(row, &self.table.column_headers).unwrap_or_default()));
        }
        units
    }

    /// Source-shaped JSON holding exactly the mapped fields.
    pub fn to_source_json(&self, map: &FieldMap) -> Value {
        let mut out = Value::Object(Default::default());
        set_path(&mut out, &map.id, Value::String(self.id.clone()));
        set_path(&mut out, &map.question, Value::String(self.question.clone()));
        set_path(&mut out, &map.program, Value::String(self.program_text.clone()));
        set_path(&mut out, &map.answer, self.raw_answer.clone());
        set_path(&mut out, &map.pre_text, serde_json::json!(self.pre_text));
        set_path(&mut out, &map.post_text, serde_json::json!(self.post_text));
        set_path(&mut out, &map.table, serde_json::json!(self.table.to_grid()));
        if let Some(evidence) = &self.raw_evidence {
            set_path(&mut out, &map.evidence, evidence.clone());
        }
        out
    }
}

/// Immutable, id-indexed collection of validated records.
#[derive(Debug, Clone, Default)]
pub struct CaseRepository {
    records: Vec<CaseRecord>,
    by_id: HashMap<String, usize>,
}

impl CaseRepository {
    /// Fails on the first duplicate id.
    pub fn new(records: Vec<CaseRecord>) -> Result<Self, String> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            if by_id.insert(record.id.clone(), i).is_some() {
                return Err(record.id.clone());
            }
        }
        Ok(CaseRepository { records, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&CaseRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[CaseRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CaseRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl<'a> IntoIterator for &'a CaseRepository {
    type Item = &'a CaseRecord;
    type IntoIter = std::slice::Iter<'a, CaseRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// Dotted JSON paths of each record field. The defaults follow the public
/// release: `{"id", "pre_text", "post_text", "table", "qa": {"question",
/// "program", "exe_ans", "gold_inds"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub id: String,
    pub question: String,
    pub program: String,
    pub answer: String,
    pub pre_text: String,
    pub post_text: String,
    pub table: String,
    /// Object keyed by `text_<i>` / `table_<i>`, or an array of such keys.
    pub evidence: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            question: "qa.question".into(),
            program: "qa.program".into(),
            answer: "qa.exe_ans".into(),
            pre_text: "pre_text".into(),
            post_text: "post_text".into(),
            table: "table".into(),
            evidence: "qa.gold_inds".into(),
        }
    }
}

fn get_path<'v>(value: &'v Value, path: &str) -> Option<&'v Value> {
    path.split('.').try_fold(value, |v, key| v.get(key))
}

fn set_path(value: &mut Value, path: &str, new: Value) {
    let mut keys = path.split('.').peekable();
    let mut cursor = value;
    while let Some(key) = keys.next() {
        let object = cursor.as_object_mut().expect("intermediate path segments are objects");
        if keys.peek().is_none() {
            object.insert(key.to_string(), new);
            return;
        }
        cursor = object.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectKind {
    SchemaMismatch,
    UnparsableProgram,
    DanglingEvidence,
    UnparsableAnswer,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position of the record in the source (array index or line number - 1).
    pub index: usize,
    pub id: Option<String>,
    pub kind: RejectKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub id: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

pub struct Ingested {
    pub repository: CaseRepository,
    pub report: IngestReport,
}

pub fn ingest(path: impl AsRef<Path>, map: &FieldMap) -> Result<Ingested, IngestError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    ingest_str(&text, map)
}

/// Ingests a JSON array of records, or one JSON record per line.
pub fn ingest_str(text: &str, map: &FieldMap) -> Result<Ingested, IngestError> {
    let mut report = IngestReport::default();
    let raw: Vec<(usize, Result<Value, String>)> = if text.trim_start().starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(text).map_err(|e| IngestError::SchemaMismatch(e.to_string()))?;
        values.into_iter().map(Ok).enumerate().collect()
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| (i, serde_json::from_str(line).map_err(|e| e.to_string())))
            .collect()
    };

    let mut records: Vec<CaseRecord> = Vec::with_capacity(raw.len());
    let mut seen: HashMap<String, ()> = HashMap::new();
    for (index, value) in raw {
        report.total += 1;
        let outcome = value
            .map_err(|detail| (None, RejectKind::SchemaMismatch, detail))
            .and_then(|v| record_from_json(&v, map, &mut report.warnings));
        match outcome {
            Ok(record) => {
                if seen.insert(record.id.clone(), ()).is_some() {
                    report.rejected.push(Rejection {
                        index,
                        id: Some(record.id.clone()),
                        kind: RejectKind::DuplicateId,
                        detail: "id already ingested".into(),
                    });
                } else {
                    records.push(record);
                }
            }
            Err((id, kind, detail)) => report.rejected.push(Rejection { index, id, kind, detail }),
        }
    }
    report.accepted = records.len();
    let repository = CaseRepository::new(records).expect("duplicate ids were rejected");
    Ok(Ingested { repository, report })
}

type RecordError = (Option<String>, RejectKind, String);

fn record_from_json(value: &Value, map: &FieldMap, warnings: &mut Vec<IngestWarning>) -> Result<CaseRecord, RecordError> {
    let id = get_path(value, &map.id).and_then(value_as_id);
    let fail = |kind: RejectKind, detail: String| (id.clone(), kind, detail);
    let field = |path: &str| get_path(value, path).ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("missing `{path}`")));
    let string_field = |path: &str| {
        field(path)?.as_str().map(str::to_string).ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("`{path}` is not a string")))
    };
    let strings_field = |path: &str| -> Result<Vec<String>, RecordError> {
        let items = field(path)?.as_array().ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("`{path}` is not an array")))?;
        items
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("`{path}` holds a non-string")))
    };

    let id = id.clone().ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("missing or invalid `{}`", map.id)))?;
    let question = string_field(&map.question)?;
    let program_text = string_field(&map.program)?;
    let program = parse_program(&program_text).map_err(|e| fail(RejectKind::UnparsableProgram, e.to_string()))?;
    let raw_answer = field(&map.answer)?.clone();
    let exec_answer = ExecResult::from_json(&raw_answer)
        .ok_or_else(|| fail(RejectKind::UnparsableAnswer, format!("cannot read answer {raw_answer}")))?;
    let pre_text = strings_field(&map.pre_text)?;
    let post_text = strings_field(&map.post_text)?;
    let grid = field(&map.table)?
        .as_array()
        .and_then(|rows| {
            rows.iter()
                .map(|row| row.as_array().and_then(|cells| cells.iter().map(|c| c.as_str().map(str::to_string)).collect()))
                .collect::<Option<Vec<Vec<String>>>>()
        })
        .ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("`{}` is not a grid of strings", map.table)))?;
    let (table, repairs) = TableData::from_grid(&grid);
    for row in repairs.ragged_rows {
        warnings.push(IngestWarning { id: id.clone(), detail: format!("table row {row} padded or truncated to header width") });
    }
    for header in repairs.duplicate_row_headers {
        warnings.push(IngestWarning { id: id.clone(), detail: format!("duplicate table row header `{header}`") });
    }

    let raw_evidence = get_path(value, &map.evidence).cloned();
    let keys: Vec<String> = match &raw_evidence {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Object(object)) => object.keys().cloned().collect(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<_>>()
            .ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("`{}` holds a non-string", map.evidence)))?,
        Some(other) => return Err(fail(RejectKind::SchemaMismatch, format!("`{}` has unexpected shape {other}", map.evidence))),
    };
    let mut record = CaseRecord {
        id,
        question,
        program,
        program_text,
        exec_answer,
        raw_answer,
        pre_text,
        post_text,
        table,
        gold_evidence: BTreeSet::new(),
        raw_evidence,
    };
    for key in keys {
        let evidence = EvidenceRef::parse(&key)
            .ok_or_else(|| fail(RejectKind::SchemaMismatch, format!("unrecognized evidence key `{key}`")))?;
        if !record.evidence_resolves(evidence) {
            return Err(fail(RejectKind::DanglingEvidence, format!("`{key}` does not exist in the document")));
        }
        record.gold_evidence.insert(evidence);
    }
    Ok(record)
}

fn value_as_id(value: &Value) -> Option<String> {
    match value {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearizeMode {
    /// One sentence per non-empty cell.
    #[default]
    Cell,
    /// One sentence per row, covering all its non-empty cells.
    Row,
}

impl std::str::FromStr for LinearizeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cell" => Ok(LinearizeMode::Cell),
            "row" => Ok(LinearizeMode::Row),
            other => Err(format!("unknown linearization `{other}`; expected cell or row")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linearization {
    pub sentences: Vec<String>,
    pub skipped_empty: usize,
}

fn cell_sentence(row: &str, column: &str, cell: &str) -> String {
    format!("the {} of {} was {}", row.trim(), column.trim(), cell.trim())
}

fn row_sentence(row: &TableRow, headers: &[String]) -> Option<String> {
    let parts: Vec<String> = row
        .cells
        .iter()
        .zip(headers)
        .filter(|(cell, _)| !cell.trim().is_empty())
        .map(|(cell, column)| cell_sentence(&row.header, column, cell))
        .collect();
    (!parts.is_empty()).then(|| parts.join(" ; "))
}

/// Renders table cells as sentences, row-major.
pub fn linearize_table(table: &TableData, mode: LinearizeMode) -> Linearization {
    let mut out = Linearization::default();
    for row in &table.rows {
        let empty = row.cells.iter().filter(|c| c.trim().is_empty()).count();
        out.skipped_empty += empty;
        match mode {
            LinearizeMode::Cell => out.sentences.extend(
                row.cells
                    .iter()
                    .zip(&table.column_headers)
                    .filter(|(cell, _)| !cell.trim().is_empty())
                    .map(|(cell, column)| cell_sentence(&row.header, column, cell)),
            ),
            LinearizeMode::Row => out.sentences.extend(row_sentence(row, &table.column_headers)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTypeCounts {
    pub text_only: usize,
    pub table_only: usize,
    pub both: usize,
    /// No evidence to classify by.
    pub unclassified: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionTypeFractions {
    pub text_only: f64,
    pub table_only: f64,
    pub both: f64,
    pub unclassified: f64,
}

impl QuestionTypeCounts {
    fn add(&mut self, text: bool, table: bool) {
        match (text, table) {
            (true, false) => self.text_only += 1,
            (false, true) => self.table_only += 1,
            (true, true) => self.both += 1,
            (false, false) => self.unclassified += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.text_only + self.table_only + self.both + self.unclassified
    }

    pub fn fractions(&self) -> QuestionTypeFractions {
        let t = self.total().max(1) as f64;
        QuestionTypeFractions {
            text_only: self.text_only as f64 / t,
            table_only: self.table_only as f64 / t,
            both: self.both as f64 / t,
            unclassified: self.unclassified as f64 / t,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub one: usize,
    pub two: usize,
    pub three_plus: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFractions {
    pub one: f64,
    pub two: f64,
    pub three_plus: f64,
}

impl StepCounts {
    pub fn total(&self) -> usize {
        self.one + self.two + self.three_plus
    }

    pub fn fractions(&self) -> StepFractions {
        let t = self.total().max(1) as f64;
        StepFractions { one: self.one as f64 / t, two: self.two as f64 / t, three_plus: self.three_plus as f64 / t }
    }
}

/// Queries bucketed by how many gold cases they have.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageHistogram {
    pub queries: usize,
    pub none: usize,
    pub fewer_than_ten: usize,
    pub ten_or_more: usize,
    pub none_fraction: f64,
    pub fewer_than_ten_fraction: f64,
    pub ten_or_more_fraction: f64,
}

impl CoverageHistogram {
    pub fn from_gold_sets(sets: &[GoldCaseSet]) -> Self {
        let mut h = CoverageHistogram { queries: sets.len(), ..Default::default() };
        for set in sets {
            match set.gold.len() {
                0 => h.none += 1,
                1..=9 => h.fewer_than_ten += 1,
                _ => h.ten_or_more += 1,
            }
        }
        let t = h.queries.max(1) as f64;
        h.none_fraction = h.none as f64 / t;
        h.fewer_than_ten_fraction = h.fewer_than_ten as f64 / t;
        h.ten_or_more_fraction = h.ten_or_more as f64 / t;
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: usize,
    /// Classified by where the gold evidence lies.
    pub question_types: QuestionTypeCounts,
    pub question_type_fractions: QuestionTypeFractions,
    /// Diagnostic: classified by where the program's literal operands occur.
    pub operand_question_types: QuestionTypeCounts,
    pub operand_question_type_fractions: QuestionTypeFractions,
    pub steps: StepCounts,
    pub step_fractions: StepFractions,
    pub coverage: Option<CoverageHistogram>,
}

pub fn compute_stats(repo: &CaseRepository, gold_sets: Option<&[GoldCaseSet]>) -> CorpusStats {
    let mut question_types = QuestionTypeCounts::default();
    let mut operand_types = QuestionTypeCounts::default();
    let mut steps = StepCounts::default();
    for record in repo {
        let text = record.gold_evidence.iter().any(|e| matches!(e, EvidenceRef::Text(_)));
        let table = record.gold_evidence.iter().any(|e| matches!(e, EvidenceRef::TableRow(_)));
        question_types.add(text, table);
        let (text, table) = operand_sources(record);
        operand_types.add(text, table);
        match record.program.len() {
            1 => steps.one += 1,
            2 => steps.two += 1,
            _ => steps.three_plus += 1,
        }
    }
    CorpusStats {
        records: repo.len(),
        question_types,
        question_type_fractions: question_types.fractions(),
        operand_question_types: operand_types,
        operand_question_type_fractions: operand_types.fractions(),
        steps,
        step_fractions: steps.fractions(),
        coverage: gold_sets.map(CoverageHistogram::from_gold_sets),
    }
}

/// Surface number of a token or cell, ignoring currency, separators,
/// parentheses and percent signs.
fn surface_number(text: &str) -> Option<f64> {
    let cleaned: String =
        text.chars().filter(|c| !matches!(c, '$' | ',' | '(' | ')' | '%') && !c.is_whitespace()).collect();
    let cleaned = cleaned.trim_end_matches(['.', ';', ':']);
    crate::dsl::parse_number_literal(cleaned)
}

/// Whether the program's literal operands are found in the text and/or the
/// table. Table ops count as table use.
fn operand_sources(record: &CaseRecord) -> (bool, bool) {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let table_numbers: Vec<f64> = record.table.rows.iter().flat_map(|r| &r.cells).filter_map(|c| surface_number(c)).collect();
    let text_numbers: Vec<f64> =
        record.sentences().flat_map(|s| s.split_whitespace()).filter_map(surface_number).collect();
    let (mut text, mut table) = (false, false);
    for step in record.program.steps() {
        if step.op.is_table() {
            table = true;
            continue;
        }
        for arg in &step.args {
            if let Operand::Number { raw, .. } = arg {
                let Some(value) = surface_number(raw) else { continue };
                if table_numbers.iter().any(|&n| close(n, value)) {
                    table = true;
                } else if text_numbers.iter().any(|&n| close(n, value)) {
                    text = true;
                }
            }
        }
    }
    (text, table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecall {
    pub k: usize,
    pub mean_recall: f64,
    pub evaluated: usize,
    /// Records without gold evidence, left out of the mean.
    pub excluded_empty: usize,
}

/// Mean fraction of each record's gold evidence found among the top-k units
/// its own document, retrieved lexically with the question as query.
pub fn evidence_recall(repo: &CaseRepository, mode: IndexMode, params: &IndexParams, k: usize) -> EvidenceRecall {
    let mut total = 0.0;
    let mut evaluated = 0;
    let mut excluded_empty = 0;
    for record in repo {
        if record.gold_evidence.is_empty() {
            excluded_empty += 1;
            continue;
        }
        let units = record.document_units();
        let index = CaseIndex::build_text(units.iter().map(|(e, text)| (e.to_string(), text.as_str())), mode, params);
        let hits = match index.and_then(|idx| idx.rank_all(Query::Text(&record.question), None)) {
            Ok(ranked) => ranked
                .iter()
                .take(k)
                .filter(|r| EvidenceRef::parse(&r.case_id).is_some_and(|e| record.gold_evidence.contains(&e)))
                .count(),
            Err(_) => 0,
        };
        total += hits as f64 / record.gold_evidence.len() as f64;
        evaluated += 1;
    }
    EvidenceRecall { k, mean_recall: if evaluated == 0 { 0.0 } else { total / evaluated as f64 }, evaluated, excluded_empty }
}
