//! Program execution against a document table, and answer comparison.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{OpCode, Operand, Program};

/// A table row: its header text and raw cell texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub header: String,
    pub cells: Vec<String>,
}

/// A document table. The first grid row supplies the column headers; every
/// later row starts with its row header.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableData {
    /// Text of the top-left grid cell, kept so the grid can be rebuilt.
    pub corner: String,
    pub column_headers: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("row {row} (`{header}`) has {found} cells, expected {expected}")]
    RaggedRow { row: usize, header: String, found: usize, expected: usize },
}

/// Irregularities repaired while building a table from a raw grid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRepairs {
    /// Grid row indices padded or truncated to the header width.
    pub ragged_rows: Vec<usize>,
    /// Row headers appearing more than once (lookup picks the first).
    pub duplicate_row_headers: Vec<String>,
}

impl TableData {
    /// Builds a table, rejecting rows whose width differs from the header.
    pub fn new(column_headers: Vec<String>, rows: Vec<TableRow>) -> Result<Self, TableError> {
        for (i, row) in rows.iter().enumerate() {
            if row.cells.len() != column_headers.len() {
                return Err(TableError::RaggedRow {
                    row: i + 1,
                    header: row.header.clone(),
                    found: row.cells.len(),
                    expected: column_headers.len(),
                });
            }
        }
        Ok(TableData { corner: String::new(), column_headers, rows })
    }

    /// Builds a table from a raw grid, padding short rows with empty cells and
    /// truncating long ones. Repairs are reported rather than hidden.
    pub fn from_grid(grid: &[Vec<String>]) -> (Self, TableRepairs) {
        let mut repairs = TableRepairs::default();
        let Some((header, body)) = grid.split_first() else {
            return (TableData::default(), repairs);
        };
        let corner = header.first().cloned().unwrap_or_default();
        let column_headers: Vec<String> = header.iter().skip(1).cloned().collect();
        let width = column_headers.len();
        let mut seen = std::collections::HashSet::new();
        let rows = body
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                let header = raw.first().cloned().unwrap_or_default();
                let mut cells: Vec<String> = raw.iter().skip(1).cloned().collect();
                if cells.len() != width {
                    repairs.ragged_rows.push(i + 1);
                    cells.resize(width, String::new());
                }
                if !seen.insert(normalize_header(&header)) && !repairs.duplicate_row_headers.contains(&header) {
                    repairs.duplicate_row_headers.push(header.clone());
                }
                TableRow { header, cells }
            })
            .collect();
        (TableData { corner, column_headers, rows }, repairs)
    }

    /// The raw grid, header row first.
    pub fn to_grid(&self) -> Vec<Vec<String>> {
        let mut grid = Vec::with_capacity(self.rows.len() + 1);
        if self.column_headers.is_empty() && self.rows.is_empty() && self.corner.is_empty() {
            return grid;
        }
        grid.push(std::iter::once(self.corner.clone()).chain(self.column_headers.iter().cloned()).collect());
        for row in &self.rows {
            grid.push(std::iter::once(row.header.clone()).chain(row.cells.iter().cloned()).collect());
        }
        grid
    }

    /// First row whose header matches `name`, ignoring case and surrounding
    /// whitespace.
    pub fn find_row(&self, name: &str) -> Option<&TableRow> {
        let wanted = normalize_header(name);
        self.rows.iter().find(|row| normalize_header(&row.header) == wanted)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn normalize_header(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Parses a table cell into a number.
///
/// Strips `$`, thousands separators and whitespace. A cell wrapped entirely in
/// parentheses is negative (`(5)` is -5). A number followed by a
/// parenthesized annotation, as in `5.6 ( 4.3 )`, yields the leading number.
/// A trailing `%` divides by 100.
pub fn parse_cell(cell: &str) -> Option<f64> {
    let compact: String = cell.chars().filter(|c| !matches!(c, '$' | ',') && !c.is_whitespace()).collect();
    if compact.is_empty() {
        return None;
    }
    if let Some(inner) = compact.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
        return parse_scaled(inner).map(|v| -v);
    }
    let leading = match compact.find('(') {
        Some(0) => return None,
        Some(at) => &compact[..at],
        None => compact.as_str(),
    };
    parse_scaled(leading)
}

fn parse_scaled(text: &str) -> Option<f64> {
    let (digits, scale) = match text.strip_suffix('%') {
        Some(d) => (d, 0.01),
        None => (text, 1.0),
    };
    crate::dsl::parse_number_literal(digits).map(|v| v * scale)
}

/// The value a program evaluates to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExecResult {
    Numeric(f64),
    Boolean(bool),
}

impl ExecResult {
    /// Reads a stored answer: a JSON number, a numeric string, or yes/no.
    pub fn from_json(value: &serde_json::Value) -> Option<ExecResult> {
        match value {
            serde_json::Value::Number(n) => n.as_f64().map(ExecResult::Numeric),
            serde_json::Value::Bool(b) => Some(ExecResult::Boolean(*b)),
            serde_json::Value::String(s) => ExecResult::parse(s),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Option<ExecResult> {
        match text.trim().to_ascii_lowercase().as_str() {
            "yes" | "true" => Some(ExecResult::Boolean(true)),
            "no" | "false" => Some(ExecResult::Boolean(false)),
            other => parse_cell(other).map(ExecResult::Numeric),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ExecResult::Numeric(v) => Some(*v),
            ExecResult::Boolean(_) => None,
        }
    }
}

impl fmt::Display for ExecResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecResult::Numeric(v) => write!(f, "{v}"),
            ExecResult::Boolean(true) => f.write_str("yes"),
            ExecResult::Boolean(false) => f.write_str("no"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("step {step}: division by zero")]
    DivisionByZero { step: usize },
    #[error("step {step}: {op} needs a table but none was supplied")]
    MissingTable { step: usize, op: OpCode },
    #[error("step {step}: no table row named `{row}`")]
    UnknownTableRow { step: usize, row: String },
    #[error("step {step}: cell `{cell}` in row `{row}` is not numeric")]
    NonNumericCell { step: usize, row: String, cell: String },
    #[error("step {step}: the boolean result of step {source_step} is used as a number")]
    BooleanIntermediate { step: usize, source_step: usize },
    #[error("step {step}: argument `{token}` is not numeric")]
    NonNumericOperand { step: usize, token: String },
    #[error("step {step}: result is not finite")]
    NonFinite { step: usize },
}

impl ExecError {
    /// Short stable name, used to classify failures in reports.
    pub fn class(&self) -> &'static str {
        match self {
            ExecError::DivisionByZero { .. } => "DivisionByZero",
            ExecError::MissingTable { .. } => "MissingTable",
            ExecError::UnknownTableRow { .. } => "UnknownTableRow",
            ExecError::NonNumericCell { .. } => "NonNumericCell",
            ExecError::BooleanIntermediate { .. } => "BooleanIntermediate",
            ExecError::NonNumericOperand { .. } => "NonNumericOperand",
            ExecError::NonFinite { .. } => "NonFinite",
        }
    }
}

/// Runs the program's steps in order and returns the final step's value.
pub fn execute(program: &Program, table: Option<&TableData>) -> Result<ExecResult, ExecError> {
    let mut results: Vec<ExecResult> = Vec::with_capacity(program.len());
    for (index, step) in program.steps().iter().enumerate() {
        let value = if step.op.is_table() {
            let table = table.ok_or(ExecError::MissingTable { step: index, op: step.op })?;
            table_aggregate(index, step.op, &step.args[0], table)?
        } else {
            let lhs = scalar_operand(index, &step.args[0], &results)?;
            let rhs = scalar_operand(index, &step.args[1], &results)?;
            apply_scalar(index, step.op, lhs, rhs)?
        };
        results.push(value);
    }
    Ok(*results.last().expect("programs are non-empty"))
}

fn scalar_operand(step: usize, operand: &Operand, results: &[ExecResult]) -> Result<f64, ExecError> {
    match operand {
        Operand::StepRef(source) => match results[*source] {
            ExecResult::Numeric(v) => Ok(v),
            ExecResult::Boolean(_) => Err(ExecError::BooleanIntermediate { step, source_step: *source }),
        },
        other => other.numeric_value().ok_or_else(|| ExecError::NonNumericOperand { step, token: other.to_string() }),
    }
}

fn apply_scalar(step: usize, op: OpCode, lhs: f64, rhs: f64) -> Result<ExecResult, ExecError> {
    let value = match op {
        OpCode::Add => lhs + rhs,
        OpCode::Subtract => lhs - rhs,
        OpCode::Multiply => lhs * rhs,
        OpCode::Divide => {
            if rhs == 0.0 {
                return Err(ExecError::DivisionByZero { step });
            }
            lhs / rhs
        }
        OpCode::Exp => lhs.powf(rhs),
        OpCode::Greater => return Ok(ExecResult::Boolean(lhs > rhs)),
        _ => unreachable!("table ops are handled separately"),
    };
    if value.is_finite() {
        Ok(ExecResult::Numeric(value))
    } else {
        Err(ExecError::NonFinite { step })
    }
}

fn table_aggregate(step: usize, op: OpCode, row_name: &Operand, table: &TableData) -> Result<ExecResult, ExecError> {
    let name = row_name.to_string();
    let row = table.find_row(&name).ok_or_else(|| ExecError::UnknownTableRow { step, row: name.clone() })?;
    let values = row
        .cells
        .iter()
        .map(|cell| parse_cell(cell).ok_or_else(|| ExecError::NonNumericCell { step, row: name.clone(), cell: cell.clone() }))
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err(ExecError::NonNumericCell { step, row: name, cell: String::new() });
    }
    let value = match op {
        OpCode::TableSum => values.iter().sum(),
        OpCode::TableAverage => values.iter().sum::<f64>() / values.len() as f64,
        OpCode::TableMax => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        OpCode::TableMin => values.iter().copied().fold(f64::INFINITY, f64::min),
        _ => unreachable!("scalar ops are handled separately"),
    };
    Ok(ExecResult::Numeric(value))
}

/// Answer comparison settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Also accept the gold value scaled by 100 or by 1/100.
    pub scale_lenient: bool,
}

impl Default for Tolerance {
    /// `abs_tol` covers answers stored rounded to five decimals.
    fn default() -> Self {
        Tolerance { rel_tol: 1e-5, abs_tol: 1e-5, scale_lenient: false }
    }
}

impl Tolerance {
    pub fn strict(rel_tol: f64, abs_tol: f64) -> Self {
        Tolerance { rel_tol, abs_tol, scale_lenient: false }
    }

    pub fn lenient(self) -> Self {
        Tolerance { scale_lenient: true, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("cannot compare {predicted} with {gold}: one is boolean and the other numeric")]
pub struct TypeMismatch {
    pub predicted: ExecResult,
    pub gold: ExecResult,
}

/// Whether a predicted value matches the gold answer.
pub fn answers_match(predicted: ExecResult, gold: ExecResult, tolerance: Tolerance) -> Result<bool, TypeMismatch> {
    match (predicted, gold) {
        (ExecResult::Boolean(p), ExecResult::Boolean(g)) => Ok(p == g),
        (ExecResult::Numeric(p), ExecResult::Numeric(g)) => {
            let close = |target: f64| (p - target).abs() <= tolerance.abs_tol.max(tolerance.rel_tol * target.abs());
            Ok(close(g) || (tolerance.scale_lenient && (close(g * 100.0) || close(g / 100.0))))
        }
        _ => Err(TypeMismatch { predicted, gold }),
    }
}
