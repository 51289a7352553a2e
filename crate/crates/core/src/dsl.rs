//! The operation language used by gold and predicted programs.
//!
//! A program is a comma-separated list of binary steps such as
//! `divide(10, 2), divide(9, 3), subtract(#0, #1)`. Arguments are number
//! literals, `const_<n>` tokens, step references `#k` to an earlier step, or
//! free text (table row names, and the `none` placeholder of table ops).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Scalar,
    Comparison,
    Table,
}

/// The closed operation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpCode {
    Add,
    Subtract,
    Multiply,
    Divide,
    Exp,
    Greater,
    TableSum,
    TableAverage,
    TableMax,
    TableMin,
}

impl OpCode {
    pub const ALL: [OpCode; 10] = [
        OpCode::Add,
        OpCode::Subtract,
        OpCode::Multiply,
        OpCode::Divide,
        OpCode::Exp,
        OpCode::Greater,
        OpCode::TableSum,
        OpCode::TableAverage,
        OpCode::TableMax,
        OpCode::TableMin,
    ];

    /// Canonical lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            OpCode::Add => "add",
            OpCode::Subtract => "subtract",
            OpCode::Multiply => "multiply",
            OpCode::Divide => "divide",
            OpCode::Exp => "exp",
            OpCode::Greater => "greater",
            OpCode::TableSum => "table-sum",
            OpCode::TableAverage => "table-average",
            OpCode::TableMax => "table-max",
            OpCode::TableMin => "table-min",
        }
    }

    /// Case-insensitive lookup. Table ops accept both `table-sum` and the
    /// underscore spelling `table_sum` found in the public data release.
    pub fn from_name(name: &str) -> Option<OpCode> {
        let lowered = name.trim().to_ascii_lowercase().replace('_', "-");
        OpCode::ALL.into_iter().find(|op| op.name() == lowered)
    }

    pub fn arity(self) -> usize {
        2
    }

    pub fn kind(self) -> OpKind {
        match self {
            OpCode::Greater => OpKind::Comparison,
            OpCode::TableSum | OpCode::TableAverage | OpCode::TableMax | OpCode::TableMin => {
                OpKind::Table
            }
            _ => OpKind::Scalar,
        }
    }

    pub fn is_table(self) -> bool {
        self.kind() == OpKind::Table
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, OpCode::Add | OpCode::Multiply)
    }
}

impl fmt::Display for OpCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    /// A numeric literal. `value` is the number written on the surface with
    /// `$` and thousands separators removed; a trailing `%` is kept in `raw`
    /// and only applied when the program is executed.
    Number { value: f64, raw: String },
    /// `const_<n>`, or `const_m1` for minus one.
    Constant { name: String, value: f64 },
    /// `#k`, the result of step `k`.
    StepRef(usize),
    /// Anything else, e.g. a table row name or `none`.
    Text(String),
}

impl Operand {
    /// Classifies a single argument token.
    pub fn from_token(token: &str) -> Operand {
        let token = token.trim();
        if let Some(digits) = token.strip_prefix('#') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(index) = digits.parse() {
                    return Operand::StepRef(index);
                }
            }
        }
        let lowered = token.to_ascii_lowercase();
        if let Some(value) = constant_value(&lowered) {
            return Operand::Constant { name: lowered, value };
        }
        if let Some(value) = parse_number_literal(token) {
            return Operand::Number { value, raw: token.to_string() };
        }
        Operand::Text(token.to_string())
    }

    /// Value used by the executor, with percent literals scaled by 1/100.
    /// `None` for step references and text.
    pub fn numeric_value(&self) -> Option<f64> {
        match self {
            Operand::Number { value, raw } => Some(if raw.ends_with('%') { value / 100.0 } else { *value }),
            Operand::Constant { value, .. } => Some(*value),
            Operand::StepRef(_) | Operand::Text(_) => None,
        }
    }

    pub fn is_step_ref(&self) -> bool {
        matches!(self, Operand::StepRef(_))
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Number { raw, .. } => f.write_str(raw),
            Operand::Constant { name, .. } => f.write_str(name),
            Operand::StepRef(index) => write!(f, "#{index}"),
            Operand::Text(text) => f.write_str(text),
        }
    }
}

/// Value of a `const_*` token, if the token is one.
pub fn constant_value(token: &str) -> Option<f64> {
    let suffix = token.strip_prefix("const_")?;
    if suffix == "m1" {
        return Some(-1.0);
    }
    if suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return None;
    }
    suffix.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a literal such as `1,234.5`, `$ 12`, `-3` or `5%`, returning the
/// number without percent scaling.
pub fn parse_number_literal(token: &str) -> Option<f64> {
    let mut cleaned: String = token.chars().filter(|c| !matches!(c, '$' | ',') && !c.is_whitespace()).collect();
    if cleaned.ends_with('%') {
        cleaned.pop();
    }
    let first = cleaned.chars().next()?;
    if !(first.is_ascii_digit() || matches!(first, '-' | '+' | '.')) {
        return None;
    }
    if !cleaned.chars().all(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E')) {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub op: OpCode,
    pub args: [Operand; 2],
}

impl Step {
    pub fn new(op: OpCode, first: Operand, second: Operand) -> Self {
        Step { op, args: [first, second] }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.op, self.args[0], self.args[1])
    }
}

/// A validated, non-empty sequence of steps whose step references all point
/// backwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Step>", into = "Vec<Step>")]
pub struct Program {
    steps: Vec<Step>,
}

impl Program {
    pub fn new(steps: Vec<Step>) -> Result<Self, ParseError> {
        if steps.is_empty() {
            return Err(ParseError::EmptyProgram);
        }
        for (index, step) in steps.iter().enumerate() {
            for arg in &step.args {
                if let Operand::StepRef(target) = arg {
                    if *target >= index {
                        return Err(ParseError::ForwardStepReference { step: index, reference: *target, position: 0 });
                    }
                }
            }
            if step.op.is_table() && !matches!(step.args[0], Operand::Text(_)) {
                return Err(ParseError::MalformedSyntax {
                    message: format!("{} expects a table row name as its first argument", step.op),
                    position: 0,
                });
            }
        }
        Ok(Program { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_steps(self) -> Vec<Step> {
        self.steps
    }
}

impl TryFrom<Vec<Step>> for Program {
    type Error = ParseError;

    fn try_from(steps: Vec<Step>) -> Result<Self, Self::Error> {
        Program::new(steps)
    }
}

impl From<Program> for Vec<Step> {
    fn from(program: Program) -> Self {
        program.steps
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (index, step) in self.steps.iter().enumerate() {
            if index > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}

/// Parse failures. `position` is a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown operation `{name}` at byte {position}")]
    UnknownOperation { name: String, position: usize },
    #[error("malformed program at byte {position}: {message}")]
    MalformedSyntax { message: String, position: usize },
    #[error("step {step} references #{reference}, which is not an earlier step (byte {position})")]
    ForwardStepReference { step: usize, reference: usize, position: usize },
    #[error("empty program")]
    EmptyProgram,
}

impl ParseError {
    /// Short stable name, used in reports.
    pub fn class(&self) -> &'static str {
        match self {
            ParseError::UnknownOperation { .. } => "UnknownOperation",
            ParseError::MalformedSyntax { .. } => "MalformedSyntax",
            ParseError::ForwardStepReference { .. } => "ForwardStepReference",
            ParseError::EmptyProgram => "EmptyProgram",
        }
    }
}

fn malformed(message: impl Into<String>, position: usize) -> ParseError {
    ParseError::MalformedSyntax { message: message.into(), position }
}

/// Parses a program string.
///
/// Operation names are case-insensitive. Arguments are separated by a comma
/// followed by whitespace, so `1,234` stays a single number; a bare comma is
/// accepted when it is the only one. For table ops the split happens at the
/// last separator, which lets row names contain commas.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let bytes = text.as_bytes();
    let mut pos = skip_ws(bytes, 0);
    if pos == bytes.len() {
        return Err(ParseError::EmptyProgram);
    }
    let mut steps = Vec::new();
    loop {
        let name_start = pos;
        while pos < bytes.len() && bytes[pos] != b'(' && bytes[pos] != b',' && bytes[pos] != b')' {
            pos += 1;
        }
        let name = text[name_start..pos].trim();
        if pos == bytes.len() || bytes[pos] != b'(' {
            if name.is_empty() {
                return Err(malformed("expected an operation name", name_start));
            }
            return Err(malformed(format!("expected `(` after `{name}`"), pos));
        }
        let op = OpCode::from_name(name)
            .ok_or_else(|| ParseError::UnknownOperation { name: name.to_string(), position: name_start })?;
        let open = pos;
        let close = matching_paren(bytes, open).ok_or_else(|| malformed("unbalanced parentheses", open))?;
        let body_start = open + 1;
        let body = &text[body_start..close];
        let (first, second, second_offset) = split_args(body, op.is_table())
            .ok_or_else(|| malformed(format!("{op} takes exactly {} arguments", op.arity()), body_start))?;
        let step_index = steps.len();
        let args = [
            parse_arg(op, 0, first, step_index, body_start)?,
            parse_arg(op, 1, second, step_index, body_start + second_offset)?,
        ];
        steps.push(Step { op, args });

        pos = skip_ws(bytes, close + 1);
        if pos == bytes.len() {
            break;
        }
        if bytes[pos] != b',' {
            return Err(malformed("expected `,` between steps", pos));
        }
        pos = skip_ws(bytes, pos + 1);
        if pos == bytes.len() {
            return Err(malformed("trailing `,`", pos));
        }
    }
    Program::new(steps)
}

fn parse_arg(op: OpCode, slot: usize, token: &str, step: usize, position: usize) -> Result<Operand, ParseError> {
    let trimmed = token.trim();
    let position = position + (token.len() - token.trim_start().len());
    if trimmed.is_empty() {
        return Err(malformed(format!("empty argument to {op}"), position));
    }
    if op.is_table() && slot == 0 {
        return Ok(Operand::Text(trimmed.to_string()));
    }
    if trimmed.contains(['(', ')']) {
        return Err(malformed(format!("nested expression `{trimmed}` in {op}"), position));
    }
    let operand = Operand::from_token(trimmed);
    if let Operand::StepRef(reference) = operand {
        if reference >= step {
            return Err(ParseError::ForwardStepReference { step, reference, position });
        }
    }
    if op.is_table() {
        if let Operand::StepRef(_) = operand {
            return Err(malformed(format!("{op} cannot take a step reference"), position));
        }
    }
    Ok(operand)
}

fn skip_ws(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

fn matching_paren(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (offset, &b) in bytes[open..].iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + offset);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits `a, b` into its two arguments. Returns the byte offset of the
/// second argument within `body`.
fn split_args(body: &str, split_last: bool) -> Option<(&str, &str, usize)> {
    let bytes = body.as_bytes();
    let mut depth = 0i32;
    let mut spaced = Vec::new();
    let mut bare = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b',' if depth == 0 => {
                if bytes.get(i + 1).is_some_and(|n| n.is_ascii_whitespace()) {
                    spaced.push(i);
                } else {
                    bare.push(i);
                }
            }
            _ => {}
        }
    }
    let at = match (spaced.len(), bare.len()) {
        (1, _) => spaced[0],
        (0, 1) => bare[0],
        (n, _) if n > 1 && split_last => spaced[n - 1],
        (0, n) if n > 1 && split_last => bare[n - 1],
        _ => return None,
    };
    Some((&body[..at], &body[at + 1..], at + 1))
}

/// Canonical text: lowercase operation names, `", "` separators.
pub fn serialize_program(program: &Program) -> String {
    program.to_string()
}

/// Per-step operation codes, in order.
pub fn op_sequence(program: &Program) -> Vec<OpCode> {
    program.steps.iter().map(|s| s.op).collect()
}

/// All argument tokens in step order, two per step.
pub fn arg_sequence(program: &Program) -> Vec<String> {
    program.steps.iter().flat_map(|s| s.args.iter().map(|a| a.to_string())).collect()
}
