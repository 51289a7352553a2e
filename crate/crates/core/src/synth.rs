//! Random programs, equivalence-preserving rewrites and synthetic corpora in
//! the public release's JSON layout. Used by tests and benchmarks when the
//! real dataset is not at hand.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::dsl::{OpCode, Operand, Program, Step};
use crate::executor::{TableData, TableRow};

pub const ROW_NAMES: &[&str] = &[
    "net revenue",
    "operating income",
    "total debt",
    "cash and cash equivalents",
    "interest expense",
    "depreciation and amortization",
    "capital expenditures",
    "net income",
    "deferred income taxes",
    "goodwill",
    "inventories",
    "accounts receivable",
    "dividends paid",
    "share repurchases",
    "operating lease obligations",
    "long-term debt",
];

const TEXT_METRICS: &[&str] = &[
    "pension expense",
    "restructuring charges",
    "research and development costs",
    "advertising expense",
    "foreign currency losses",
    "stock-based compensation",
    "environmental remediation costs",
    "rental expense",
];

const LITERALS: &[&str] = &["12", "3.5", "5%", "1,234", "0.25", "-4", "100", "7.75", "250", "42"];
const CONSTANTS: &[&str] = &["const_100", "const_1", "const_2", "const_m1", "const_1000"];

fn random_leaf<R: Rng>(rng: &mut R) -> Operand {
    if rng.gen_bool(0.2) {
        Operand::from_token(CONSTANTS.choose(rng).expect("non-empty"))
    } else if rng.gen_bool(0.5) {
        Operand::from_token(LITERALS.choose(rng).expect("non-empty"))
    } else {
        let v: f64 = rng.gen_range(1.0..2000.0);
        Operand::from_token(&format!("{:.1}", v))
    }
}

fn random_scalar_arg<R: Rng>(rng: &mut R, step: usize) -> Operand {
    if step > 0 && rng.gen_bool(0.5) {
        Operand::StepRef(rng.gen_range(0..step))
    } else {
        random_leaf(rng)
    }
}

fn random_step<R: Rng>(rng: &mut R, index: usize, last: bool, rows: &[&str]) -> Step {
    const SCALAR: [OpCode; 5] = [OpCode::Add, OpCode::Subtract, OpCode::Multiply, OpCode::Divide, OpCode::Exp];
    const TABLE: [OpCode; 4] = [OpCode::TableSum, OpCode::TableAverage, OpCode::TableMax, OpCode::TableMin];
    if !rows.is_empty() && rng.gen_bool(0.15) {
        let op = *TABLE.choose(rng).expect("non-empty");
        return Step::new(op, Operand::Text(rows.choose(rng).expect("non-empty").to_string()), Operand::Text("none".into()));
    }
    let op = if last && rng.gen_bool(0.1) { OpCode::Greater } else { *SCALAR.choose(rng).expect("non-empty") };
    let mut first = random_scalar_arg(rng, index);
    let mut second = random_scalar_arg(rng, index);
    if op == OpCode::Exp {
        // keep powers small so results stay finite
        first = Operand::from_token(&format!("{:.2}", rng.gen_range(0.5..3.0)));
        second = Operand::from_token(["2", "3", "0.5", "const_2"].choose(rng).expect("non-empty"));
    }
    Step::new(op, first, second)
}

/// A program of 1 to `max_steps` steps. `greater` only ever appears as the
/// final step; table ops draw row names from `rows` (none when empty).
pub fn random_program<R: Rng>(rng: &mut R, max_steps: usize, rows: &[&str]) -> Program {
    let n = rng.gen_range(1..=max_steps.max(1));
    let steps = (0..n).map(|i| random_step(rng, i, i + 1 == n, rows)).collect();
    Program::new(steps).expect("generator only emits backward references")
}

/// Table with the given row names and `columns` numeric columns.
pub fn random_table<R: Rng>(rng: &mut R, rows: &[&str], columns: usize) -> TableData {
    let headers = (0..columns).map(|c| (2019 - c).to_string()).collect();
    let rows = rows
        .iter()
        .map(|name| TableRow {
            header: name.to_string(),
            cells: (0..columns)
                .map(|_| {
                    let value = round1(rng.gen_range(-500.0..5000.0));
                    format_cell(rng, value)
                })
                .collect(),
        })
        .collect();
    TableData::new(headers, rows).expect("rectangular by construction")
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Renders a value the way report tables do: `$ 1,234.5`, `( 12.3 )` for
/// negatives, plain otherwise.
fn format_cell<R: Rng>(rng: &mut R, value: f64) -> String {
    let body = with_separators(value.abs());
    match (value < 0.0, rng.gen_range(0..3)) {
        (true, _) => format!("( {body} )"),
        (false, 0) => format!("$ {body}"),
        (false, 1) => body,
        _ => format!("{:.1}", value),
    }
}

fn with_separators(value: f64) -> String {
    let text = format!("{value:.1}");
    let (int, frac) = text.split_once('.').expect("one decimal");
    let mut grouped = String::new();
    for (i, c) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    format!("{grouped}.{frac}")
}

fn literal(value: f64) -> String {
    let text = format!("{value:.1}");
    text.strip_suffix(".0").map(str::to_string).unwrap_or(text)
}

/// Rebuilds a program with step `order[i]` of `program` placed at position
/// `i`, rewriting step references. `order` must be a topological order.
fn reorder(program: &Program, order: &[usize]) -> Program {
    let mut position = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let steps = order
        .iter()
        .map(|&old| {
            let step = &program.steps()[old];
            let args = step.args.clone().map(|a| match a {
                Operand::StepRef(r) => Operand::StepRef(position[r]),
                other => other,
            });
            Step { op: step.op, args }
        })
        .collect();
    Program::new(steps).expect("order is topological")
}

fn shift_refs(step: &Step, from: usize) -> Step {
    let args = step.args.clone().map(|a| match a {
        Operand::StepRef(r) if r >= from => Operand::StepRef(r + 1),
        other => other,
    });
    Step { op: step.op, args }
}

fn insert_step(program: &Program, at: usize, step: Step) -> Program {
    let mut steps: Vec<Step> = program.steps()[..at].to_vec();
    steps.push(step);
    steps.extend(program.steps()[at..].iter().map(|s| shift_refs(s, at)));
    Program::new(steps).expect("inserted step only refers backwards")
}

fn alternate_surface(operand: &Operand) -> Option<Operand> {
    match operand {
        Operand::Constant { name, value } => {
            Some(Operand::from_token(&if name == "const_m1" { "-1".to_string() } else { literal(*value) }))
        }
        Operand::Number { value, raw } if raw.ends_with('%') && value.fract() == 0.0 => {
            Some(Operand::from_token(&format!("{}", value / 100.0)))
        }
        Operand::Number { value, raw } if !raw.ends_with('%') && value.fract() == 0.0 && *value >= 1.0 && *value <= 1e6 => {
            Some(Operand::from_token(&format!("const_{}", *value as u64)))
        }
        Operand::Number { value, raw } if *value == -1.0 && !raw.ends_with('%') => Some(Operand::from_token("const_m1")),
        Operand::Text(t) if t != "none" => Some(Operand::Text(format!("  {}  ", t.to_uppercase()))),
        _ => None,
    }
}

/// One random rewrite that keeps the program equivalent: swapping operands
/// of `add`/`multiply`, swapping adjacent independent steps, switching a
/// literal between equivalent spellings, inserting an unused step or a
/// duplicate of an existing step.
pub fn mutate_once<R: Rng>(rng: &mut R, program: &Program) -> Program {
    let steps = program.steps();
    let n = steps.len();
    for _ in 0..16 {
        match rng.gen_range(0..5) {
            0 => {
                let candidates: Vec<usize> = (0..n).filter(|&i| steps[i].op.is_commutative()).collect();
                if let Some(&i) = candidates.choose(rng) {
                    let mut out = steps.to_vec();
                    out[i].args.swap(0, 1);
                    return Program::new(out).expect("same references");
                }
            }
            1 => {
                // never move the final step
                let candidates: Vec<usize> = (0..n.saturating_sub(2))
                    .filter(|&i| !steps[i + 1].args.contains(&Operand::StepRef(i)))
                    .collect();
                if let Some(&i) = candidates.choose(rng) {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.swap(i, i + 1);
                    return reorder(program, &order);
                }
            }
            2 => {
                let slots: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (0..2).map(move |s| (i, s)))
                    .filter(|&(i, s)| alternate_surface(&steps[i].args[s]).is_some())
                    .collect();
                if let Some(&(i, s)) = slots.choose(rng) {
                    let mut out = steps.to_vec();
                    out[i].args[s] = alternate_surface(&out[i].args[s]).expect("filtered");
                    return Program::new(out).expect("same references");
                }
            }
            3 => {
                let at = rng.gen_range(0..n);
                let mut step = random_step(rng, at, false, &[]);
                // unused steps still execute, so they must not be able to fail
                if matches!(step.op, OpCode::Divide | OpCode::Exp) {
                    step.op = OpCode::Multiply;
                }
                return insert_step(program, at, step);
            }
            _ => {
                let i = rng.gen_range(0..n);
                if i + 1 == n {
                    continue;
                }
                let mut out = insert_step(program, i + 1, steps[i].clone()).into_steps();
                for later in out.iter_mut().skip(i + 2) {
                    for arg in later.args.iter_mut() {
                        if *arg == Operand::StepRef(i) && rng.gen_bool(0.5) {
                            *arg = Operand::StepRef(i + 1);
                        }
                    }
                }
                return Program::new(out).expect("copy precedes its users");
            }
        }
    }
    program.clone()
}

/// Applies 1 to `max_mutations` random equivalence-preserving rewrites.
pub fn mutate_equivalent<R: Rng>(rng: &mut R, program: &Program, max_mutations: usize) -> Program {
    let rounds = rng.gen_range(1..=max_mutations.max(1));
    (0..rounds).fold(program.clone(), |p, _| mutate_once(rng, &p))
}

/// Swaps the operands of step `index`.
pub fn swap_operands(program: &Program, index: usize) -> Program {
    let mut steps = program.steps().to_vec();
    steps[index].args.swap(0, 1);
    Program::new(steps).expect("same references")
}

fn round5(v: f64) -> f64 {
    (v * 1e5).round() / 1e5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Change,
    PercentChange,
    Ratio,
    Sum,
    Average,
    RowAverage,
    RowMax,
    Greater,
    GrowthPercent,
    ThreeYearAverage,
    ShareOfTotal,
}

const SHAPES: [(Shape, u32); 11] = [
    (Shape::Change, 14),
    (Shape::PercentChange, 22),
    (Shape::Ratio, 12),
    (Shape::Sum, 10),
    (Shape::Average, 6),
    (Shape::RowAverage, 4),
    (Shape::RowMax, 2),
    (Shape::Greater, 3),
    (Shape::GrowthPercent, 10),
    (Shape::ThreeYearAverage, 8),
    (Shape::ShareOfTotal, 9),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Text,
    Table,
    Both,
}

/// Generates `count` records in the public release's JSON layout, one to
/// three questions per generated report. Answers are computed directly from
/// the generated values and rounded to five decimals, independently of the
/// executor.
pub fn synthetic_corpus<R: Rng>(rng: &mut R, count: usize, id_prefix: &str) -> Vec<Value> {
    let mut out = Vec::with_capacity(count);
    let mut doc = 0;
    while out.len() < count {
        let questions = rng.gen_range(1..=3).min(count - out.len());
        out.extend(Document::generate(rng).questions(rng, &format!("{id_prefix}{doc:05}"), questions));
        doc += 1;
    }
    out
}

/// [`synthetic_corpus`] driven by a ChaCha8 generator seeded with `seed`.
pub fn seeded_corpus(count: usize, seed: u64, id_prefix: &str) -> Vec<Value> {
    synthetic_corpus(&mut ChaCha8Rng::seed_from_u64(seed), count, id_prefix)
}

struct TextFact {
    metric: String,
    a: f64,
    b: f64,
    /// Index into `pre_text ++ post_text`.
    sentence: usize,
}

struct Document {
    years: Vec<u32>,
    rows: Vec<&'static str>,
    values: Vec<Vec<f64>>,
    grid: Vec<Vec<String>>,
    pre_text: Vec<String>,
    post_text: Vec<String>,
    facts: Vec<TextFact>,
    /// Row index and restated value for `y2`, with its sentence index.
    restated: (usize, f64, usize),
}

impl Document {
    fn generate<R: Rng>(rng: &mut R) -> Document {
        let year0: u32 = rng.gen_range(2005..2019);
        let columns = rng.gen_range(3..=4);
        let years: Vec<u32> = (0..columns).map(|c| year0 - c as u32).collect();
        let row_count = rng.gen_range(3..=6);
        let mut rows: Vec<&'static str> = ROW_NAMES.choose_multiple(rng, row_count).copied().collect();
        rows.sort_unstable();
        let values: Vec<Vec<f64>> =
            rows.iter().map(|_| (0..columns).map(|_| round1(rng.gen_range(50.0..9000.0))).collect()).collect();
        let mut grid = vec![std::iter::once(String::new()).chain(years.iter().map(|y| y.to_string())).collect::<Vec<_>>()];
        for (name, row) in rows.iter().zip(&values) {
            grid.push(std::iter::once(name.to_string()).chain(row.iter().map(|&v| format_cell(rng, v))).collect());
        }

        let company = ["the company", "we", "the registrant", "the group"].choose(rng).expect("non-empty");
        let mut pre_text = vec![
            format!("{company} reports its results in millions of dollars ."),
            format!("the following table summarizes selected financial data for {} through {} .", years[columns - 1], years[0]),
        ];
        let mut facts = Vec::new();
        let fact_count = rng.gen_range(1..=2);
        let metrics: Vec<&str> = TEXT_METRICS.choose_multiple(rng, fact_count).copied().collect();
        for metric in metrics {
            let (a, b) = (round1(rng.gen_range(5.0..900.0)), round1(rng.gen_range(5.0..900.0)));
            facts.push(TextFact { metric: metric.to_string(), a, b, sentence: pre_text.len() });
            pre_text.push(format!(
                "{metric} was $ {} million in {} compared to $ {} million in {} .",
                with_separators(a),
                years[0],
                with_separators(b),
                years[1]
            ));
        }
        let r = rng.gen_range(0..rows.len());
        let restated_value = round1(rng.gen_range(50.0..9000.0));
        let post_text = vec![
            format!("{} for {} was restated to $ {} million .", rows[r], years[1], with_separators(restated_value)),
            "see note 7 for additional information .".to_string(),
        ];
        let restated = (r, restated_value, pre_text.len());
        Document { years, rows, values, grid, pre_text, post_text, facts, restated }
    }

    fn row_key(row: usize) -> String {
        format!("table_{}", row + 1)
    }

    fn sentence(&self, index: usize) -> &str {
        self.pre_text.iter().chain(&self.post_text).nth(index).expect("sentence exists")
    }

    fn questions<R: Rng>(&self, rng: &mut R, doc_id: &str, count: usize) -> Vec<Value> {
        let mut out: Vec<Value> = Vec::with_capacity(count);
        for q in 0..count {
            let id = format!("{doc_id}-{q}");
            // a sibling sometimes asks the previous question again in other words
            if q > 0 && rng.gen_bool(0.3) {
                let mut again = out[q - 1].clone();
                again["id"] = Value::String(id);
                let question = again["qa"]["question"].as_str().expect("string").to_string();
                again["qa"]["question"] = Value::String(paraphrase(rng, &question));
                out.push(again);
            } else {
                out.push(self.question(rng, &id));
            }
        }
        out
    }

    fn question<R: Rng>(&self, rng: &mut R, id: &str) -> Value {
        let shape = {
            let total: u32 = SHAPES.iter().map(|s| s.1).sum();
            let mut pick = rng.gen_range(0..total);
            SHAPES.iter().find(|(_, w)| if pick < *w { true } else { pick -= w; false }).expect("weights cover range").0
        };
        let table_only =
            matches!(shape, Shape::RowAverage | Shape::RowMax | Shape::ThreeYearAverage | Shape::ShareOfTotal);
        let source = if table_only {
            Source::Table
        } else {
            match rng.gen_range(0..100) {
                0..=23 => Source::Text,
                24..=37 => Source::Both,
                _ => Source::Table,
            }
        };

        let mut gold = serde_json::Map::new();
        let mut r = rng.gen_range(0..self.rows.len());
        let (subject, a, b) = match source {
            Source::Table => {
                gold.insert(Self::row_key(r), Value::String(self.grid[r + 1].join(" ")));
                (self.rows[r].to_string(), self.values[r][0], self.values[r][1])
            }
            Source::Text => {
                let fact = self.facts.choose(rng).expect("at least one fact");
                gold.insert(format!("text_{}", fact.sentence), Value::String(self.sentence(fact.sentence).to_string()));
                (fact.metric.clone(), fact.a, fact.b)
            }
            Source::Both => {
                let (row, b, sentence) = self.restated;
                r = row;
                gold.insert(Self::row_key(r), Value::String(self.grid[r + 1].join(" ")));
                gold.insert(format!("text_{sentence}"), Value::String(self.sentence(sentence).to_string()));
                (self.rows[r].to_string(), self.values[r][0], b)
            }
        };
        let (la, lb) = (literal(a), literal(b));
        let (ya, yb) = (self.years[0], self.years[1]);

        let (question, program, answer): (String, String, Value) = match shape {
            Shape::Change => (
                format!("what was the change in {subject} from {yb} to {ya}?"),
                format!("subtract({la}, {lb})"),
                json!(round5(a - b)),
            ),
            Shape::PercentChange => (
                format!("what was the percentage change in {subject} between {yb} and {ya}?"),
                format!("subtract({la}, {lb}), divide(#0, {lb})"),
                json!(round5((a - b) / b)),
            ),
            Shape::Ratio => (
                format!("what is the ratio of {subject} in {ya} to {yb}?"),
                format!("divide({la}, {lb})"),
                json!(round5(a / b)),
            ),
            Shape::Sum => (
                format!("what is the total of {subject} for {ya} and {yb}?"),
                format!("add({la}, {lb})"),
                json!(round5(a + b)),
            ),
            Shape::Average => (
                format!("what was the average {subject} for {yb} and {ya}?"),
                format!("add({la}, {lb}), divide(#0, const_2)"),
                json!(round5((a + b) / 2.0)),
            ),
            Shape::Greater => (
                format!("was {subject} in {ya} greater than in {yb}?"),
                format!("greater({la}, {lb})"),
                json!(if a > b { "yes" } else { "no" }),
            ),
            Shape::GrowthPercent => (
                format!("what was the growth rate of {subject} from {yb} to {ya} in percent?"),
                format!("subtract({la}, {lb}), divide(#0, {lb}), multiply(#1, const_100)"),
                json!(round5((a - b) / b * 100.0)),
            ),
            Shape::RowAverage => {
                let mean = self.values[r].iter().sum::<f64>() / self.years.len() as f64;
                (
                    format!("what is the average {subject} over the periods shown?"),
                    format!("table_average({}, none)", self.rows[r]),
                    json!(round5(mean)),
                )
            }
            Shape::RowMax => {
                let max = self.values[r].iter().cloned().fold(f64::MIN, f64::max);
                (
                    format!("what was the highest {subject} in the periods presented?"),
                    format!("table_max({}, none)", self.rows[r]),
                    json!(round5(max)),
                )
            }
            Shape::ThreeYearAverage => {
                let c = self.values[r][2];
                (
                    format!("what was the three year average of {subject}?"),
                    format!("add({la}, {lb}), add(#0, {}), divide(#1, const_3)", literal(c)),
                    json!(round5((a + b + c) / 3.0)),
                )
            }
            Shape::ShareOfTotal => {
                let other = (r + 1) % self.rows.len();
                gold.insert(Self::row_key(other), Value::String(self.grid[other + 1].join(" ")));
                let o = self.values[other][0];
                (
                    format!("what portion of the combined {} and {} in {ya} relates to {subject}?", self.rows[r], self.rows[other]),
                    format!("add({la}, {}), divide({la}, #0)", literal(o)),
                    json!(round5(a / (a + o))),
                )
            }
        };

        json!({
            "id": id,
            "pre_text": self.pre_text,
            "post_text": self.post_text,
            "table": self.grid,
            "qa": {
                "question": question,
                "program": program,
                "exe_ans": answer,
                "gold_inds": gold,
            }
        })
    }
}

fn paraphrase<R: Rng>(rng: &mut R, question: &str) -> String {
    const OPENERS: [&str; 4] = ["based on the table ,", "according to the filing ,", "in millions ,", "for the periods presented ,"];
    let base = OPENERS.iter().find_map(|o| question.strip_prefix(o)).map_or(question, str::trim_start);
    format!("{} {base}", OPENERS.choose(rng).expect("non-empty"))
}
