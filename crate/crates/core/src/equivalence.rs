//! Program equivalence for program accuracy.
//!
//! Two programs are equivalent when their canonical forms are equal. The
//! canonical form is itself a program: steps unreachable from the final step
//! are dropped, identical subcomputations are merged, operands of `add` and
//! `multiply` are sorted, numeric leaves are written by value (`const_100`
//! and `100` coincide), and steps are emitted in a topological order that
//! always picks the ready step with the smallest structural key.
//!
//! The relation is purely syntactic: `a/b - c/b` and `(a - c)/b` are not
//! equivalent here. [`random_eval_equivalent`] is a one-sided numeric oracle
//! used to cross-check it.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::{Operand, Program, Step};
use crate::executor::{execute, ExecResult, TableData, TableRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalForm {
    pub program: Program,
    /// Serialized canonical program; equal encodings mean equivalent programs.
    pub encoding: String,
}

/// Structural key of a leaf operand.
fn leaf_key(operand: &Operand) -> String {
    match operand {
        Operand::Number { .. } | Operand::Constant { .. } => {
            format!("n:{}", format_number(operand.numeric_value().expect("numeric leaf")))
        }
        Operand::Text(text) => format!("t:{}", normalize_text(text)),
        Operand::StepRef(_) => unreachable!("step references are not leaves"),
    }
}

fn format_number(value: f64) -> String {
    if value == 0.0 {
        "0".to_string()
    } else {
        format!("{value}")
    }
}

fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Fully expanded structural key of every step.
fn step_keys(program: &Program) -> Vec<String> {
    let mut keys: Vec<String> = Vec::with_capacity(program.len());
    for step in program.steps() {
        let mut args: Vec<String> = step
            .args
            .iter()
            .map(|arg| match arg {
                Operand::StepRef(i) => keys[*i].clone(),
                leaf => leaf_key(leaf),
            })
            .collect();
        if step.op.is_commutative() {
            args.sort();
        }
        keys.push(format!("{}({},{})", step.op, args[0], args[1]));
    }
    keys
}

pub fn canonicalize(program: &Program) -> CanonicalForm {
    let steps = program.steps();
    let keys = step_keys(program);

    // One representative step per distinct key, restricted to steps the final
    // step depends on.
    let mut representative: BTreeMap<&str, usize> = BTreeMap::new();
    let mut stack = vec![steps.len() - 1];
    while let Some(index) = stack.pop() {
        if representative.contains_key(keys[index].as_str()) {
            continue;
        }
        representative.insert(&keys[index], index);
        for arg in &steps[index].args {
            if let Operand::StepRef(child) = arg {
                stack.push(*child);
            }
        }
    }

    let child_keys = |index: usize| -> Vec<&str> {
        steps[index]
            .args
            .iter()
            .filter_map(|arg| match arg {
                Operand::StepRef(child) => Some(keys[*child].as_str()),
                _ => None,
            })
            .collect()
    };

    let mut pending: HashMap<&str, usize> = HashMap::new();
    let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
    for (&key, &index) in &representative {
        let children: BTreeSet<&str> = child_keys(index).into_iter().collect();
        pending.insert(key, children.len());
        for child in children {
            parents.entry(child).or_default().push(key);
        }
    }

    let mut ready: BinaryHeap<Reverse<&str>> =
        pending.iter().filter(|(_, &n)| n == 0).map(|(&k, _)| Reverse(k)).collect();
    let mut new_index: HashMap<&str, usize> = HashMap::new();
    let mut canonical_steps = Vec::with_capacity(representative.len());
    while let Some(Reverse(key)) = ready.pop() {
        let step = &steps[representative[key]];
        let mut args: Vec<(String, Operand)> = step
            .args
            .iter()
            .map(|arg| match arg {
                Operand::StepRef(child) => {
                    let child_key = keys[*child].as_str();
                    (child_key.to_string(), Operand::StepRef(new_index[child_key]))
                }
                leaf => (leaf_key(leaf), canonical_leaf(leaf)),
            })
            .collect();
        if step.op.is_commutative() {
            args.sort_by(|a, b| a.0.cmp(&b.0));
        }
        let mut args = args.into_iter().map(|(_, operand)| operand);
        let first = args.next().expect("binary step");
        let second = args.next().expect("binary step");
        new_index.insert(key, canonical_steps.len());
        canonical_steps.push(Step::new(step.op, first, second));
        for &parent in parents.get(key).map(Vec::as_slice).unwrap_or_default() {
            let count = pending.get_mut(parent).expect("parent is tracked");
            *count -= 1;
            if *count == 0 {
                ready.push(Reverse(parent));
            }
        }
    }

    let program = Program::new(canonical_steps).expect("canonical steps only reference earlier steps");
    let encoding = program.to_string();
    CanonicalForm { program, encoding }
}

fn canonical_leaf(operand: &Operand) -> Operand {
    match operand {
        Operand::Number { .. } | Operand::Constant { .. } => {
            let value = operand.numeric_value().expect("numeric leaf");
            let raw = format_number(value);
            Operand::Number { value: if value == 0.0 { 0.0 } else { value }, raw }
        }
        Operand::Text(text) => Operand::Text(normalize_text(text)),
        Operand::StepRef(_) => unreachable!("step references are not leaves"),
    }
}

/// Program accuracy's equivalence relation.
pub fn programs_equivalent(a: &Program, b: &Program) -> bool {
    a == b || canonicalize(a).encoding == canonicalize(b).encoding
}

/// Attempts allowed per requested trial before giving up on resampling.
const RETRIES_PER_TRIAL: usize = 10;

/// Numeric oracle: substitutes shared random values for every literal (by
/// value) and every table row (by name) and checks that both programs agree
/// to 1e-9 relative on each of `trials` samples.
///
/// A `false` result disproves equivalence; `true` is only evidence. Samples
/// where either program fails to execute are redrawn. If no sample ever
/// executes, the programs count as agreeing only when they failed identically
/// every time.
pub fn random_eval_equivalent(a: &Program, b: &Program, trials: usize, seed: u64) -> bool {
    let trials = trials.max(1);
    let mut numeric = BTreeSet::new();
    let mut rows = BTreeSet::new();
    for step in a.steps().iter().chain(b.steps()) {
        for arg in &step.args {
            match arg {
                Operand::Number { .. } | Operand::Constant { .. } => {
                    numeric.insert(leaf_key(arg));
                }
                Operand::Text(text) if step.op.is_table() => {
                    rows.insert(normalize_text(text));
                }
                _ => {}
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut completed = 0;
    let mut consistently_failing = true;
    for _ in 0..trials * RETRIES_PER_TRIAL {
        let values: HashMap<&str, f64> = numeric.iter().map(|k| (k.as_str(), rng.gen_range(1.0..5.0))).collect();
        let table = TableData::new(
            vec!["c0".into(), "c1".into(), "c2".into()],
            rows.iter()
                .map(|name| TableRow {
                    header: name.clone(),
                    cells: (0..3).map(|_| format!("{}", rng.gen_range(1.0..5.0_f64))).collect(),
                })
                .collect(),
        )
        .expect("uniform width");
        let run = |p: &Program| execute(&substitute(p, &values), Some(&table));
        match (run(a), run(b)) {
            (Ok(x), Ok(y)) => {
                if !results_agree(x, y) {
                    return false;
                }
                completed += 1;
                if completed == trials {
                    return true;
                }
            }
            (Err(x), Err(y)) if x.class() == y.class() => {}
            _ => consistently_failing = false,
        }
    }
    completed > 0 || consistently_failing
}

fn substitute(program: &Program, values: &HashMap<&str, f64>) -> Program {
    let steps = program
        .steps()
        .iter()
        .map(|step| {
            let args = step.args.clone().map(|arg| match arg {
                Operand::Number { .. } | Operand::Constant { .. } => {
                    let value = values[leaf_key(&arg).as_str()];
                    Operand::Number { value, raw: format!("{value}") }
                }
                other => other,
            });
            Step { op: step.op, args }
        })
        .collect();
    Program::new(steps).expect("substitution keeps references intact")
}

fn results_agree(x: ExecResult, y: ExecResult) -> bool {
    match (x, y) {
        (ExecResult::Numeric(x), ExecResult::Numeric(y)) => (x - y).abs() <= 1e-9 * x.abs().max(y.abs()),
        (ExecResult::Boolean(x), ExecResult::Boolean(y)) => x == y,
        _ => false,
    }
}
