//! Oracles shared by the integration tests, written independently of the
//! library code they check.
#![allow(dead_code)]

use finqa_cbr::dsl::{arg_sequence, op_sequence, Program};
use finqa_cbr::similarity::ScoreWeights;

/// Full-matrix edit distance.
pub fn dp_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub fn normalized(token: &str) -> String {
    let lower = token.trim().to_lowercase();
    let stripped: String = lower.chars().filter(|c| !matches!(c, '$' | ',') && !c.is_whitespace()).collect();
    let digits = stripped.trim_end_matches('%');
    let numeric = digits.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.') && digits.parse::<f64>().is_ok();
    if numeric {
        stripped
    } else {
        lower
    }
}

pub fn oracle_score(target: &Program, candidate: &Program, w: ScoreWeights) -> f64 {
    let ops = |p: &Program| op_sequence(p).iter().map(|o| o.name()).collect::<Vec<_>>();
    let args = |p: &Program| arg_sequence(p).iter().map(|t| normalized(t)).collect::<Vec<_>>();
    let (to, ta, co, ca) = (ops(target), args(target), ops(candidate), args(candidate));
    let term = |l: usize, d: usize| ((l as f64 - d as f64) / l as f64).clamp(0.0, 1.0);
    term(to.len(), dp_distance(&to, &co)) * w.w_ops + term(ta.len(), dp_distance(&ta, &ca)) * w.w_arg
}
