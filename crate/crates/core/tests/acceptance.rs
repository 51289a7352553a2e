//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Dataset checks read `train.json`, `dev.json` and `test.json` from the
//! directory named by `FINQA_DATA_DIR` and fail when it is absent. Checks that
//! need no dataset run on seeded synthetic splits of the same sizes; a failure
//! there is a defect and makes this target exit non-zero.

mod common;

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use finqa_cbr::corpus::{compute_stats, ingest, CaseRepository, FieldMap, IngestReport, RejectKind};
use finqa_cbr::dsl::{parse_program, serialize_program, Program};
use finqa_cbr::equivalence::{programs_equivalent, random_eval_equivalent};
use finqa_cbr::metrics::{
    evaluate, gold_execution_check, parse_predictions, precision_at_k, render_table, write_predictions, EvalReport,
    GoldExecReport, PredictionRecord,
};
use finqa_cbr::retrieval::{
    retrieve, two_stage_retrieve, CaseIndex, EmbeddingTable, IndexMode, IndexParams, ProgramScoreOracle, Query,
    RetrievalResult,
};
use finqa_cbr::similarity::{program_score, GoldCaseMiner, GoldCaseSet, MiningConfig, ScoreWeights};
use finqa_cbr::synth::{mutate_equivalent, random_program, seeded_corpus, ROW_NAMES};
use finqa_cbr::{ExecResult, Tolerance};

const SPLITS: [(&str, usize); 3] = [("train", 6_251), ("dev", 883), ("test", 1_147)];
const INGEST_BUDGET: Duration = Duration::from_secs(60);
const MINING_BUDGET: Duration = Duration::from_secs(600);
const QUESTION_TYPES: [f64; 3] = [23.42, 62.43, 14.15];
const QUESTION_TYPE_TOL: f64 = 1.5;
const STEP_COUNTS: [f64; 3] = [59.10, 32.71, 8.19];
const STEP_COUNT_TOL: f64 = 1.0;
const EMPTY_GOLD_MAX: f64 = 0.03;
const ORACLE_P3_MIN: f64 = 0.95;
const W_OPS_GRID: [f64; 4] = [0.7, 0.8, 0.9, 0.95];

struct Split {
    name: &'static str,
    expected: usize,
    repo: CaseRepository,
    report: IngestReport,
}

struct Corpus {
    label: &'static str,
    splits: Vec<Split>,
    gold_checks: Vec<GoldExecReport>,
    ingest_and_execute: Duration,
}

impl Corpus {
    fn split(&self, name: &str) -> &Split {
        self.splits.iter().find(|s| s.name == name).expect("known split")
    }

    fn load(label: &'static str, dir: &std::path::Path) -> Result<Corpus, String> {
        let start = Instant::now();
        let mut splits = Vec::new();
        for (name, expected) in SPLITS {
            let path = dir.join(format!("{name}.json"));
            let ingested = ingest(&path, &FieldMap::default()).map_err(|e| e.to_string())?;
            splits.push(Split { name, expected, repo: ingested.repository, report: ingested.report });
        }
        let gold_checks = splits.iter().map(|s| gold_execution_check(&s.repo, Tolerance::default())).collect();
        Ok(Corpus { label, splits, gold_checks, ingest_and_execute: start.elapsed() })
    }
}

fn dataset() -> Result<Corpus, String> {
    let dir = std::env::var_os("FINQA_DATA_DIR").ok_or("FINQA_DATA_DIR unset, dataset not available")?;
    Corpus::load("dataset", &PathBuf::from(dir))
}

fn synthetic() -> Corpus {
    let dir = tempfile::tempdir().expect("temp dir");
    for (i, (name, count)) in SPLITS.into_iter().enumerate() {
        let records = serde_json::Value::Array(seeded_corpus(count, 100 + i as u64, &format!("{name}-")));
        std::fs::write(dir.path().join(format!("{name}.json")), records.to_string()).expect("write split");
    }
    Corpus::load("synthetic", dir.path()).expect("synthetic splits ingest")
}

/// Result of one criterion. `defect` marks a failure in a check that does
/// not depend on the dataset.
struct Verdict {
    pass: bool,
    defect: bool,
    detail: String,
}

impl Verdict {
    fn new(data_pass: Option<bool>, synthetic_pass: bool, detail: String) -> Self {
        Verdict { pass: data_pass.unwrap_or(false) && synthetic_pass, defect: !synthetic_pass, detail }
    }

    fn synthetic_only(pass: bool, detail: String) -> Self {
        Verdict { pass, defect: !pass, detail }
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn fidelity(c: &Corpus) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (split, check) in c.splits.iter().zip(&c.gold_checks) {
        let unparsable = split.report.rejected.iter().filter(|r| r.kind == RejectKind::UnparsableProgram).count();
        ok &= split.report.accepted == split.expected && unparsable == 0 && split.report.rejected.is_empty();
        ok &= check.match_rate >= 0.99;
        ok &= check.by_kind.values().sum::<usize>() == check.exceptions.len();
        parts.push(format!(
            "{} {}/{} accepted, {} unparsable, exec match {} ({:?})",
            split.name,
            split.report.accepted,
            split.expected,
            unparsable,
            pct(check.match_rate),
            check.by_kind
        ));
    }
    ok &= c.ingest_and_execute < INGEST_BUDGET;
    parts.push(format!("ingest+execute {} (budget {})", secs(c.ingest_and_execute), secs(INGEST_BUDGET)));
    (ok, format!("[{}] {}", c.label, parts.join("; ")))
}

fn criterion_1(data: &Result<Corpus, String>, syn: &Corpus) -> Verdict {
    let (syn_ok, syn_detail) = fidelity(syn);
    match data {
        Ok(d) => {
            let (ok, detail) = fidelity(d);
            Verdict::new(Some(ok), syn_ok, format!("{detail} | {syn_detail}"))
        }
        Err(e) => Verdict::new(None, syn_ok, format!("{e} | {syn_detail}")),
    }
}

fn criterion_2(data: &Result<Corpus, String>) -> Verdict {
    let Ok(d) = data else {
        return Verdict::new(None, true, data.as_ref().err().unwrap().to_string());
    };
    let stats = compute_stats(&d.split("train").repo, None);
    let q = stats.question_type_fractions;
    let o = stats.operand_question_type_fractions;
    let s = stats.step_fractions;
    let got_q = [q.text_only, q.table_only, q.both].map(|x| 100.0 * x);
    let got_s = [s.one, s.two, s.three_plus].map(|x| 100.0 * x);
    let ok = got_q.iter().zip(QUESTION_TYPES).all(|(g, t)| (g - t).abs() <= QUESTION_TYPE_TOL)
        && got_s.iter().zip(STEP_COUNTS).all(|(g, t)| (g - t).abs() <= STEP_COUNT_TOL);
    Verdict::new(
        Some(ok),
        true,
        format!(
            "evidence-based text/table/both {:.2}/{:.2}/{:.2} (unclassified {:.2}), target {:?} ±{}; \
             operand-based diagnostic {:.2}/{:.2}/{:.2}; steps 1/2/3+ {:.2}/{:.2}/{:.2}, target {:?} ±{}",
            got_q[0],
            got_q[1],
            got_q[2],
            100.0 * q.unclassified,
            QUESTION_TYPES,
            QUESTION_TYPE_TOL,
            100.0 * o.text_only,
            100.0 * o.table_only,
            100.0 * o.both,
            got_s[0],
            got_s[1],
            got_s[2],
            STEP_COUNTS,
            STEP_COUNT_TOL
        ),
    )
}

fn mine(repo: &CaseRepository, queries: &CaseRepository, weights: ScoreWeights) -> (Vec<GoldCaseSet>, Duration) {
    let start = Instant::now();
    let config = MiningConfig { weights, ..MiningConfig::default() };
    let miner = GoldCaseMiner::new(repo, config, None).expect("valid config");
    let sets = miner.mine_all(queries.records()).expect("mining");
    (sets, start.elapsed())
}

fn empty_fraction(sets: &[GoldCaseSet]) -> f64 {
    sets.iter().filter(|s| s.is_empty()).count() as f64 / sets.len().max(1) as f64
}

fn criterion_3(data: &Result<Corpus, String>, syn: &Corpus) -> (Verdict, String) {
    let syn_train = &syn.split("train").repo;
    let (syn_sets, syn_time) = mine(syn_train, syn_train, ScoreWeights::default());
    let syn_ok = syn_time < MINING_BUDGET;
    let syn_detail = format!(
        "[synthetic] {} queries x {} cases mined in {} (budget {}), empty {}",
        syn_train.len(),
        syn_train.len(),
        secs(syn_time),
        secs(MINING_BUDGET),
        pct(empty_fraction(&syn_sets))
    );
    let sensitivity_repo = match data {
        Ok(d) => ("dataset", &d.split("train").repo),
        Err(_) => ("synthetic", syn_train),
    };
    let sensitivity = W_OPS_GRID
        .iter()
        .map(|&w| {
            let weights = ScoreWeights::with_ops_weight(w).expect("valid weight");
            let (sets, _) = mine(sensitivity_repo.1, sensitivity_repo.1, weights);
            format!("w_ops {w:.2}: empty {}", pct(empty_fraction(&sets)))
        })
        .collect::<Vec<_>>()
        .join(", ");
    let sensitivity = format!("[{}] {sensitivity}", sensitivity_repo.0);
    let verdict = match data {
        Ok(d) => {
            let train = &d.split("train").repo;
            let (sets, time) = mine(train, train, ScoreWeights::default());
            let empty = empty_fraction(&sets);
            let ok = empty <= EMPTY_GOLD_MAX && time < MINING_BUDGET;
            Verdict::new(
                Some(ok),
                syn_ok,
                format!(
                    "[dataset] empty gold {} (allowed [0%, {}]), mined in {} | {syn_detail}",
                    pct(empty),
                    pct(EMPTY_GOLD_MAX),
                    secs(time)
                ),
            )
        }
        Err(e) => Verdict::new(None, syn_ok, format!("{e} | {syn_detail}")),
    };
    (verdict, sensitivity)
}

fn criterion_4(data: &Result<Corpus, String>, syn: &Corpus) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let target = random_program(&mut rng, 5, ROW_NAMES);
        let candidate = random_program(&mut rng, 5, ROW_NAMES);
        let w = ScoreWeights::default();
        if program_score(&target, &candidate, w).expect("scorable").s != common::oracle_score(&target, &candidate, w) {
            mismatches += 1;
        }
    }
    let mut clamp_violations = 0;
    for _ in 0..1_000 {
        let target = random_program(&mut rng, 1, &[]);
        let long = random_program(&mut rng, 10, ROW_NAMES);
        let s = program_score(&target, &long, ScoreWeights::default()).expect("scorable");
        if s.ops_term < 0.0 || s.arg_term < 0.0 || !(0.0..=1.0).contains(&s.s) {
            clamp_violations += 1;
        }
    }
    let self_score_failures = |c: &Corpus| {
        c.splits
            .iter()
            .flat_map(|s| s.repo.iter())
            .filter(|r| program_score(&r.program, &r.program, ScoreWeights::default()).map(|s| s.s) != Ok(1.0))
            .count()
    };
    let syn_self = self_score_failures(syn);
    let syn_ok = mismatches == 0 && clamp_violations == 0 && syn_self == 0;
    let syn_detail = format!(
        "oracle mismatches {mismatches}/10000, clamp violations {clamp_violations}/1000, synthetic self-score failures {syn_self}"
    );
    match data {
        Ok(d) => {
            let n = self_score_failures(d);
            Verdict::new(Some(n == 0), syn_ok, format!("dataset self-score failures {n}; {syn_detail}"))
        }
        Err(e) => Verdict::new(None, syn_ok, format!("{e}; {syn_detail}")),
    }
}

fn p(text: &str) -> Program {
    parse_program(text).expect("fixture parses")
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut unequal = 0;
    let mut counterexamples = 0;
    for _ in 0..1_000 {
        let original = random_program(&mut rng, 5, ROW_NAMES);
        let mutated = mutate_equivalent(&mut rng, &original, 4);
        if !programs_equivalent(&original, &mutated) {
            unequal += 1;
        } else if !random_eval_equivalent(&original, &mutated, 100, 2024) {
            counterexamples += 1;
        }
    }
    let accepted = [
        ("add(1, 2)", "add(2, 1)"),
        ("multiply(3, 4), add(#0, 5)", "multiply(4, 3), add(5, #0)"),
        ("divide(10, 2), divide(9, 3), subtract(#0, #1)", "divide(9, 3), divide(10, 2), subtract(#1, #0)"),
        ("subtract(5, 3), add(7, 1), multiply(#0, #1)", "add(7, 1), subtract(5, 3), multiply(#1, #0)"),
    ];
    let rejected = [
        ("subtract(5, 3)", "subtract(3, 5)"),
        ("add(1, 2), multiply(1, 3), subtract(#0, #1)", "add(1, 2), multiply(1, 3), subtract(#1, #0)"),
        ("subtract(#0, 3)", ""),
    ];
    let accepted_ok = accepted.iter().filter(|(a, b)| programs_equivalent(&p(a), &p(b))).count();
    let rejected_ok = rejected
        .iter()
        .filter(|(a, b)| parse_program(a).is_err() || !programs_equivalent(&p(a), &p(b)))
        .count();
    let ok = unequal == 0 && counterexamples == 0 && accepted_ok == accepted.len() && rejected_ok == rejected.len();
    Verdict::synthetic_only(
        ok,
        format!(
            "1000 mutation pairs: {unequal} not recognised, {counterexamples} numeric counterexamples; \
             fixtures accepted {accepted_ok}/{}, swapped subtract rejected {rejected_ok}/{}",
            accepted.len(),
            rejected.len()
        ),
    )
}

fn gold_predictions(repo: &CaseRepository) -> Vec<PredictionRecord> {
    repo.iter().map(|r| PredictionRecord::new(r.id.clone(), r.program_text.clone())).collect()
}

/// Prediction files of varying quality for the ops >= prog check.
fn prediction_files(repo: &CaseRepository, seed: u64) -> Vec<Vec<PredictionRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = repo.records();
    let n = records.len();
    let shifted = (0..n).map(|i| PredictionRecord::new(records[i].id.clone(), records[(i + n / 2) % n].program_text.clone()));
    let mutated = records.iter().map(|r| {
        let program = serialize_program(&mutate_equivalent(&mut rng, &r.program, 3));
        PredictionRecord::new(r.id.clone(), program)
    });
    let mutated: Vec<_> = mutated.collect();
    let random: Vec<_> = records
        .iter()
        .map(|r| PredictionRecord::new(r.id.clone(), serialize_program(&random_program(&mut rng, 3, ROW_NAMES))))
        .collect();
    vec![gold_predictions(repo), shifted.collect(), mutated, random]
}

fn self_consistency(c: &Corpus) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (split, check) in c.splits.iter().zip(&c.gold_checks) {
        let report = evaluate(&gold_predictions(&split.repo), &split.repo, Tolerance::default()).expect("known ids");
        let wrong: HashSet<&str> = report.verdicts.iter().filter(|v| !v.exec_correct).map(|v| v.id.as_str()).collect();
        ok &= wrong == check.exception_ids() && report.program_accuracy == 1.0 && report.operator_accuracy == 1.0;
        let files_ok = prediction_files(&split.repo, 6)
            .iter()
            .map(|preds| evaluate(preds, &split.repo, Tolerance::default()).expect("known ids"))
            .all(|r: EvalReport| r.operator_accuracy >= r.program_accuracy);
        ok &= files_ok;
        parts.push(format!(
            "{} gold-as-pred exe/prog/ops {}/{}/{}, misses = classified exceptions: {}, ops>=prog on 4 files: {files_ok}",
            split.name,
            pct(report.execution_accuracy),
            pct(report.program_accuracy),
            pct(report.operator_accuracy),
            wrong == check.exception_ids()
        ));
    }
    (ok, format!("[{}] {}", c.label, parts.join("; ")))
}

fn criterion_6(data: &Result<Corpus, String>, syn: &Corpus) -> Verdict {
    let (syn_ok, syn_detail) = self_consistency(syn);
    match data {
        Ok(d) => {
            let (ok, detail) = self_consistency(d);
            Verdict::new(Some(ok), syn_ok, format!("{detail} | {syn_detail}"))
        }
        Err(e) => Verdict::new(None, syn_ok, format!("{e} | {syn_detail}")),
    }
}

/// Returns (targets met, mechanical guarantees hold, detail). BM25 length
/// normalization can rank a document that repeats query terms above the query
/// itself, so only TF-IDF self-retrieval is a guarantee.
fn retrieval_properties(c: &Corpus) -> (bool, bool, String) {
    let train = &c.split("train").repo;
    let dev = &c.split("dev").repo;
    let params = IndexParams::default();
    let mut ok = true;
    let mut mechanics = true;
    let mut parts = Vec::new();

    for mode in [IndexMode::Bm25, IndexMode::Tfidf] {
        let index = CaseIndex::build(train, mode, &params, None).expect("index");
        let misses = train
            .records()
            .par_iter()
            .enumerate()
            .filter(|(i, r)| {
                let scores = index.scores(Query::Text(&r.question)).expect("text query");
                let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                scores[*i] < best - 1e-12
            })
            .count();
        ok &= misses == 0;
        mechanics &= mode != IndexMode::Tfidf || misses == 0;
        parts.push(format!("{mode} self-retrieval {}/{} at rank 1", train.len() - misses, train.len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut table = EmbeddingTable::new(32);
    for r in train {
        table.insert(r.id.clone(), (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("dimension");
    }
    let index = CaseIndex::build(train, IndexMode::Embedding, &params, Some(&table)).expect("index");
    let mut sampled: Vec<&str> = train.iter().map(|r| r.id.as_str()).collect();
    sampled.shuffle(&mut rng);
    let brute_force_mismatch = sampled[..100]
        .iter()
        .filter(|id| {
            let q = table.get(id).expect("vector");
            let mut expected: Vec<(f64, &str)> = train
                .iter()
                .filter(|r| r.id != **id)
                .map(|r| {
                    let v = table.get(&r.id).expect("vector");
                    let dot: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
                    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
                    (dot / (norm(q) * norm(v)), r.id.as_str())
                })
                .collect();
            expected.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(b.1)));
            let got = retrieve(&index, id, Query::Vector(q), train.len()).expect("retrieve");
            !got.ranked.iter().map(|r| r.case_id.as_str()).eq(expected.iter().map(|e| e.1))
        })
        .count();
    ok &= brute_force_mismatch == 0;
    mechanics &= brute_force_mismatch == 0;
    parts.push(format!("embedding vs brute-force cosine: {brute_force_mismatch}/100 rankings differ"));

    let (gold, _) = mine(train, dev, ScoreWeights::default());
    let coarse = CaseIndex::build(train, IndexMode::Bm25, &params, None).expect("index");
    let oracle = ProgramScoreOracle::new(dev, train, ScoreWeights::default());
    let (reranked, coarse_only): (Vec<RetrievalResult>, Vec<RetrievalResult>) = dev
        .records()
        .par_iter()
        .map(|q| {
            let query = Query::Text(&q.question);
            (
                two_stage_retrieve(&coarse, &q.id, query, &oracle, 100, 3).expect("rerank"),
                retrieve(&coarse, &q.id, query, 100).expect("retrieve"),
            )
        })
        .unzip();
    let p3 = precision_at_k(&reranked, &gold, 3).expect("k > 0");
    let coarse_p3 = precision_at_k(&coarse_only, &gold, 3).expect("k > 0");
    // best attainable P@3 given the gold cases inside each coarse top-100
    let attainable: f64 = coarse_only
        .iter()
        .zip(&gold)
        .filter(|(_, g)| !g.is_empty())
        .map(|(r, g)| {
            let ids = g.ids();
            r.ranked.iter().filter(|c| ids.contains(c.case_id.as_str())).count().min(3) as f64 / 3.0
        })
        .sum::<f64>()
        / p3.evaluated.max(1) as f64;
    let optimal = p3.precision >= coarse_p3.precision && (p3.precision - attainable).abs() < 1e-9;
    ok &= p3.precision >= ORACLE_P3_MIN && optimal;
    mechanics &= optimal;
    parts.push(format!(
        "dev two-stage oracle P@3 {:.4} (min {ORACLE_P3_MIN}; coarse {:.4}; attainable {:.4}; {} queries, {} with empty gold)",
        p3.precision, coarse_p3.precision, attainable, p3.evaluated, p3.excluded_empty
    ));
    (ok && mechanics, mechanics, format!("[{}] {}", c.label, parts.join("; ")))
}

fn criterion_7(data: &Result<Corpus, String>, syn: &Corpus) -> Verdict {
    let (_, syn_ok, syn_detail) = retrieval_properties(syn);
    match data {
        Ok(d) => {
            let (ok, _, detail) = retrieval_properties(d);
            Verdict::new(Some(ok), syn_ok, format!("{detail} | {syn_detail}"))
        }
        Err(e) => Verdict::new(None, syn_ok, format!("{e} | {syn_detail}")),
    }
}

/// A program whose value cannot match `gold`.
fn corrupted(gold: ExecResult) -> String {
    match gold {
        ExecResult::Boolean(true) => "greater(1, 2)".into(),
        ExecResult::Boolean(false) => "greater(2, 1)".into(),
        ExecResult::Numeric(v) => {
            let wrong = if v >= 0.0 { 2.0 * v + 1.0 } else { 2.0 * v - 1.0 };
            format!("add({wrong}, 0)")
        }
    }
}

fn criterion_8(syn: &Corpus) -> Verdict {
    let dev = &syn.split("dev").repo;
    let check = &syn.gold_checks[1];
    let records: Vec<_> = dev.iter().filter(|r| !check.exception_ids().contains(r.id.as_str())).take(800).collect();
    let preds: Vec<PredictionRecord> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let program = if i % 2 == 0 { r.program_text.clone() } else { corrupted(r.exec_answer) };
            PredictionRecord::new(r.id.clone(), program)
        })
        .collect();
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("third_party.tsv");
    std::fs::write(&path, write_predictions(&preds)).expect("write predictions");
    let loaded = parse_predictions(&std::fs::read_to_string(&path).expect("read predictions")).expect("well formed");
    let report = evaluate(&loaded, dev, Tolerance::default()).expect("known ids");
    let table = render_table(&report);
    let header_ok = table.lines().next() == Some("Exe Acc  Prog Acc  Ops Acc");
    let ok = report.execution_accuracy == 0.5 && header_ok && report.operator_accuracy >= report.program_accuracy;
    Verdict::synthetic_only(
        ok,
        format!(
            "generator accuracies and trained-retriever precisions need fine-tuned models and are not reproduced; \
             fixture of {} predictions, half corrupted: Exe Acc {} (expected exactly 50.00%), table `{}`",
            loaded.len(),
            pct(report.execution_accuracy),
            table.lines().collect::<Vec<_>>().join(" / ")
        ),
    )
}

fn main() {
    let started = Instant::now();
    let data = dataset();
    let syn = synthetic();
    let (c3, sensitivity) = criterion_3(&data, &syn);
    let verdicts = [
        ("dataset fidelity", criterion_1(&data, &syn)),
        ("statistics reproduction", criterion_2(&data)),
        ("gold-case coverage", c3),
        ("program score correctness", criterion_4(&data, &syn)),
        ("equivalence soundness", criterion_5()),
        ("metric self-consistency", criterion_6(&data, &syn)),
        ("retrieval properties", criterion_7(&data, &syn)),
        ("prediction harness", criterion_8(&syn)),
    ];
    for (i, (name, v)) in verdicts.iter().enumerate() {
        println!("criterion {} {name}: {} - {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("diagnostic w_ops sensitivity (full-pool empty gold fraction): {sensitivity}");
    let passed = verdicts.iter().filter(|(_, v)| v.pass).count();
    let defects: Vec<usize> = verdicts.iter().enumerate().filter(|(_, v)| v.1.defect).map(|(i, _)| i + 1).collect();
    println!("acceptance: {passed}/8 criteria pass in {}; dataset-independent defects: {defects:?}", secs(started.elapsed()));
    if !defects.is_empty() {
        std::process::exit(1);
    }
}
