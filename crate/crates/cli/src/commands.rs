use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use finqa_cbr::corpus::{compute_stats, ingest_str, linearize_table, CaseRepository, IngestReport, Ingested};
use finqa_cbr::equivalence::{programs_equivalent, random_eval_equivalent};
use finqa_cbr::executor::{execute, TableData};
use finqa_cbr::metrics::{
    evaluate, gold_execution_check, parse_predictions, precision_at_k, render_rows, render_table, PrecisionAtK,
};
use finqa_cbr::parse_program;
use finqa_cbr::retrieval::{
    read_results, retrieve_all, two_stage_retrieve, write_results, CaseIndex, EmbeddingTable, IndexMode,
    ProgramScoreOracle, Query, RerankScorer, RerankScores, RetrievalResult, TfIdfModel,
};
use finqa_cbr::similarity::{program_score, GoldCaseMiner, GoldCaseSet, QuestionSimilarity};

use crate::config::{Overrides, Rerank, RunConfig, SimilaritySource};
use crate::Command;

/// Error with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome<T> = Result<T, Failure>;

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn io(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

#[derive(Debug, Clone, Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

/// Reads inputs and remembers their content hashes.
#[derive(Default)]
struct Inputs(Vec<InputHash>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Outcome<String> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(io)?;
        let digest = Sha256::digest(text.as_bytes());
        self.0.push(InputHash { path: path.display().to_string(), sha256: hex::encode(digest) });
        Ok(text)
    }
}

struct Run<'a> {
    config: &'a RunConfig,
    inputs: Inputs,
}

impl<'a> Run<'a> {
    fn load_split(&mut self, split: &str) -> Outcome<Ingested> {
        let path = self.config.split_path(split).map_err(io)?;
        let text = self.inputs.read(&path)?;
        ingest_str(&text, &self.config.field_map).with_context(|| format!("{}", path.display())).map_err(io)
    }

    fn load_embeddings(&mut self) -> Outcome<EmbeddingTable> {
        let path = self.config.retrieval.embeddings.clone().ok_or_else(|| invalid(anyhow!("retrieval.embeddings is not set")))?;
        let text = self.inputs.read(&path)?;
        EmbeddingTable::parse(&text).map_err(|e| io(anyhow!("{}: {e}", path.display())))
    }

    fn load_gold(&mut self, path: &Path) -> Outcome<Vec<GoldCaseSet>> {
        let text = self.inputs.read(path)?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| io(anyhow!("{}:{}: {e}", path.display(), i + 1))))
            .collect()
    }

    fn label(&self) -> String {
        let split = &self.config.split;
        if self.config.data.contains_key(split) {
            return split.clone();
        }
        Path::new(split).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| split.clone())
    }

    fn envelope(&self, command: &str, result: impl Serialize) -> Value {
        json!({
            "command": command,
            "seed": self.config.seed,
            "config": self.config,
            "inputs": self.inputs.0,
            "result": result,
        })
    }

    fn write(&self, name: &str, contents: &str) -> Outcome<PathBuf> {
        fs::create_dir_all(&self.config.out)
            .with_context(|| format!("cannot create {}", self.config.out.display()))
            .map_err(io)?;
        let path = self.config.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display())).map_err(io)?;
        Ok(path)
    }

    fn write_report(&self, command: &str, result: impl Serialize) -> Outcome<PathBuf> {
        let text = serde_json::to_string_pretty(&self.envelope(command, result)).expect("serializable report");
        self.write(&format!("{}.{command}.json", self.label()), &(text + "\n"))
    }
}

pub fn run(command: Command, config_path: Option<&Path>, overrides: &Overrides) -> Outcome<()> {
    let config = RunConfig::load(config_path, overrides).map_err(|e| {
        if config_path.is_some_and(|p| !p.is_file()) {
            io(e)
        } else {
            invalid(e)
        }
    })?;
    config.validate().map_err(invalid)?;
    let mut run = Run { config: &config, inputs: Inputs::default() };
    match command {
        Command::Ingest => ingest(&mut run),
        Command::Stats { gold } => stats(&mut run, gold.as_deref()),
        Command::Linearize { id, mode } => linearize(&mut run, id.as_deref(), mode),
        Command::Mine => mine(&mut run),
        Command::Retrieve { gold } => retrieve(&mut run, gold.as_deref()),
        Command::Exec { program, table } => exec(&mut run, program.as_deref(), table.as_deref()),
        Command::Eval { predictions, retrieval, gold } => eval(&mut run, &predictions, retrieval.as_deref(), gold.as_deref()),
        Command::Score { target, candidate } => score(&run, &target, &candidate),
    }
}

fn summary(report: &IngestReport) -> String {
    format!("{} records: {} accepted, {} rejected, {} warnings", report.total, report.accepted, report.rejected.len(), report.warnings.len())
}

fn ingest(run: &mut Run) -> Outcome<()> {
    let split = run.config.split.clone();
    let Ingested { repository, report } = run.load_split(&split)?;
    let mut records = String::new();
    for record in repository.iter() {
        records.push_str(&serde_json::to_string(&record.to_source_json(&run.config.field_map)).expect("json value"));
        records.push('\n');
    }
    run.write(&format!("{}.records.jsonl", run.label()), &records)?;
    let path = run.write_report("ingest", &report)?;
    println!("{split}: {}", summary(&report));
    for r in &report.rejected {
        println!("  rejected #{} {}: {:?}: {}", r.index, r.id.as_deref().unwrap_or("?"), r.kind, r.detail);
    }
    println!("report: {}", path.display());
    Ok(())
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn stats(run: &mut Run, gold: Option<&Path>) -> Outcome<()> {
    let split = run.config.split.clone();
    let Ingested { repository, report } = run.load_split(&split)?;
    let gold_sets = gold.map(|p| run.load_gold(p)).transpose()?;
    let stats = compute_stats(&repository, gold_sets.as_deref());
    let path = run.write_report("stats", json!({"ingest": summary(&report), "stats": stats}))?;

    let f = &stats.question_type_fractions;
    let o = &stats.operand_question_type_fractions;
    let s = &stats.step_fractions;
    let headers: Vec<String> = ["family", "a", "b", "c", "unclassified"].map(String::from).to_vec();
    let mut rows = vec![
        vec!["evidence text/table/both".into(), pct(f.text_only), pct(f.table_only), pct(f.both), pct(f.unclassified)],
        vec!["operands text/table/both".into(), pct(o.text_only), pct(o.table_only), pct(o.both), pct(o.unclassified)],
        vec!["steps 1/2/3+".into(), pct(s.one), pct(s.two), pct(s.three_plus), "-".into()],
    ];
    if let Some(c) = &stats.coverage {
        rows.push(vec![
            "gold 0/1-9/10+".into(),
            pct(c.none_fraction),
            pct(c.fewer_than_ten_fraction),
            pct(c.ten_or_more_fraction),
            "-".into(),
        ]);
    }
    println!("{split}: {} records", stats.records);
    print!("{}", render_rows(&headers, &rows));
    println!("report: {}", path.display());
    Ok(())
}

fn linearize(run: &mut Run, id: Option<&str>, mode: Option<finqa_cbr::corpus::LinearizeMode>) -> Outcome<()> {
    let split = run.config.split.clone();
    let mode = mode.unwrap_or(run.config.linearize.mode);
    let repository = run.load_split(&split)?.repository;
    if let Some(id) = id {
        let record = repository.get(id).ok_or_else(|| invalid(anyhow!("no record `{id}` in {split}")))?;
        for sentence in linearize_table(&record.table, mode).sentences {
            println!("{sentence}");
        }
        return Ok(());
    }
    let mut out = String::new();
    for record in repository.iter() {
        let l = linearize_table(&record.table, mode);
        let line = json!({"id": record.id, "sentences": l.sentences, "skipped_empty": l.skipped_empty});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    let path = run.write(&format!("{}.linearized.jsonl", run.label()), &out)?;
    println!("{} records linearized: {}", repository.len(), path.display());
    Ok(())
}

/// Gold sets for every query of `queries` against `cases`.
fn mine_sets(run: &mut Run, queries: &CaseRepository, cases: &CaseRepository) -> Outcome<Vec<GoldCaseSet>> {
    let mining = run.config.mining_config().map_err(invalid)?;
    let model;
    let table;
    let similarity = match run.config.similarity_source().map_err(invalid)? {
        SimilaritySource::Lexical => {
            model = TfIdfModel::fit(cases.iter().map(|c| c.question.as_str()));
            QuestionSimilarity::Lexical(&model)
        }
        SimilaritySource::Embedding => {
            table = run.load_embeddings()?;
            QuestionSimilarity::Embeddings(&table)
        }
    };
    let miner = GoldCaseMiner::new(cases, mining, Some(similarity)).map_err(invalid)?;
    miner.mine_all(queries.records()).map_err(invalid)
}

fn load_pair(run: &mut Run, cases_split: &str) -> Outcome<(CaseRepository, Option<CaseRepository>)> {
    let split = run.config.split.clone();
    let queries = run.load_split(&split)?.repository;
    let same = cases_split == split || run.config.split_path(cases_split).ok() == run.config.split_path(&split).ok();
    let cases = if same { None } else { Some(run.load_split(cases_split)?.repository) };
    Ok((queries, cases))
}

fn mine(run: &mut Run) -> Outcome<()> {
    let cases_split = run.config.mining_cases_split().to_string();
    let (queries, cases) = load_pair(run, &cases_split)?;
    let cases = cases.as_ref().unwrap_or(&queries);
    let sets = mine_sets(run, &queries, cases)?;
    let mut lines = String::new();
    for set in &sets {
        lines.push_str(&serde_json::to_string(set).expect("json"));
        lines.push('\n');
    }
    let gold_path = run.write(&format!("{}.gold.jsonl", run.label()), &lines)?;
    let coverage = finqa_cbr::corpus::CoverageHistogram::from_gold_sets(&sets);
    let mean_gold = sets.iter().map(|s| s.gold.len()).sum::<usize>() as f64 / sets.len().max(1) as f64;
    let path = run.write_report(
        "mine",
        json!({"queries": sets.len(), "cases": cases.len(), "mean_gold": mean_gold, "coverage": coverage, "gold_file": gold_path}),
    )?;
    let headers: Vec<String> = ["queries", "0 gold", "1-9 gold", "10+ gold"].map(String::from).to_vec();
    let row = vec![
        coverage.queries.to_string(),
        pct(coverage.none_fraction),
        pct(coverage.fewer_than_ten_fraction),
        pct(coverage.ten_or_more_fraction),
    ];
    print!("{}", render_rows(&headers, &[row]));
    println!("gold cases: {}", gold_path.display());
    println!("report: {}", path.display());
    Ok(())
}

fn precision_table(run: &Run, results: &[RetrievalResult], gold: &[GoldCaseSet]) -> Outcome<BTreeMap<usize, PrecisionAtK>> {
    run.config
        .retrieval
        .k
        .iter()
        .map(|&k| precision_at_k(results, gold, k).map(|p| (k, p)).map_err(invalid))
        .collect()
}

fn retrieve(run: &mut Run, gold: Option<&Path>) -> Outcome<()> {
    let cases_split = run.config.retrieval.cases.clone();
    let (queries, cases) = load_pair(run, &cases_split)?;
    let cases = cases.as_ref().unwrap_or(&queries);
    let mode = run.config.retrieval.index_mode;
    let embeddings = if mode == IndexMode::Embedding { Some(run.load_embeddings()?) } else { None };
    let index = CaseIndex::build(cases, mode, &run.config.index_params(), embeddings.as_ref()).map_err(invalid)?;

    let query_list: Vec<(String, Query)> = queries
        .iter()
        .map(|q| match &embeddings {
            Some(table) => table
                .get(&q.id)
                .map(|v| (q.id.clone(), Query::Vector(v)))
                .ok_or_else(|| invalid(anyhow!("no embedding for query `{}`", q.id))),
            None => Ok((q.id.clone(), Query::Text(&q.question))),
        })
        .collect::<Outcome<_>>()?;
    let max_k = run.config.retrieval.k.iter().copied().max().unwrap_or(1);
    let coarse = retrieve_all(&index, &query_list, max_k).map_err(invalid)?;
    let retrieval_path = run.write(&format!("{}.retrieval.jsonl", run.label()), &write_results(&coarse))?;

    let reranker: Option<Box<dyn RerankScorer>> = match run.config.rerank() {
        Rerank::None => None,
        Rerank::Oracle => Some(Box::new(ProgramScoreOracle::new(&queries, cases, run.config.weights().map_err(invalid)?))),
        Rerank::File(path) => {
            let text = run.inputs.read(&path)?;
            Some(Box::new(RerankScores::parse(&text).map_err(|e| io(anyhow!("{}: {e}", path.display())))?))
        }
    };
    let reranked = match &reranker {
        None => None,
        Some(scorer) => {
            let n_coarse = run.config.retrieval.n_coarse;
            let results = query_list
                .iter()
                .map(|(id, q)| two_stage_retrieve(&index, id, *q, scorer.as_ref(), n_coarse, max_k))
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            run.write(&format!("{}.reranked.jsonl", run.label()), &write_results(&results))?;
            Some(results)
        }
    };

    let gold_sets = match gold {
        Some(path) => run.load_gold(path)?,
        None => mine_sets(run, &queries, cases)?,
    };
    let coarse_precision = precision_table(run, &coarse, &gold_sets)?;
    let reranked_precision = reranked.as_ref().map(|r| precision_table(run, r, &gold_sets)).transpose()?;
    let path = run.write_report(
        "retrieve",
        json!({
            "queries": queries.len(),
            "cases": cases.len(),
            "index_mode": mode,
            "retrieval_file": retrieval_path,
            "precision": {"coarse": coarse_precision, "reranked": reranked_precision},
        }),
    )?;

    let mut headers = vec!["stage".to_string()];
    headers.extend(run.config.retrieval.k.iter().map(|k| format!("P@{k}")));
    let row = |name: &str, table: &BTreeMap<usize, PrecisionAtK>| {
        std::iter::once(name.to_string()).chain(run.config.retrieval.k.iter().map(|k| pct(table[k].precision))).collect()
    };
    let mut rows = vec![row("coarse", &coarse_precision)];
    if let Some(r) = &reranked_precision {
        rows.push(row("reranked", r));
    }
    print!("{}", render_rows(&headers, &rows));
    println!("report: {}", path.display());
    Ok(())
}

fn exec(run: &mut Run, program: Option<&str>, table: Option<&Path>) -> Outcome<()> {
    if let Some(text) = program {
        let program = parse_program(text).map_err(invalid)?;
        let table = match table {
            None => None,
            Some(path) => {
                let grid: Vec<Vec<String>> = serde_json::from_str(&run.inputs.read(path)?)
                    .with_context(|| format!("{} is not a JSON grid of strings", path.display()))
                    .map_err(io)?;
                Some(TableData::from_grid(&grid).0)
            }
        };
        let value = execute(&program, table.as_ref()).map_err(invalid)?;
        println!("{value}");
        return Ok(());
    }
    let split = run.config.split.clone();
    let repository = run.load_split(&split)?.repository;
    let report = gold_execution_check(&repository, run.config.tolerance());
    let path = run.write_report("exec", &report)?;
    println!("{split}: {}/{} gold programs reproduce the stored answer ({}%)", report.matched, report.total, pct(report.match_rate));
    for (kind, count) in &report.by_kind {
        println!("  {kind:?}: {count}");
    }
    println!("report: {}", path.display());
    Ok(())
}

fn eval(run: &mut Run, predictions: &Path, retrieval: Option<&Path>, gold: Option<&Path>) -> Outcome<()> {
    let split = run.config.split.clone();
    let repository = run.load_split(&split)?.repository;
    let text = run.inputs.read(predictions)?;
    let predictions = parse_predictions(&text).map_err(|e| io(anyhow!("{}: {e}", predictions.display())))?;
    let mut report = evaluate(&predictions, &repository, run.config.tolerance()).map_err(invalid)?;
    if let Some(path) = retrieval {
        let results = read_results(&run.inputs.read(path)?).map_err(|e| io(anyhow!("{}: {e}", path.display())))?;
        let gold_sets = match gold {
            Some(gold) => run.load_gold(gold)?,
            None => return Err(invalid(anyhow!("--retrieval needs --gold"))),
        };
        report.precision_at_k = precision_table(run, &results, &gold_sets)?;
    }
    let table = render_table(&report);
    run.write(&format!("{}.eval.txt", run.label()), &table)?;
    let path = run.write_report("eval", &report)?;
    print!("{table}");
    let c = report.counts;
    println!(
        "{} predictions: {} correct, {} wrong, {} exec errors, {} unparsable; {} exec-correct but program-wrong",
        c.total, c.correct, c.wrong, c.exec_error, c.unparsable, report.exec_correct_program_wrong
    );
    println!("report: {}", path.display());
    Ok(())
}

fn score(run: &Run, target: &str, candidate: &str) -> Outcome<()> {
    let t = parse_program(target).map_err(|e| invalid(anyhow!("target: {e}")))?;
    let c = parse_program(candidate).map_err(|e| invalid(anyhow!("candidate: {e}")))?;
    let weights = run.config.weights().map_err(invalid)?;
    let score = program_score(&t, &c, weights).map_err(invalid)?;
    let result = json!({
        "target": t.to_string(),
        "candidate": c.to_string(),
        "score": score,
        "equivalent": programs_equivalent(&t, &c),
        "numerically_equivalent": random_eval_equivalent(&t, &c, run.config.equivalence.oracle_trials, run.config.seed),
    });
    println!("{}", serde_json::to_string_pretty(&run.envelope("score", result)).expect("json"));
    Ok(())
}
