use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use finqa_cbr::synth::seeded_corpus;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(records: usize) -> Self {
        let dir = TempDir::new().unwrap();
        let train = Value::Array(seeded_corpus(records, 1, "train-"));
        let dev = Value::Array(seeded_corpus(records / 4, 2, "dev-"));
        fs::write(dir.path().join("train.json"), train.to_string()).unwrap();
        fs::write(dir.path().join("dev.json"), dev.to_string()).unwrap();
        let config = format!(
            "seed = 7\nout = \"{out}\"\n[data]\ntrain = \"{train}\"\ndev = \"{dev}\"\n",
            out = dir.path().join("out").display(),
            train = dir.path().join("train.json").display(),
            dev = dir.path().join("dev.json").display(),
        );
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.path("run.toml");
        Command::new(env!("CARGO_BIN_EXE_finqa-cbr"))
            .args(args)
            .arg("--config")
            .arg(&config)
            .output()
            .unwrap()
    }

    fn report(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path("out").join(name)).unwrap()).unwrap()
    }
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn assert_success(output: &Output) {
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn ingest_reports_and_is_deterministic() {
    let ws = Workspace::new(80);
    let first = ws.run(&["ingest", "--split", "train"]);
    assert_success(&first);
    let report = ws.report("train.ingest.json");
    assert_eq!(report["result"]["accepted"], 80);
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config"]["split"], "train");
    assert_eq!(report["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let bytes = fs::read(ws.path("out/train.ingest.json")).unwrap();
    let records = fs::read(ws.path("out/train.records.jsonl")).unwrap();

    assert_success(&ws.run(&["ingest", "--split", "train"]));
    assert_eq!(fs::read(ws.path("out/train.ingest.json")).unwrap(), bytes);
    assert_eq!(fs::read(ws.path("out/train.records.jsonl")).unwrap(), records);
}

#[test]
fn ingest_lists_rejected_records() {
    let ws = Workspace::new(4);
    let mut records: Vec<Value> = serde_json::from_str(&fs::read_to_string(ws.path("train.json")).unwrap()).unwrap();
    records[1]["qa"]["program"] = Value::String("subtract(#3, 1)".into());
    let bad_id = records[1]["id"].clone();
    fs::write(ws.path("bad.json"), Value::Array(records).to_string()).unwrap();
    let out = ws.run(&["ingest", "--split", ws.path("bad.json").to_str().unwrap()]);
    assert_success(&out);
    let report = ws.report("bad.ingest.json");
    assert_eq!(report["result"]["rejected"][0]["id"], bad_id);
    assert_eq!(report["result"]["rejected"][0]["kind"], "UnparsableProgram");
}

#[test]
fn exit_codes() {
    let ws = Workspace::new(4);
    assert_eq!(ws.run(&["ingest", "--split", "nowhere"]).status.code(), Some(2));
    fs::write(ws.path("missing.toml"), "[data]\ntrain = \"/nonexistent/train.json\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_finqa-cbr"))
        .args(["ingest", "--config", ws.path("missing.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(ws.run(&["mine", "--w-ops", "0.2"]).status.code(), Some(1));
    assert_eq!(ws.run(&["score", "--target", "add(1, 2", "--candidate", "add(1, 2)"]).status.code(), Some(1));
    assert_eq!(ws.run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn impossible_threshold_mines_nothing() {
    let ws = Workspace::new(40);
    assert_success(&ws.run(&["mine", "--threshold", "1.01"]));
    let report = ws.report("train.mine.json");
    assert_eq!(report["result"]["coverage"]["none"], 40);
    assert_eq!(report["config"]["mining"]["threshold"], 1.01);

    assert_success(&ws.run(&["mine"]));
    let report = ws.report("train.mine.json");
    assert!(report["result"]["coverage"]["none"].as_u64().unwrap() < 40);
    let gold = fs::read_to_string(ws.path("out/train.gold.jsonl")).unwrap();
    assert_eq!(gold.lines().count(), 40);
}

/// Gold programs, moved half the split along when `shifted`.
fn write_predictions(ws: &Workspace, name: &str, shifted: bool) -> PathBuf {
    let records: Vec<Value> = serde_json::from_str(&fs::read_to_string(ws.path("dev.json")).unwrap()).unwrap();
    let n = records.len();
    let shift = if shifted { n / 2 } else { 0 };
    let lines: String = (0..n)
        .map(|i| {
            let program = records[(i + shift) % n]["qa"]["program"].as_str().unwrap();
            format!("{}\t{}\n", records[i]["id"].as_str().unwrap(), program)
        })
        .collect();
    let path = ws.path(name);
    fs::write(&path, lines).unwrap();
    path
}

#[test]
fn eval_gold_and_shuffled_predictions() {
    let ws = Workspace::new(200);
    let gold = write_predictions(&ws, "gold.tsv", false);
    let out = ws.run(&["eval", "--split", "dev", "--predictions", gold.to_str().unwrap()]);
    assert_success(&out);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "Exe Acc  Prog Acc  Ops Acc");
    assert_eq!(lines.next().unwrap(), "100.00   100.00    100.00");
    let report = ws.report("dev.eval.json");
    assert_eq!(report["result"]["execution_accuracy"], 1.0);
    assert_eq!(report["seed"], 7);
    assert!(report["config"].is_object());
    assert!(ws.path("out/dev.eval.txt").is_file());

    let shuffled = write_predictions(&ws, "shuffled.tsv", true);
    assert_success(&ws.run(&["eval", "--split", "dev", "--predictions", shuffled.to_str().unwrap()]));
    let report = ws.report("dev.eval.json");
    assert!(report["result"]["execution_accuracy"].as_f64().unwrap() < 0.15);
    assert!(report["result"]["program_accuracy"].as_f64().unwrap() < 0.5);
    let ops = report["result"]["operator_accuracy"].as_f64().unwrap();
    assert!(ops >= report["result"]["program_accuracy"].as_f64().unwrap());

    fs::write(ws.path("unknown.tsv"), "nope\tadd(1, 2)\n").unwrap();
    let out = ws.run(&["eval", "--split", "dev", "--predictions", ws.path("unknown.tsv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn retrieve_with_oracle_rerank_dominates_coarse() {
    let ws = Workspace::new(200);
    let config = fs::read_to_string(ws.path("run.toml")).unwrap() + "[retrieval]\nrerank = \"oracle\"\nn_coarse = 50\n";
    fs::write(ws.path("run.toml"), config).unwrap();
    let out = ws.run(&["retrieve", "--split", "dev", "--k", "1,3,5"]);
    assert_success(&out);
    assert!(stdout(&out).lines().next().unwrap().split_whitespace().eq(["stage", "P@1", "P@3", "P@5"]));
    let report = ws.report("dev.retrieve.json");
    let precision = &report["result"]["precision"];
    for k in ["1", "3", "5"] {
        let coarse = precision["coarse"][k]["precision"].as_f64().unwrap();
        let reranked = precision["reranked"][k]["precision"].as_f64().unwrap();
        assert!(reranked >= coarse, "k={k}: {reranked} < {coarse}");
    }
    let lines = fs::read_to_string(ws.path("out/dev.retrieval.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 50);
}

#[test]
fn exec_and_score() {
    let ws = Workspace::new(30);
    let out = ws.run(&["exec", "--program", "divide(10, 2), divide(9, 3), subtract(#0, #1)"]);
    assert_success(&out);
    assert_eq!(stdout(&out).trim(), "2");

    fs::write(ws.path("table.json"), r#"[["", "2009", "2008"], ["revenue", "$ 1,000", "( 200 )"]]"#).unwrap();
    let out = ws.run(&["exec", "--program", "table_sum(Revenue, none)", "--table", ws.path("table.json").to_str().unwrap()]);
    assert_success(&out);
    assert_eq!(stdout(&out).trim(), "800");
    assert_eq!(ws.run(&["exec", "--program", "divide(1, 0)"]).status.code(), Some(1));

    assert_success(&ws.run(&["exec"]));
    let report = ws.report("train.exec.json");
    assert_eq!(report["result"]["matched"], 30);

    let out = ws.run(&["score", "--target", "add(1, 2), multiply(#0, 3)", "--candidate", "add(2, 1), multiply(3, #0)"]);
    assert_success(&out);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"]["equivalent"], true);
    assert_eq!(v["result"]["numerically_equivalent"], true);
    assert!(v["result"]["score"]["s"].as_f64().unwrap() < 1.0);
}

#[test]
fn stats_and_linearize() {
    let ws = Workspace::new(60);
    assert_success(&ws.run(&["mine"]));
    let gold = ws.path("out/train.gold.jsonl");
    let out = ws.run(&["stats", "--gold", gold.to_str().unwrap()]);
    assert_success(&out);
    assert!(stdout(&out).contains("gold 0/1-9/10+"));
    let stats = &ws.report("train.stats.json")["result"]["stats"];
    let f = &stats["question_type_fractions"];
    let sum: f64 = ["text_only", "table_only", "both", "unclassified"].iter().map(|k| f[k].as_f64().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-9);
    assert_eq!(stats["coverage"]["queries"], 60);

    let out = ws.run(&["linearize", "--id", "train-00000-0"]);
    assert_success(&out);
    assert!(stdout(&out).lines().all(|l| l.starts_with("the ") && l.contains(" of ") && l.contains(" was ")));
    assert_success(&ws.run(&["linearize", "--mode", "row"]));
    let lines = fs::read_to_string(ws.path("out/train.linearized.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 60);
}

#[test]
fn inputs_are_not_modified() {
    let ws = Workspace::new(20);
    let before = fs::read(ws.path("train.json")).unwrap();
    for args in [&["ingest"][..], &["stats"], &["mine"], &["exec"], &["linearize"]] {
        assert_success(&ws.run(args));
    }
    assert_eq!(fs::read(ws.path("train.json")).unwrap(), before);
    assert!(Path::new(&ws.path("out")).is_dir());
}
