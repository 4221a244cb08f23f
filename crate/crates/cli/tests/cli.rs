use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    root().join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_structprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn check_schema(name: &str, value: &Value) {
    let path = root().join("schemas").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{value:#}");
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Pipeline {
    _dir: tempfile::TempDir,
    params: PathBuf,
    curve: PathBuf,
    pred: PathBuf,
    train_summary: Value,
    eval: Value,
}

/// synth -> train -> decode -> eval on the synthetic fixtures.
fn pipeline(threads: &str) -> Pipeline {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let (train_tb, test_tb) = (fixture("synthetic_train.conllu"), fixture("synthetic_test.conllu"));

    let synth = ok(&["synth", s(&train_tb), "-o", s(&p("train.spe1")), "--dim", "11", "--seed", "1"]);
    check_schema("synth", &synth);
    assert_eq!(synth["sentences"], 160);
    ok(&["synth", s(&test_tb), "-o", s(&p("test.spe1")), "--dim", "11", "--seed", "2"]);

    let train_summary = ok(&[
        "--threads", threads, "train",
        "--treebank", s(&train_tb), "--embeddings", s(&p("train.spe1")),
        "-o", s(&p("params.json")), "--curve", s(&p("curve.csv")),
        "--lr", "0.01", "--epochs", "40", "--seed", "3",
    ]);
    check_schema("train", &train_summary);
    check_schema("params", &read_json(&p("params.json")));

    let decode = ok(&[
        "--threads", threads, "decode",
        "--params", s(&p("params.json")), "--embeddings", s(&p("test.spe1")),
        "--treebank", s(&test_tb), "-o", s(&p("pred.conllu")),
    ]);
    check_schema("decode", &decode);
    assert_eq!(decode["sentences"], 40);

    let eval = ok(&[
        "--threads", threads, "eval",
        "--gold", s(&test_tb), "--pred", s(&p("pred.conllu")),
        "--csv", s(&p("eval.csv")), "--sentence-scores", s(&p("scores.csv")),
    ]);
    check_schema("eval", &eval);

    Pipeline {
        params: p("params.json"),
        curve: p("curve.csv"),
        pred: p("pred.conllu"),
        _dir: dir,
        train_summary,
        eval,
    }
}

#[test]
fn oracle_pipeline_recovers_trees() {
    let run = pipeline("0");
    let uas = run.eval["uas"].as_f64().unwrap();
    assert!(uas > 95.0, "UAS {uas}");
    assert_eq!(run.train_summary["train_sentences"], 144);
    assert_eq!(run.train_summary["dev_sentences"], 16);
    assert_eq!(run.train_summary["layer"], "0");

    let curve = std::fs::read_to_string(&run.curve).unwrap();
    assert!(curve.starts_with("layer,epoch,split,metric,value\n"));
    assert!(curve.contains(",dev,distance_loss,"));
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let a = pipeline("1");
    let b = pipeline("4");
    for (x, y) in [(&a.params, &b.params), (&a.curve, &b.curve), (&a.pred, &b.pred)] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    assert_eq!(a.eval, b.eval);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["--json-errors", "frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    check_schema("error", &err);
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn missing_input_exits_one() {
    let out = run(&["eval", "--gold", "missing.conllu", "--pred", "missing.conllu"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found: missing.conllu"));

    let out = run(&["--json-errors", "eval", "--gold", "missing.conllu", "--pred", "x"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    check_schema("error", &err);
    assert_eq!(err["error"]["kind"], "not_found");
    assert_eq!(err["error"]["exit_code"], 1);
}

#[test]
fn help_exits_zero() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["train", "--help"]).status.success());
}

#[test]
fn worked_example_stats_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let (ud, sud) = (fixture("fig1_ud.conllu"), fixture("fig1_sud.conllu"));

    let stats = ok(&["stats", s(&ud), "--heights", s(&p("ud_h.csv"))]);
    check_schema("stats", &stats);
    assert_eq!(stats["mean_height"], 2.0);
    let out = run(&["stats", s(&sud), "-o", s(&p("sud.json")), "--heights", s(&p("sud_h.csv"))]);
    assert!(out.status.success());
    let sud_stats = read_json(&p("sud.json"));
    check_schema("stats", &sud_stats);
    assert_eq!(sud_stats["mean_height"], 4.0);
    assert_eq!(std::fs::read_to_string(p("sud_h.csv")).unwrap(), "sent_id,value\nfig1,4\n");

    // SUD scored against UD: 5 of 9 heads agree.
    let eval = ok(&["eval", "--gold", s(&ud), "--pred", s(&sud)]);
    check_schema("eval", &eval);
    assert_eq!(eval["correct"], 5);

    // Too few items for any test; the report says so instead of failing.
    let cmp = ok(&[
        "compare", "--a", s(&p("ud_h.csv")), "--b", s(&p("sud_h.csv")),
        "--covariate", s(&p("sud_h.csv")), "--covariate-base", s(&p("ud_h.csv")),
    ]);
    check_schema("compare", &cmp);
    assert_eq!(cmp["mean_difference"], 2.0);
    assert!(cmp["wilcoxon"].is_null());
    assert!(!cmp["notes"].as_array().unwrap().is_empty());
}

#[test]
fn compare_runs_tests_on_enough_items() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, values: &[f64]| {
        let path = dir.path().join(name);
        let mut text = String::from("sent_id,value\n");
        for (i, v) in values.iter().enumerate() {
            text.push_str(&format!("s{i},{v}\n"));
        }
        std::fs::write(&path, text).unwrap();
        path
    };
    let a = write("a.csv", &[80.0, 75.0, 90.0, 60.0, 70.0, 85.0, 65.0, 95.0]);
    let b = write("b.csv", &[70.0, 72.0, 84.0, 49.0, 61.0, 83.0, 50.0, 94.0]);
    let cov = write("cov.csv", &[3.0, 1.0, 2.0, 5.0, 4.0, 0.5, 6.0, 0.2]);
    let cmp = ok(&["compare", "--a", s(&a), "--b", s(&b), "--covariate", s(&cov)]);
    check_schema("compare", &cmp);
    assert_eq!(cmp["wilcoxon"]["method"], "exact");
    assert_eq!(cmp["wilcoxon"]["n"], 8);
    // All eight differences share a sign: two-sided exact p = 2 / 2^8.
    assert!((cmp["wilcoxon"]["p_value"].as_f64().unwrap() - 2.0 / 256.0).abs() < 1e-12);
    assert!(cmp["pearson"]["r"].as_f64().unwrap() < -0.9);

    let short = write("short.csv", &[1.0, 2.0]);
    let out = run(&["compare", "--a", s(&a), "--b", s(&short)]);
    assert_eq!(out.status.code(), Some(1));
}
