use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use topparse::cli::run;

const EVENT_TREE: &str = "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the [SL:NAME_EVENT Eagles ] [SL:CAT_EVENT game ] ] ] ]";

struct Run {
    code: u8,
    out: String,
    err: String,
}

fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("topparse").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_violations_with_location() {
    let dir = TempDir::new().unwrap();
    let good = file(&dir, "good.txt", &format!("{EVENT_TREE}\n[IN:A b ]\n"));
    assert_eq!(cli(&["validate", s(&good)]).code, 0);

    let bad = file(&dir, "bad.txt", "[IN:A b ]\n[SL:X y ]\n");
    let r = cli(&["validate", s(&bad)]);
    assert_eq!(r.code, 1);
    assert!(r.out.contains("bad.txt:2:RootNotIntent"), "{}", r.out);
    assert!(!r.out.contains(":1:"));
}

#[test]
fn validate_empty_file_warns_but_succeeds() {
    let dir = TempDir::new().unwrap();
    let empty = file(&dir, "empty.txt", "");
    let r = cli(&["validate", s(&empty)]);
    assert_eq!(r.code, 0);
    assert!(r.err.contains("warning"));
}

#[test]
fn missing_input_is_an_io_error() {
    let r = cli(&["validate", "/nonexistent/trees.txt"]);
    assert_eq!(r.code, 3);
    assert_eq!(cli(&["train", "/nonexistent/train.tsv", "-o", "/tmp/never.json"]).code, 3);
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(cli(&["frobnicate"]).code, 2);
    assert_eq!(cli(&["gradcheck", "--set", "no_such_key=1"]).code, 2);
    assert_eq!(cli(&["gradcheck", "--set", "missing-equals"]).code, 2);
}

#[test]
fn stats_counts_lines_and_writes_histograms() {
    let dir = TempDir::new().unwrap();
    let one = file(&dir, "one.tsv", &format!("Driving directions to the Eagles game\tDriving directions to the Eagles game\t{EVENT_TREE}\n"));
    let prefix = dir.path().join("out/stats");
    let r = cli(&["stats", s(&one), "--out", s(&prefix)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let doc: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(doc["stats"]["count"], 1);
    let depth = fs::read_to_string(dir.path().join("out/stats.depth.csv")).unwrap();
    assert_eq!(depth, "depth,count\n4,1\n");
    assert!(dir.path().join("out/stats.length.csv").exists());
    assert!(dir.path().join("out/stats.depth.csv.run.json").exists());
    assert!(dir.path().join("out/stats.json").exists());
}

#[test]
fn strict_mode_fails_on_a_malformed_line() {
    let dir = TempDir::new().unwrap();
    let text = format!("a b\ta b\t[IN:A a b ]\nbroken line\n");
    let corpus = file(&dir, "c.tsv", &text);
    let lenient = cli(&["stats", s(&corpus)]);
    assert_eq!(lenient.code, 0);
    assert!(lenient.err.contains("skipped"));
    assert_ne!(cli(&["--strict", "stats", s(&corpus)]).code, 0);
}

#[test]
fn oracle_sequences() {
    let dir = TempDir::new().unwrap();
    let trees = file(&dir, "t.txt", &format!("[IN:X hello ]\n{EVENT_TREE}\n"));
    let r = cli(&["oracle", s(&trees), "--verify"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let lines: Vec<&str> = r.out.lines().collect();
    assert_eq!(lines[0], "NT(IN:X) SHIFT REDUCE");
    assert_eq!(lines[1].split(' ').count(), 16);
    assert!(r.err.contains("0 differences"));
}

#[test]
fn eval_scores_an_external_prediction_file() {
    let dir = TempDir::new().unwrap();
    let gold = file(&dir, "gold.txt", &format!("{EVENT_TREE}\n[IN:A x [SL:B y ] ]\n"));
    let identical = cli(&["eval", s(&gold), s(&gold)]);
    assert_eq!(identical.code, 0);
    let json_start = identical.out.find('{').unwrap();
    let doc: serde_json::Value = serde_json::from_str(&identical.out[json_start..]).unwrap();
    for key in ["exact_match", "bracket_f1", "tl_f1", "tree_validity"] {
        assert_eq!(doc["metrics"][key], 100.0, "{key}");
    }

    let stub = file(
        &dir,
        "seq2seq.txt",
        &format!("{}\n[IN:A x [SL:B y ]\n", EVENT_TREE.replace("CAT_EVENT", "NAME_EVENT")),
    );
    let r = cli(&["eval", s(&gold), s(&stub), "--system", "seq2seq"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("seq2seq"));
    let doc: serde_json::Value = serde_json::from_str(&r.out[r.out.find('{').unwrap()..]).unwrap();
    assert_eq!(doc["metrics"]["tree_validity"], 50.0);
    assert_eq!(doc["metrics"]["exact_match"], 0.0);

    let short = file(&dir, "short.txt", &format!("{EVENT_TREE}\n"));
    assert_eq!(cli(&["eval", s(&gold), s(&short)]).code, 1);
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let ok = cli(&["gradcheck"]);
    assert_eq!(ok.code, 0, "{}", ok.out);
    assert!(ok.out.starts_with("gradient check PASS"));
    assert!(ok.out.contains("worst parameter"));
    let bad = cli(&["gradcheck", "--corrupt"]);
    assert_eq!(bad.code, 1);
    assert!(bad.out.contains("worst parameter scorer.w [0]"), "{}", bad.out);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let corpus = file(&dir, "c.tsv", "a b\ta b\t[IN:A a [SL:B b ] ]\n");
    let config = file(&dir, "run.conf", "# tiny\nword_dim = 3\nlstm_units=4\nlabel_dim=2\naction_dim=2\nepochs=2\n");
    let ckpt = dir.path().join("m.json");
    let r = cli(&["--config", s(&config), "train", s(&corpus), "-o", s(&ckpt), "--set", "lstm_units=3", "--epochs", "1"]);
    assert_eq!(r.code, 0, "{}", r.err);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&ckpt).unwrap()).unwrap();
    assert_eq!(doc["config"]["word_dim"], 3);
    assert_eq!(doc["config"]["lstm_units"], 3);
    assert_eq!(doc["config"]["epochs"], 1);
    assert_eq!(doc["run_config"]["config"]["lstm_units"], 3);
}

#[test]
fn zero_epochs_writes_the_initial_model() {
    let dir = TempDir::new().unwrap();
    let corpus = file(&dir, "c.tsv", "a b\ta b\t[IN:A a [SL:B b ] ]\n");
    let tiny = ["--set", "word_dim=3", "--set", "lstm_units=3", "--set", "label_dim=2", "--set", "action_dim=2"];
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let mut args = vec!["train", s(&corpus), "-o", s(p), "--epochs", "0"];
        args.extend(tiny);
        assert_eq!(cli(&args).code, 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let model = topparse::checkpoint::load(&a).unwrap();
    assert_eq!(model.store.timestep(), 0);
}

#[test]
fn synth_is_seeded() {
    let a = cli(&["--seed", "3", "synth", "--count", "5"]);
    let b = cli(&["--seed", "3", "synth", "--count", "5"]);
    let c = cli(&["--seed", "4", "synth", "--count", "5"]);
    assert_eq!(a.out, b.out);
    assert_ne!(a.out, c.out);
    assert_eq!(a.out.lines().count(), 5);
}

#[test]
fn eval_accepts_a_corpus_file_as_predictions() {
    let dir = TempDir::new().unwrap();
    let corpus = file(&dir, "c.tsv", "x y\tx y\t[IN:A x [SL:B y ] ]\nz\tz\t[IN:C z ]\n");
    let r = cli(&["eval", s(&corpus), s(&corpus)]);
    assert_eq!(r.code, 0, "{}", r.err);
    let doc: serde_json::Value = serde_json::from_str(&r.out[r.out.find('{').unwrap()..]).unwrap();
    assert_eq!(doc["metrics"]["exact_match"], 100.0);
}
