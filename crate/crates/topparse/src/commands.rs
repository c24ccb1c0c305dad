//! The subcommands. Each returns the process exit code, writing results to
//! the console or to files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use topparse_core::dataset::{build_vocabs, compute_stats, Example, Split};
use topparse_core::metrics::evaluate;
use topparse_core::neural::grad_check;
use topparse_core::rnng::{loss_and_gradients, parse_beam, parse_greedy, prepare, train, EpochEnd, Model, RnngConfig};
use topparse_core::transitions::{execute, format_actions, oracle};
use topparse_core::treebank::{parse_bracketed, validate, Tree};

use crate::checkpoint;
use crate::config::{resolve, resolve_from, run_info};
use crate::error::{CliError, EXIT_FAILED, EXIT_OK};
use crate::hogwild::train_hogwild;
use crate::io::{load_embeddings, load_tsv, read_lines, write_text};
use crate::synth::{synthetic_corpus, to_tsv};

/// Standard output and error streams.
pub struct Console<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub strict: bool,
}

impl Globals {
    fn overrides(&self, extra: &[(String, String)]) -> Vec<(String, String)> {
        let mut all = extra.to_vec();
        if let Some(s) = self.seed {
            all.push(("seed".to_string(), s.to_string()));
        }
        all
    }
}

fn say(w: &mut dyn Write, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(w, "{text}").map_err(|e| CliError::io(Path::new("<console>"), e))
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

/// The tree column of a line: the whole line, or the last tab-separated
/// field of a corpus line.
fn tree_column(line: &str) -> &str {
    line.rsplit('\t').next().unwrap_or(line)
}

/// Writes `text` to `path` plus a `<path>.run.json` provenance sidecar, or to
/// the console when no path is given.
fn emit(con: &mut Console<'_>, path: Option<&Path>, text: &str, info: &Value) -> Result<(), CliError> {
    match path {
        Some(p) => {
            write_text(p, text)?;
            write_text(&sidecar(p), &pretty(info))
        }
        None => con.out.write_all(text.as_bytes()).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

/// Checks every tree against the well-formedness constraints, reporting
/// `file:line:constraint` for each problem.
pub fn cmd_validate(path: &Path, con: &mut Console<'_>) -> Result<u8, CliError> {
    let lines = read_lines(path)?;
    let mut checked = 0;
    let mut bad = 0;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        checked += 1;
        let at = format!("{}:{}", path.display(), i + 1);
        match parse_bracketed(tree_column(line)) {
            Err(e) => {
                bad += 1;
                say(con.out, format_args!("{at}:TreeFormat {e}"))?;
            }
            Ok(tree) => {
                let violations = validate(&tree);
                if !violations.is_empty() {
                    bad += 1;
                }
                for v in violations {
                    say(con.out, format_args!("{at}:{v}"))?;
                }
            }
        }
    }
    if checked == 0 {
        say(con.err, format_args!("warning: {}: no trees found", path.display()))?;
    }
    say(con.err, format_args!("{checked} trees checked, {bad} invalid"))?;
    Ok(if bad == 0 { EXIT_OK } else { EXIT_FAILED })
}

/// Corpus statistics as JSON, plus depth and length histograms as CSV when
/// `out` names an output prefix.
pub fn cmd_stats(g: &Globals, inputs: &[PathBuf], out: Option<&Path>, con: &mut Console<'_>) -> Result<u8, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("stats needs at least one corpus file".into()));
    }
    let mut examples: Vec<Example> = Vec::new();
    let mut splits = Vec::new();
    for path in inputs {
        let (corpus, rejected) = load_tsv(path, Split::Unsplit, g.strict)?;
        for r in &rejected {
            say(con.err, format_args!("{}:{}: skipped: {}", path.display(), r.line, r.error))?;
        }
        splits.push(json!({"file": path.display().to_string(), "count": corpus.len(), "rejected": rejected.len()}));
        examples.extend(corpus.examples);
    }
    let stats = compute_stats(&examples);
    let paths: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let info = run_info("stats", &paths, None, json!({"strict": g.strict}));
    let doc = json!({"stats": stats, "splits": splits, "run_config": info});
    say(con.out, pretty(&doc))?;
    if let Some(prefix) = out {
        let with = |ext: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        write_text(&with(".json"), &pretty(&doc))?;
        for (ext, header, hist) in [
            (".depth.csv", "depth", &stats.depth_histogram),
            (".length.csv", "length", &stats.length_histogram),
        ] {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut row = |a: String, b: String| w.write_record([a, b]).map_err(CliError::failed);
            row(header.to_string(), "count".to_string())?;
            for (k, v) in hist {
                row(k.to_string(), v.to_string())?;
            }
            let bytes = w.into_inner().map_err(CliError::failed)?;
            let path = with(ext);
            write_text(&path, &String::from_utf8(bytes).map_err(CliError::failed)?)?;
            write_text(&sidecar(&path), &pretty(&info))?;
        }
    }
    Ok(EXIT_OK)
}

/// One oracle action sequence per tree. With `verify`, each sequence is
/// replayed and compared with its tree.
pub fn cmd_oracle(path: &Path, out: Option<&Path>, verify: bool, con: &mut Console<'_>) -> Result<u8, CliError> {
    let mut text = String::new();
    let mut diffs = 0;
    let mut count = 0;
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), i + 1);
        let tree = parse_bracketed(tree_column(line)).map_err(|e| CliError::Failed(format!("{at}: {e}")))?;
        let actions = oracle(&tree).map_err(|e| CliError::Failed(format!("{at}: {e}")))?;
        text.push_str(&format_actions(&actions));
        text.push('\n');
        count += 1;
        if verify {
            match execute(&actions, tree.tokens()) {
                Ok(t) if t == tree => {}
                Ok(t) => {
                    diffs += 1;
                    say(con.err, format_args!("{at}: replay gives {t}"))?;
                }
                Err(e) => {
                    diffs += 1;
                    say(con.err, format_args!("{at}: replay failed: {e}"))?;
                }
            }
        }
    }
    let info = run_info("oracle", &[path], None, json!({"verify": verify}));
    emit(con, out, &text, &info)?;
    if verify {
        say(con.err, format_args!("verified {count} trees, {diffs} differences"))?;
    }
    Ok(if diffs == 0 { EXIT_OK } else { EXIT_FAILED })
}

/// Options of [`cmd_train`].
#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub train: PathBuf,
    pub valid: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    pub log: Option<PathBuf>,
    pub workers: usize,
    pub overrides: Vec<(String, String)>,
}

/// Percentage of `examples` whose greedy parse equals the gold tree.
pub fn greedy_exact_match(model: &Model<f32>, examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let hits = examples
        .iter()
        .filter(|e| parse_greedy(model, &e.tokens).is_ok_and(|p| p.tree == e.tree))
        .count();
    100.0 * hits as f64 / examples.len() as f64
}

/// Trains a parser and writes its checkpoint. Logs one JSON line per epoch
/// with the mean loss and, given a validation corpus, its exact match.
pub fn cmd_train(g: &Globals, args: &TrainArgs, con: &mut Console<'_>) -> Result<u8, CliError> {
    let config = resolve(g.config.as_deref(), &g.overrides(&args.overrides))?;
    let (train_set, rejected) = load_tsv(&args.train, Split::Train, g.strict)?;
    for r in &rejected {
        say(con.err, format_args!("{}:{}: skipped: {}", args.train.display(), r.line, r.error))?;
    }
    let valid = match &args.valid {
        Some(p) => Some(load_tsv(p, Split::Valid, g.strict)?.0),
        None => None,
    };
    let vocabs = build_vocabs(&train_set.examples, config.min_count);
    let pretrained = match &args.embeddings {
        Some(p) => {
            let (table, report) = load_embeddings(p, Some(&vocabs.tokens), config.seed)?;
            say(
                con.err,
                format_args!("embeddings: {} loaded, {} missing, {} skipped", report.loaded, report.missing.len(), report.skipped),
            )?;
            Some(table)
        }
        None => None,
    };
    let mut model: Model<f32> = Model::new(config.clone(), vocabs, pretrained.as_ref()).map_err(CliError::failed)?;

    let mut inputs: Vec<&Path> = vec![&args.train];
    inputs.extend(args.valid.as_deref());
    inputs.extend(args.embeddings.as_deref());
    let info = run_info("train", &inputs, Some(&config), json!({"workers": args.workers.max(1), "strict": g.strict}));
    let mut log = vec![serde_json::to_string(&json!({"run_config": info})).expect("json")];
    let valid_examples = valid.as_ref().map(|c| c.examples.as_slice());
    let result = {
        let err = &mut *con.err;
        let mut on_epoch = |e: &EpochEnd, m: &Model<f32>| {
            let mut rec = json!({"epoch": e.epoch + 1, "mean_loss": e.mean_loss, "updates": e.updates});
            if let Some(v) = valid_examples {
                rec["valid_exact_match"] = json!(greedy_exact_match(m, v));
            }
            let line = serde_json::to_string(&rec).expect("json");
            let _ = writeln!(err, "{line}");
            log.push(line);
        };
        if args.workers > 1 {
            train_hogwild(&mut model, &train_set.examples, args.workers, &mut on_epoch)
        } else {
            train(&mut model, &train_set.examples, &mut on_epoch)
        }
    };
    result.map_err(CliError::failed)?;
    checkpoint::save(&model, info, &args.out)?;
    if let Some(p) = &args.log {
        write_text(p, &(log.join("\n") + "\n"))?;
    }
    say(con.err, format_args!("wrote {}", args.out.display()))?;
    Ok(EXIT_OK)
}

/// Tokens of an utterance line: the tokenized column of a corpus line, or
/// the whitespace-split line itself.
fn utterance_tokens(line: &str) -> Vec<String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let text = if cols.len() >= 2 { cols[1] } else { cols[0] };
    text.split_whitespace().map(str::to_string).collect()
}

/// Parses each input line, writing up to `k` `score<TAB>tree` lines per
/// input followed by a blank line.
pub fn cmd_parse(
    checkpoint_path: &Path,
    input: &Path,
    beam: Option<usize>,
    out: Option<&Path>,
    con: &mut Console<'_>,
) -> Result<u8, CliError> {
    let model = checkpoint::load(checkpoint_path)?;
    let k = beam.unwrap_or(model.config.beam_size);
    if k == 0 {
        return Err(CliError::Usage("beam size must be at least 1".into()));
    }
    let mut text = String::new();
    for (i, line) in read_lines(input)?.iter().enumerate() {
        let tokens = utterance_tokens(line);
        if tokens.is_empty() {
            say(con.err, format_args!("{}:{}: empty utterance", input.display(), i + 1))?;
        } else {
            let parses = if k == 1 {
                vec![parse_greedy(&model, &tokens).map_err(CliError::failed)?]
            } else {
                parse_beam(&model, &tokens, k).map_err(CliError::failed)?
            };
            for p in parses {
                text.push_str(&format!("{}\t{}\n", p.log_prob, p.tree));
            }
        }
        text.push('\n');
    }
    let info = run_info("parse", &[checkpoint_path, input], Some(&model.config), json!({"beam": k}));
    emit(con, out, &text, &info)?;
    Ok(EXIT_OK)
}

/// Predictions read from a file: top-1 strings (possibly unparseable) and
/// the parseable hypotheses of each input in rank order.
struct Predictions {
    top1: Vec<String>,
    beams: Vec<Vec<Tree>>,
}

/// Reads either one tree per line (bare or as the last column of a corpus
/// line) or the ranked `score<TAB>tree` blocks written by `parse`.
fn read_predictions(path: &Path) -> Result<Predictions, CliError> {
    let lines = read_lines(path)?;
    let scored = |l: &str| l.split_once('\t').is_some_and(|(score, _)| score.trim().parse::<f64>().is_ok());
    if !lines.iter().any(|l| scored(l)) {
        let top1: Vec<String> = lines.iter().map(|l| tree_column(l).to_string()).collect();
        let beams = top1.iter().map(|l| parse_bracketed(l).ok().into_iter().collect()).collect();
        return Ok(Predictions { top1, beams });
    }
    let mut top1 = Vec::new();
    let mut beams = Vec::new();
    let mut block: Vec<String> = Vec::new();
    let mut flush = |block: &mut Vec<String>| {
        top1.push(block.first().cloned().unwrap_or_default());
        beams.push(block.iter().filter_map(|t| parse_bracketed(t).ok()).collect());
        block.clear();
    };
    let mut open = false;
    for line in &lines {
        if line.trim().is_empty() {
            flush(&mut block);
            open = false;
        } else {
            block.push(tree_column(line).to_string());
            open = true;
        }
    }
    if open {
        flush(&mut block);
    }
    Ok(Predictions { top1, beams })
}

/// Scores predictions against gold trees and prints the metrics table and
/// JSON report.
pub fn cmd_eval(
    gold_path: &Path,
    pred_path: &Path,
    top_k: &[usize],
    system: &str,
    out: Option<&Path>,
    con: &mut Console<'_>,
) -> Result<u8, CliError> {
    let mut gold = Vec::new();
    for (i, line) in read_lines(gold_path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t = parse_bracketed(tree_column(line))
            .map_err(|e| CliError::Failed(format!("{}:{}: {e}", gold_path.display(), i + 1)))?;
        gold.push(t);
    }
    let pred = read_predictions(pred_path)?;
    let mut report = evaluate(&gold, &pred.top1).map_err(CliError::failed)?;
    if !top_k.is_empty() {
        report = report.with_top_k(&gold, &pred.beams, top_k).map_err(CliError::failed)?;
    }
    let info = run_info("eval", &[gold_path, pred_path], None, json!({"topk": top_k, "system": system}));
    let doc = json!({"metrics": report, "run_config": info});
    say(con.out, report.to_table(system))?;
    say(con.out, pretty(&doc))?;
    if let Some(p) = out {
        write_text(p, &pretty(&doc))?;
    }
    Ok(EXIT_OK)
}

/// Model used by `gradcheck` unless overridden: every width at most 8.
pub fn tiny_config() -> RnngConfig {
    RnngConfig {
        word_dim: 6,
        label_dim: 4,
        action_dim: 4,
        lstm_units: 5,
        lstm_layers: 2,
        dropout: 0.2,
        ..RnngConfig::default()
    }
}

/// Compares analytic and finite-difference gradients of one training step
/// on a three-token, two-label example. `corrupt` perturbs one analytic
/// gradient entry to exercise the failure path.
pub fn cmd_gradcheck(g: &Globals, overrides: &[(String, String)], corrupt: bool, con: &mut Console<'_>) -> Result<u8, CliError> {
    let config = resolve_from(&tiny_config(), g.config.as_deref(), &g.overrides(overrides))?;
    let tree: Tree = "[IN:GET_WEATHER weather in [SL:LOCATION boston ] ]".parse().expect("static tree");
    let example = Example { raw_utterance: tree.tokens().join(" "), tokens: tree.tokens().to_vec(), tree };
    let model: Model<f64> =
        Model::new(config.clone(), build_vocabs(std::slice::from_ref(&example), 1), None).map_err(CliError::failed)?;
    let prepared = prepare(&model, &example).map_err(CliError::failed)?;
    let scorer = model.net.scorer.w.0;
    let report = grad_check(
        &model.store,
        |s| {
            let (loss, mut grads) = loss_and_gradients(&model, s, &prepared, Some(config.seed)).expect("loss of a valid example");
            if corrupt {
                if let Some(Some(gw)) = grads.per_param.get_mut(scorer) {
                    gw[0] += 0.5;
                }
            }
            (loss, grads)
        },
        1e-4,
    );
    let status = if report.passed { "PASS" } else { "FAIL" };
    say(con.out, format_args!("gradient check {status}: max relative error {:.3e} (tolerance {:.0e})", report.max_rel_error(), report.tolerance))?;
    if let Some(w) = report.worst() {
        say(
            con.out,
            format_args!(
                "worst parameter {} [{}]: analytic {:.6e}, numeric {:.6e}, relative error {:.3e}",
                w.name, w.worst_index, w.analytic, w.numeric, w.max_rel_error
            ),
        )?;
    }
    let info = run_info("gradcheck", &[], Some(&config), json!({"corrupt": corrupt}));
    say(con.out, pretty(&json!({"report": report, "run_config": info})))?;
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

/// Writes the generated corpus in TSV form.
pub fn cmd_synth(g: &Globals, count: usize, out: Option<&Path>, con: &mut Console<'_>) -> Result<u8, CliError> {
    let seed = g.seed.unwrap_or(RnngConfig::default().seed);
    let text = to_tsv(&synthetic_corpus(count, seed));
    let info = run_info("synth", &[], None, json!({"count": count, "seed": seed}));
    emit(con, out, &text, &info)?;
    Ok(EXIT_OK)
}
