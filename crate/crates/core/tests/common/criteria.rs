//! Whole-property checks shared by the integration tests and the acceptance
//! run. Each one panics with a description on failure.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use topparse_core::dataset::build_vocabs;
use topparse_core::metrics::{bracket_prf, evaluate, top_k_accuracy, tree_labeled_prf};
use topparse_core::neural::{grad_check, BiLstm, Embedding, Graph, Linear, Lstm, ParamStore, Var};
use topparse_core::rnng::{loss_and_gradients, parse_beam, parse_greedy, prepare, score_actions, Model};
use topparse_core::transitions::{execute, oracle};
use topparse_core::treebank::{validate, Tree};
use topparse_core::RnngConfig;

use super::*;

pub const EVENT_TREE: &str = "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the [SL:NAME_EVENT Eagles ] [SL:CAT_EVENT game ] ] ] ]";

pub fn oracle_roundtrip() {
    let mut r = rng(21);
    let trees: Vec<_> = (0..10_000).map(|_| random_valid_tree(&mut r, 8, 20)).collect();
    let start = Instant::now();
    let mut failures = 0;
    for t in &trees {
        let actions = oracle(t).unwrap();
        assert_eq!(actions.len(), 2 * t.non_terminal_count() + t.tokens().len());
        if execute(&actions, t.tokens()).ok().as_ref() != Some(t) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    assert_eq!(failures, 0, "{failures} roundtrip failures");
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
}

/// Mask derivations over two tokens equal the brute-force well-formed trees
/// for several nesting limits.
pub fn mask_completeness() {
    let tokens = ["a", "b"];
    let owned: Vec<String> = tokens.iter().map(|s| s.to_string()).collect();
    for max_open in [1, 3, 5] {
        let brute: BTreeSet<String> =
            all_trees(&tokens, max_open).iter().filter(|t| is_well_formed(t)).map(write_tree).collect();
        let derived = mask_trees(&owned, max_open);
        assert!(!brute.is_empty());
        assert_eq!(derived, brute, "max_open {max_open}");
    }
}

pub fn metric_equivalence() {
    let mut r = rng(31);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut raw = Vec::new();
    for _ in 0..100 {
        let g = random_valid_tree(&mut r, 6, 14);
        let p = perturb(&mut r, &g);
        if r.random_bool(0.1) {
            let s = p.to_string();
            raw.push(s[..s.len() - 1].to_string());
            pred.push(None);
        } else {
            raw.push(p.to_string());
            pred.push(Some(p));
        }
        gold.push(g);
    }

    let brute = brute_counts(&gold, &pred);
    let (bm, bp, bg) = brute.bracket;
    let (tm, tp, tg) = brute.subtree;
    assert!(tm <= bm);
    let bracket = bracket_prf(&gold, &pred).unwrap();
    let tl = tree_labeled_prf(&gold, &pred).unwrap();
    assert_eq!((bracket.matched, bracket.predicted, bracket.gold), (bm, bp, bg));
    assert_eq!((tl.matched, tl.predicted, tl.gold), (tm, tp, tg));
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let (p, rc, f) = prf(bm, bp, bg);
    assert!(close(bracket.precision, p) && close(bracket.recall, rc) && close(bracket.f1, f));
    let (p, rc, f) = prf(tm, tp, tg);
    assert!(close(tl.precision, p) && close(tl.recall, rc) && close(tl.f1, f));

    let report = evaluate(&gold, &raw).unwrap();
    assert_eq!(report.bracket_counts, bracket);
    assert_eq!(report.n_invalid_predictions, pred.iter().filter(|p| p.is_none()).count());
}

pub fn identity_scoring() {
    let mut r = rng(32);
    let gold: Vec<Tree> = (0..50).map(|_| random_valid_tree(&mut r, 8, 20)).collect();
    let raw: Vec<String> = gold.iter().map(|t| t.to_string()).collect();
    let m = evaluate(&gold, &raw).unwrap();
    for v in [m.exact_match, m.bracket_f1, m.tl_f1, m.tree_validity] {
        assert_eq!(v, 100.0);
    }
}

/// The event tree with its category slot relabeled as a name slot.
pub fn relabeled_example() {
    let gold: Tree = EVENT_TREE.parse().unwrap();
    let pred: Tree = EVENT_TREE.replace("CAT_EVENT", "NAME_EVENT").parse().unwrap();
    let b = bracket_prf(&[gold.clone()], &[Some(pred.clone())]).unwrap();
    assert_eq!((b.precision, b.recall), (80.0, 80.0));
    let tl = tree_labeled_prf(&[gold], &[Some(pred)]).unwrap();
    assert_eq!((tl.precision, tl.recall), (20.0, 20.0));
}

pub const GRAD_SEEDS: u64 = 20;
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub enum Component {
    Linear,
    Embedding,
    Lstm,
    BiLstm,
    MaskedNll,
    Parser,
}

pub const COMPONENTS: [Component; 6] =
    [Component::Linear, Component::Embedding, Component::Lstm, Component::BiLstm, Component::MaskedNll, Component::Parser];

fn inputs(g: &mut Graph<'_, f64>, r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Var> {
    (0..n).map(|_| g.input((0..dim).map(|_| r.random_range(-1.0..1.0)).collect())).collect()
}

/// Gradient check for each seed on a store built by `build`, with the loss
/// a masked NLL over the output of `forward` under dropout.
fn check_layer<L, B, F>(what: &str, build: B, forward: F)
where
    B: Fn(&mut ParamStore<f64>, &mut ChaCha8Rng) -> L,
    F: Fn(&L, &mut Graph<'_, f64>, &mut ChaCha8Rng) -> Var,
{
    for seed in 0..GRAD_SEEDS {
        let mut store = ParamStore::new();
        let layer = build(&mut store, &mut rng(seed));
        let report = grad_check(
            &store,
            |s| {
                let mut r = rng(1000 + seed);
                let mut g = Graph::training(s, 0.25, seed);
                let out = forward(&layer, &mut g, &mut r);
                let n = g.dim(out);
                let gold = r.random_range(0..n);
                let mask: Vec<bool> = (0..n).map(|i| i == gold || r.random_bool(0.7)).collect();
                let loss = g.masked_nll(out, gold, &mask).unwrap();
                (g.scalar(loss), g.backward(loss))
            },
            GRAD_TOLERANCE,
        );
        assert!(report.passed, "{what} seed {seed}: {:?}", report.worst());
    }
}

fn check_parser() {
    let vocabs = build_vocabs(&label_cover(), 1);
    for seed in 0..GRAD_SEEDS {
        let config = RnngConfig { dropout: 0.2, seed, lstm_layers: 1, ..tiny_config() };
        let model: Model<f64> = Model::new(config, vocabs.clone(), None).unwrap();
        let tree = random_valid_tree(&mut rng(seed), 4, 4);
        let ex = prepare(&model, &example(tree)).unwrap();
        let report =
            grad_check(&model.store, |s| loss_and_gradients(&model, s, &ex, Some(seed)).unwrap(), GRAD_TOLERANCE);
        assert!(report.passed, "parser seed {seed}: {:?}", report.worst());
    }
}

pub fn gradient_check(c: Component) {
    match c {
        Component::Linear => check_layer(
            "linear",
            |s, r| Linear::new(s, "lin", 7, 5, r),
            |l, g, r| {
                let x = inputs(g, r, 2, 7);
                let a = l.apply(g, &x[..1]).unwrap();
                let y = g.dropout(x[1]);
                let b = l.apply(g, &[y]).unwrap();
                let t = g.tanh(a);
                g.mul(t, b).unwrap()
            },
        ),
        Component::Embedding => check_layer(
            "embedding",
            |s, r| (Embedding::new(s, "emb", 6, 4, r), Linear::new(s, "out", 8, 4, r)),
            |(e, l), g, r| {
                let a = e.lookup(g, r.random_range(0..6)).unwrap();
                let b = e.lookup(g, r.random_range(0..6)).unwrap();
                let c = g.relu(b);
                l.apply(g, &[a, c]).unwrap()
            },
        ),
        Component::Lstm => check_layer(
            "lstm",
            |s, r| Lstm::new(s, "lstm", 3, 4, 2, r),
            |l, g, r| {
                let x = inputs(g, r, 4, 3);
                let hs = l.sequence(g, &x).unwrap();
                let all = g.concat(&hs);
                g.sigmoid(all)
            },
        ),
        Component::BiLstm => check_layer(
            "bilstm",
            |s, r| BiLstm::new(s, "bi", 3, 4, 5, r),
            |l, g, r| {
                let x = inputs(g, r, 3, 3);
                l.encode(g, &x).unwrap()
            },
        ),
        Component::MaskedNll => check_layer("masked nll", |s, r| s.add_uniform_vector("logits", 9, r), |&id, g, _| g.param(id)),
        Component::Parser => check_parser(),
    }
}

/// Greedy, beam and rescoring agree on `n` random inputs to untrained
/// models, and top-k accuracy from the beams grows with k.
pub fn beam_coherence(n: u64) {
    let vocabs = build_vocabs(&label_cover(), 1);
    let mut r = rng(41);
    let mut gold = Vec::new();
    let mut beams = Vec::new();
    for i in 0..n {
        let model: Model<f32> = Model::new(RnngConfig { seed: i % 10, ..tiny_config() }, vocabs.clone(), None).unwrap();
        let len = r.random_range(1..=6);
        let tokens: Vec<String> = (0..len).map(|_| WORDS[r.random_range(0..WORDS.len())].to_string()).collect();
        let greedy = parse_greedy(&model, &tokens).unwrap();
        let one = parse_beam(&model, &tokens, 1).unwrap();
        assert_eq!(one, vec![greedy.clone()], "input {i}");
        let five = parse_beam(&model, &tokens, 5).unwrap();
        assert!(!five.is_empty() && five.len() <= 5);
        for w in five.windows(2) {
            assert!(w[0].log_prob >= w[1].log_prob);
        }
        for p in &five {
            assert!(validate(&p.tree).is_empty(), "{}", p.tree);
            assert_eq!(p.tree.tokens(), &tokens[..]);
            let rescored = score_actions(&model, &tokens, &p.actions).unwrap();
            assert!((rescored - p.log_prob).abs() < 1e-6, "input {i}: {rescored} vs {}", p.log_prob);
        }
        gold.push(if r.random_bool(0.5) { five[five.len() - 1].tree.clone() } else { greedy.tree });
        beams.push(five.into_iter().map(|p| p.tree).collect::<Vec<Tree>>());
    }
    let acc: Vec<f64> = [1, 3, 5].iter().map(|&k| top_k_accuracy(&gold, &beams, k).unwrap()).collect();
    assert!(acc[0] <= acc[1] && acc[1] <= acc[2], "{acc:?}");
    assert!(acc[2] >= 50.0, "{acc:?}");
}
