#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topparse_core::transitions::{apply, valid_actions, Action, ParserState, Validity};
use topparse_core::treebank::{Label, Node, NonTerminal, Tree};

pub const INTENTS: [&str; 3] = ["IN:A", "IN:B", "IN:C"];
pub const SLOTS: [&str; 3] = ["SL:X", "SL:Y", "SL:Z"];
pub const WORDS: [&str; 6] = ["w0", "w1", "w2", "w3", "w4", "w5"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn label(s: &str) -> Label {
    s.parse().unwrap()
}

fn word(rng: &mut ChaCha8Rng) -> Node {
    Node::Token(WORDS[rng.random_range(0..WORDS.len())].to_string())
}

fn intent(rng: &mut ChaCha8Rng, depth_left: usize) -> NonTerminal {
    let n = rng.random_range(1..=4);
    let mut children = Vec::new();
    for _ in 0..n {
        if depth_left >= 2 && rng.random_bool(0.35) {
            children.push(Node::NonTerminal(slot(rng, depth_left - 1)));
        } else {
            children.push(word(rng));
        }
    }
    NonTerminal::new(label(INTENTS[rng.random_range(0..INTENTS.len())]), children)
}

fn slot(rng: &mut ChaCha8Rng, depth_left: usize) -> NonTerminal {
    let children = if depth_left >= 2 && rng.random_bool(0.4) {
        vec![Node::NonTerminal(intent(rng, depth_left - 1))]
    } else {
        (0..rng.random_range(1..=3)).map(|_| word(rng)).collect()
    };
    NonTerminal::new(label(SLOTS[rng.random_range(0..SLOTS.len())]), children)
}

/// A random well-formed tree with depth at most `max_depth` and at most
/// `max_tokens` tokens (rejection sampling).
pub fn random_valid_tree(rng: &mut ChaCha8Rng, max_depth: usize, max_tokens: usize) -> Tree {
    loop {
        let t = Tree::new(intent(rng, max_depth));
        if t.tokens().len() <= max_tokens {
            return t;
        }
    }
}

/// A random tree that ignores the intent/slot constraints.
pub fn random_any_tree(rng: &mut ChaCha8Rng, depth_left: usize) -> NonTerminal {
    let all: Vec<&str> = INTENTS.iter().chain(SLOTS.iter()).copied().collect();
    let n = rng.random_range(1..=3);
    let children = (0..n)
        .map(|_| {
            if depth_left > 1 && rng.random_bool(0.4) {
                Node::NonTerminal(random_any_tree(rng, depth_left - 1))
            } else {
                word(rng)
            }
        })
        .collect();
    NonTerminal::new(label(all[rng.random_range(0..all.len())]), children)
}

/// Independent statement of the well-formedness rules: the root is an
/// intent; intents hold tokens and slots; a slot holds either only tokens
/// or exactly one intent; nothing is empty.
pub fn is_well_formed(root: &NonTerminal) -> bool {
    fn ok(nt: &NonTerminal) -> bool {
        if nt.children.is_empty() {
            return false;
        }
        let kids: Vec<&NonTerminal> = nt
            .children
            .iter()
            .filter_map(|c| match c {
                Node::NonTerminal(n) => Some(n),
                Node::Token(_) => None,
            })
            .collect();
        let shape_ok = if nt.label.to_string().starts_with("IN:") {
            kids.iter().all(|k| k.label.to_string().starts_with("SL:"))
        } else if kids.is_empty() {
            true
        } else {
            nt.children.len() == 1 && kids[0].label.to_string().starts_with("IN:")
        };
        shape_ok && kids.iter().all(|k| ok(k))
    }
    root.label.to_string().starts_with("IN:") && ok(root)
}

/// Own bracketed writer, independent of the library's.
pub fn write_tree(nt: &NonTerminal) -> String {
    let mut s = format!("[{}", nt.label);
    for c in &nt.children {
        s.push(' ');
        match c {
            Node::Token(t) => s.push_str(t),
            Node::NonTerminal(n) => s.push_str(&write_tree(n)),
        }
    }
    s.push_str(" ]");
    s
}

pub fn example(tree: Tree) -> topparse_core::dataset::Example {
    let tokens = tree.tokens().to_vec();
    topparse_core::dataset::Example { raw_utterance: tokens.join(" "), tokens, tree }
}

/// A corpus that mentions every label and word above.
pub fn label_cover() -> Vec<topparse_core::dataset::Example> {
    let mut text = Vec::new();
    for (i, s) in SLOTS.iter().enumerate() {
        text.push(format!("[{} {} [{} {} ] ]", INTENTS[i], WORDS[i], s, WORDS[i + 3]));
    }
    text.iter().map(|t| example(t.parse().unwrap())).collect()
}

pub fn tiny_config() -> topparse_core::RnngConfig {
    topparse_core::RnngConfig {
        word_dim: 4,
        label_dim: 3,
        action_dim: 3,
        lstm_units: 5,
        lstm_layers: 2,
        dropout: 0.0,
        lr: 0.01,
        weight_decay: 0.0,
        ..topparse_core::RnngConfig::default()
    }
}

/// Every derivation the action mask allows, as serialized trees.
pub fn mask_trees(tokens: &[String], max_open: usize) -> BTreeSet<String> {
    let inventory = [Action::Shift, Action::Reduce, Action::Nt(label("IN:A")), Action::Nt(label("SL:B"))];
    let mut out = BTreeSet::new();
    let mut stack = vec![ParserState::new(tokens, max_open).unwrap()];
    while let Some(s) = stack.pop() {
        match valid_actions(&s) {
            Validity::Terminal => {
                out.insert(s.tree().unwrap().to_string());
            }
            Validity::Valid(v) => {
                let next: Vec<_> = inventory.iter().filter(|a| v.allows(a)).collect();
                assert!(!next.is_empty(), "dead end after {:?}", s.history());
                for a in next {
                    stack.push(apply(&s, a).unwrap());
                }
            }
        }
    }
    out
}

/// Every labeled bracketing of `tokens` with non-terminal depth at most
/// `depth`, ignoring the well-formedness rules.
pub fn all_trees(tokens: &[&str], depth: usize) -> Vec<NonTerminal> {
    if depth == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for children in child_sequences(tokens, depth - 1) {
        for l in ["IN:A", "SL:B"] {
            out.push(NonTerminal::new(label(l), children.clone()));
        }
    }
    out
}

/// Ways to cover `tokens` left to right with tokens and subtrees.
fn child_sequences(tokens: &[&str], depth: usize) -> Vec<Vec<Node>> {
    if tokens.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in child_sequences(&tokens[1..], depth) {
        let mut v = vec![Node::Token(tokens[0].to_string())];
        v.extend(rest);
        out.push(v);
    }
    for end in 1..=tokens.len() {
        for sub in all_trees(&tokens[..end], depth) {
            for rest in child_sequences(&tokens[end..], depth) {
                let mut v = vec![Node::NonTerminal(sub.clone())];
                v.extend(rest);
                out.push(v);
            }
        }
    }
    out
}

/// (label, start, end, subtree text) of every non-terminal.
fn items(nt: &NonTerminal, start: usize, out: &mut Vec<(String, usize, usize, String)>) -> usize {
    let mut pos = start;
    let mut mine = Vec::new();
    for c in &nt.children {
        match c {
            Node::Token(_) => pos += 1,
            Node::NonTerminal(n) => pos = items(n, pos, &mut mine),
        }
    }
    out.push((nt.label.to_string(), start, pos, write_tree(nt)));
    out.extend(mine);
    pos
}

/// Size of the multiset intersection, by greedy pairing.
pub fn matches<T: PartialEq>(gold: &[T], pred: &[T]) -> usize {
    let mut used = vec![false; gold.len()];
    let mut n = 0;
    for p in pred {
        if let Some(i) = (0..gold.len()).find(|&i| !used[i] && gold[i] == *p) {
            used[i] = true;
            n += 1;
        }
    }
    n
}

pub fn prf(m: usize, p: usize, g: usize) -> (f64, f64, f64) {
    let pr = if p == 0 { 0.0 } else { 100.0 * m as f64 / p as f64 };
    let rc = if g == 0 { 0.0 } else { 100.0 * m as f64 / g as f64 };
    let f = if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) };
    (pr, rc, f)
}

/// A prediction related to `gold`: identical, relabeled, with a slot
/// dropped, or an unrelated tree.
pub fn perturb(r: &mut ChaCha8Rng, gold: &Tree) -> Tree {
    fn relabel(nt: &mut NonTerminal, r: &mut ChaCha8Rng) {
        if r.random_bool(0.3) {
            let name = nt.label.to_string();
            let pool = if name.starts_with("IN:") { INTENTS } else { SLOTS };
            nt.label = pool[r.random_range(0..pool.len())].parse().unwrap();
        }
        for c in &mut nt.children {
            if let Node::NonTerminal(n) = c {
                relabel(n, r);
            }
        }
    }
    fn drop_slot(nt: &mut NonTerminal, r: &mut ChaCha8Rng) {
        let mut out = Vec::new();
        for c in std::mem::take(&mut nt.children) {
            match c {
                Node::NonTerminal(mut n) if n.label.to_string().starts_with("SL:") && r.random_bool(0.4) => {
                    if n.children.iter().all(|k| matches!(k, Node::Token(_))) {
                        out.extend(n.children);
                    } else {
                        drop_slot(&mut n, r);
                        out.push(Node::NonTerminal(n));
                    }
                }
                Node::NonTerminal(mut n) => {
                    drop_slot(&mut n, r);
                    out.push(Node::NonTerminal(n));
                }
                t => out.push(t),
            }
        }
        nt.children = out;
    }
    let mut root = gold.root().clone();
    match r.random_range(0..4) {
        0 => {}
        1 => relabel(&mut root, r),
        2 => drop_slot(&mut root, r),
        _ => return random_valid_tree(r, 5, 10),
    }
    Tree::new(root)
}

/// Matched, predicted and gold counts for brackets and for whole subtrees,
/// summed over the corpus. Missing predictions contribute nothing.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct BruteCounts {
    pub bracket: (usize, usize, usize),
    pub subtree: (usize, usize, usize),
}

pub fn brute_counts(gold: &[Tree], pred: &[Option<Tree>]) -> BruteCounts {
    let mut c = BruteCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        let mut gi = Vec::new();
        items(g.root(), 0, &mut gi);
        let mut pi = Vec::new();
        if let Some(p) = p {
            items(p.root(), 0, &mut pi);
        }
        let gs: Vec<_> = gi.iter().map(|(l, s, e, _)| (l.clone(), *s, *e)).collect();
        let ps: Vec<_> = pi.iter().map(|(l, s, e, _)| (l.clone(), *s, *e)).collect();
        c.bracket.0 += matches(&gs, &ps);
        c.bracket.1 += ps.len();
        c.bracket.2 += gs.len();
        c.subtree.0 += matches(&gi, &pi);
        c.subtree.1 += pi.len();
        c.subtree.2 += gi.len();
    }
    c
}
