//! Small generated corpus with the shape of the real data: five intents,
//! eight slots, a sixty-word vocabulary and trees at most four levels deep
//! (an intent nested in a slot of another intent).

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topparse_core::dataset::Example;
use topparse_core::treebank::{Label, Node, NonTerminal, Tree};

struct SlotSpec {
    name: &'static str,
    fillers: [&'static str; 4],
}

const SLOTS: [SlotSpec; 8] = [
    SlotSpec { name: "DESTINATION", fillers: ["downtown", "airport", "stadium", "mall"] },
    SlotSpec { name: "SOURCE", fillers: ["home", "office", "school", "hotel"] },
    SlotSpec { name: "NAME_EVENT", fillers: ["eagles", "coldplay", "hamilton", "lakers"] },
    SlotSpec { name: "CAT_EVENT", fillers: ["game", "concert", "festival", "parade"] },
    SlotSpec { name: "LOCATION", fillers: ["boston", "chicago", "denver", "seattle"] },
    SlotSpec { name: "DATE_TIME", fillers: ["tonight", "tomorrow", "weekend", "monday"] },
    SlotSpec { name: "METHOD_TRAVEL", fillers: ["driving", "walking", "biking", "transit"] },
    SlotSpec { name: "WEATHER_ATTRIBUTE", fillers: ["rain", "snow", "sunny", "windy"] },
];

struct IntentSpec {
    name: &'static str,
    triggers: [&'static str; 3],
    /// Slot index and the word (if any) introducing it.
    slots: &'static [(usize, Option<&'static str>)],
}

const DESTINATION: usize = 0;
const SOURCE: usize = 1;
const NAME_EVENT: usize = 2;
const CAT_EVENT: usize = 3;
const LOCATION: usize = 4;
const DATE_TIME: usize = 5;
const METHOD_TRAVEL: usize = 6;
const WEATHER_ATTRIBUTE: usize = 7;

const INTENTS: [IntentSpec; 5] = [
    IntentSpec {
        name: "GET_DIRECTIONS",
        triggers: ["directions", "route", "navigate"],
        slots: &[(DESTINATION, Some("to")), (SOURCE, Some("from")), (METHOD_TRAVEL, Some("by")), (DATE_TIME, Some("at"))],
    },
    IntentSpec {
        name: "GET_EVENT",
        triggers: ["events", "shows", "happenings"],
        slots: &[(NAME_EVENT, None), (CAT_EVENT, None), (LOCATION, Some("in")), (DATE_TIME, None)],
    },
    IntentSpec {
        name: "GET_WEATHER",
        triggers: ["weather", "forecast", "temperature"],
        slots: &[(WEATHER_ATTRIBUTE, None), (LOCATION, Some("for")), (DATE_TIME, None)],
    },
    IntentSpec {
        name: "GET_DISTANCE",
        triggers: ["distance", "far", "miles"],
        slots: &[(DESTINATION, Some("to")), (SOURCE, Some("from")), (METHOD_TRAVEL, Some("by"))],
    },
    IntentSpec {
        name: "GET_INFO_TRAFFIC",
        triggers: ["traffic", "congestion", "delays"],
        slots: &[(LOCATION, Some("in")), (DESTINATION, Some("to")), (DATE_TIME, Some("at"))],
    },
];

const LEADS: [&[&str]; 5] = [&[], &["please"], &["show", "me"], &["what", "is"], &["any"]];

fn nt(label: &str, children: Vec<Node>) -> NonTerminal {
    NonTerminal::new(label.parse::<Label>().expect("static label"), children)
}

fn tok(s: &str) -> Node {
    Node::Token(s.to_string())
}

/// An event described inside a location-like slot ("the eagles game").
fn nested_event(rng: &mut ChaCha8Rng) -> NonTerminal {
    let mut children = Vec::new();
    if rng.random_bool(0.5) {
        children.push(tok("the"));
    }
    let which = rng.random_range(0..3);
    for slot in [NAME_EVENT, CAT_EVENT] {
        let include = match which {
            0 => slot == NAME_EVENT,
            1 => slot == CAT_EVENT,
            _ => true,
        };
        if include {
            let spec = &SLOTS[slot];
            let word = spec.fillers.choose(rng).expect("non-empty");
            children.push(Node::NonTerminal(nt(&format!("SL:{}", spec.name), vec![tok(word)])));
        }
    }
    nt("IN:GET_EVENT", children)
}

fn utterance(rng: &mut ChaCha8Rng) -> Tree {
    let intent = INTENTS.choose(rng).expect("non-empty");
    let mut children: Vec<Node> = LEADS.choose(rng).expect("non-empty").iter().map(|w| tok(w)).collect();
    children.push(tok(intent.triggers.choose(rng).expect("non-empty")));
    let mut chosen: Vec<bool> = intent.slots.iter().map(|_| rng.random_bool(0.5)).collect();
    if !chosen.contains(&true) {
        let i = rng.random_range(0..chosen.len());
        chosen[i] = true;
    }
    for (&(slot, intro), keep) in intent.slots.iter().zip(chosen) {
        if !keep {
            continue;
        }
        if let Some(w) = intro {
            children.push(tok(w));
        }
        let spec = &SLOTS[slot];
        let nestable = slot == DESTINATION || slot == LOCATION;
        let inner = if nestable && rng.random_bool(0.35) {
            Node::NonTerminal(nested_event(rng))
        } else {
            tok(spec.fillers.choose(rng).expect("non-empty"))
        };
        children.push(Node::NonTerminal(nt(&format!("SL:{}", spec.name), vec![inner])));
    }
    Tree::new(nt(&format!("IN:{}", intent.name), children))
}

/// `n` generated examples, fully determined by `seed`.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tree = utterance(&mut rng);
            let tokens = tree.tokens().to_vec();
            Example { raw_utterance: tokens.join(" "), tokens, tree }
        })
        .collect()
}

/// Corpus lines in the `raw \t tokenized \t tree` layout.
pub fn to_tsv(examples: &[Example]) -> String {
    examples
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.raw_utterance, e.tokens.join(" "), e.tree))
        .collect()
}
