mod common;

use common::{criteria, label_cover, random_valid_tree, rng, tiny_config};
use topparse_core::dataset::build_vocabs;
use topparse_core::rnng::{loss_and_gradients, parse_greedy, prepare, train, Model};
use topparse_core::RnngConfig;

#[test]
fn beam_search_is_coherent_on_random_inputs() {
    criteria::beam_coherence(1000);
}

#[test]
fn memorizes_a_single_example() {
    let mut r = rng(42);
    let tree = random_valid_tree(&mut r, 4, 6);
    let ex = common::example(tree);
    let config = RnngConfig { epochs: 200, lstm_units: 16, word_dim: 8, ..tiny_config() };
    let mut model: Model<f32> = Model::new(config, build_vocabs(&label_cover(), 1), None).unwrap();
    let report = train(&mut model, std::slice::from_ref(&ex), |_, _| {}).unwrap();
    assert_eq!(report.updates, 200);
    let (loss, _) = loss_and_gradients(&model, &model.store, &prepare(&model, &ex).unwrap(), None).unwrap();
    assert!(loss < 0.01, "final loss {loss}");
    assert_eq!(parse_greedy(&model, &ex.tokens).unwrap().tree, ex.tree);
}
