use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Model, RnngError, Session};
use crate::dataset::Example;
use crate::neural::{adam_step, AdamConfig, Gradients, Graph, ParamStore, Scalar};
use crate::transitions::{oracle, Action};

/// An example reduced to what training needs: tokens and gold actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prepared {
    pub tokens: Vec<String>,
    pub actions: Vec<Action>,
}

pub fn prepare<T: Scalar>(model: &Model<T>, example: &Example) -> Result<Prepared, RnngError> {
    let actions = oracle(&example.tree)?;
    for a in &actions {
        if let Action::Nt(l) = a {
            if model.label_index(l).is_none() {
                return Err(RnngError::UnknownLabel(l.to_string()));
            }
        }
    }
    Ok(Prepared { tokens: example.tree.tokens().to_vec(), actions })
}

/// Summed negative log-likelihood of the gold actions under teacher forcing,
/// and its gradient. Parameters come from `store`, which must have the
/// model's layout. With `dropout_seed` the graph runs in training mode.
pub fn loss_and_gradients<T: Scalar>(
    model: &Model<T>,
    store: &ParamStore<T>,
    example: &Prepared,
    dropout_seed: Option<u64>,
) -> Result<(T, Gradients<T>), RnngError> {
    let graph = match dropout_seed {
        Some(seed) => Graph::training(store, model.config.dropout, seed),
        None => Graph::new(store),
    };
    let mut session = Session::with_graph(model, graph, &example.tokens)?;
    let mut hyp = session.initial()?;
    let mut losses = Vec::with_capacity(example.actions.len());
    for action in &example.actions {
        let mask = session.mask(&hyp).ok_or(crate::transitions::TransitionError::IncompleteDerivation)?;
        let gold = model.action_index(action).ok_or_else(|| RnngError::UnknownLabel(action.to_string()))?;
        let logits = session.logits(&hyp)?;
        losses.push(session.graph.masked_nll(logits, gold, &mask)?);
        hyp = session.advance(&hyp, action)?;
    }
    let loss = session.graph.sum(&losses)?;
    Ok((session.graph.scalar(loss), session.graph.backward(loss)))
}

/// Mixes seed components into one well-spread seed (splitmix64 rounds).
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochEnd {
    pub epoch: usize,
    pub mean_loss: f64,
    pub updates: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-example loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub updates: u64,
}

/// Per-example AdamW training for `config.epochs` passes over a shuffled
/// copy of `examples`. Fully determined by the model's configuration seed.
pub fn train<T, F>(model: &mut Model<T>, examples: &[Example], mut on_epoch: F) -> Result<TrainReport, RnngError>
where
    T: Scalar,
    F: FnMut(&EpochEnd, &Model<T>),
{
    let prepared = examples.iter().map(|e| prepare(model, e)).collect::<Result<Vec<_>, _>>()?;
    let adam = AdamConfig::new(model.config.lr, model.config.weight_decay);
    let seed = model.config.seed;
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x5348_5546]));
    let mut report = TrainReport::default();
    for epoch in 0..model.config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let dropout_seed = mix_seed(&[seed, epoch as u64, i as u64]);
            let (loss, grads) = loss_and_gradients(model, &model.store, &prepared[i], Some(dropout_seed))?;
            model.store.accumulate(&grads);
            adam_step(&mut model.store, &adam);
            total += loss.as_f64();
            report.updates += 1;
        }
        let mean_loss = if prepared.is_empty() { 0.0 } else { total / prepared.len() as f64 };
        report.epoch_losses.push(mean_loss);
        on_epoch(&EpochEnd { epoch, mean_loss, updates: report.updates }, model);
    }
    Ok(report)
}
