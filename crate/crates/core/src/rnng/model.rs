use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RnngConfig, RnngError};
use crate::dataset::Vocabs;
use crate::neural::{BiLstm, Embedding, Linear, Lstm, NeuralError, ParamId, ParamStore, Scalar, Tensor};
use crate::preprocess::{EmbeddingTable, TokenNormalizer, UNK_SYMBOL};
use crate::transitions::Action;
use crate::treebank::Label;

/// Parameter handles of every layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub word_emb: Embedding,
    pub label_emb: Embedding,
    pub action_emb: Embedding,
    pub token_proj: Linear,
    pub nt_proj: Linear,
    pub stack: Option<Lstm>,
    pub stack_guard: Option<ParamId>,
    pub composer: Option<BiLstm>,
    pub buffer: Option<Lstm>,
    pub buffer_guard: Option<ParamId>,
    pub actions: Option<Lstm>,
    pub action_guard: Option<ParamId>,
    pub summary: Linear,
    pub scorer: Linear,
}

/// Configuration, vocabularies and parameters of a parser.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub config: RnngConfig,
    pub store: ParamStore<T>,
    pub net: Network,
    vocabs: Vocabs,
    normalizer: TokenNormalizer,
    token_index: BTreeMap<String, usize>,
    label_index: BTreeMap<Label, usize>,
    actions: Vec<Action>,
    action_index: BTreeMap<Action, usize>,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with parameters initialized from `config.seed`. Word rows
    /// found in `pretrained` are copied from it (and frozen when
    /// `config.freeze_pretrained`).
    pub fn new(config: RnngConfig, vocabs: Vocabs, pretrained: Option<&EmbeddingTable>) -> Result<Model<T>, RnngError> {
        config.validate()?;
        if let Some(table) = pretrained {
            if table.dim() != config.word_dim {
                return Err(NeuralError::DimensionMismatch {
                    what: "pretrained embeddings",
                    expected: config.word_dim,
                    got: table.dim(),
                }
                .into());
            }
        }
        let mut vocabs = vocabs;
        if !vocabs.tokens.iter().any(|t| t == UNK_SYMBOL) {
            vocabs.tokens.push(UNK_SYMBOL.to_string());
        }
        let labels: Vec<Label> = vocabs.intents.iter().chain(&vocabs.slots).cloned().collect();
        let mut actions = Vec::from([Action::Shift, Action::Reduce]);
        actions.extend(labels.iter().cloned().map(Action::Nt));

        let c = &config;
        let h = c.lstm_units;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let mut store = ParamStore::new();
        let word_emb = Embedding::new(&mut store, "word_emb", vocabs.tokens.len(), c.word_dim, &mut rng);
        let label_emb = Embedding::new(&mut store, "label_emb", labels.len().max(1), c.label_dim, &mut rng);
        let action_emb = Embedding::new(&mut store, "action_emb", actions.len(), c.action_dim, &mut rng);
        let token_proj = Linear::new(&mut store, "token_proj", c.word_dim, h, &mut rng);
        let nt_proj = Linear::new(&mut store, "nt_proj", c.label_dim, h, &mut rng);
        let (stack, stack_guard, composer) = if c.use_stack {
            (
                Some(Lstm::new(&mut store, "stack", h, h, c.lstm_layers, &mut rng)),
                Some(store.add_uniform_vector("stack_guard", h, &mut rng)),
                Some(BiLstm::new(&mut store, "compose", h, h, h, &mut rng)),
            )
        } else {
            (None, None, None)
        };
        let (buffer, buffer_guard) = if c.use_buffer {
            (
                Some(Lstm::new(&mut store, "buffer", h, h, c.lstm_layers, &mut rng)),
                Some(store.add_uniform_vector("buffer_guard", h, &mut rng)),
            )
        } else {
            (None, None)
        };
        let (action_lstm, action_guard) = if c.use_actions {
            (
                Some(Lstm::new(&mut store, "actions", c.action_dim, h, c.lstm_layers, &mut rng)),
                Some(store.add_uniform_vector("action_guard", c.action_dim, &mut rng)),
            )
        } else {
            (None, None)
        };
        let summary = Linear::new(&mut store, "summary", c.enabled_encoders() * h, h, &mut rng);
        let scorer = Linear::new(&mut store, "scorer", h, actions.len(), &mut rng);

        if let Some(table) = pretrained {
            let cols = c.word_dim;
            let mut frozen = alloc::vec![false; vocabs.tokens.len()];
            let values = store.value_mut(word_emb.table);
            for (r, word) in vocabs.tokens.iter().enumerate() {
                if let Some(v) = table.get(word) {
                    for (dst, &src) in values.data[r * cols..(r + 1) * cols].iter_mut().zip(v) {
                        *dst = T::of(src as f64);
                    }
                    frozen[r] = c.freeze_pretrained && table.is_pretrained(word);
                }
            }
            store.set_frozen_rows(word_emb.table, frozen);
        }

        let net = Network {
            word_emb,
            label_emb,
            action_emb,
            token_proj,
            nt_proj,
            stack,
            stack_guard,
            composer,
            buffer,
            buffer_guard,
            actions: action_lstm,
            action_guard,
            summary,
            scorer,
        };
        let normalizer = TokenNormalizer::new(vocabs.tokens.iter().cloned());
        let token_index = vocabs.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let label_index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let action_index = actions.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Ok(Model { config, store, net, vocabs, normalizer, token_index, label_index, actions, action_index })
    }

    /// Rebuilds a model from stored parameter values (matched by name).
    pub fn from_parts<I>(config: RnngConfig, vocabs: Vocabs, params: I) -> Result<Model<T>, RnngError>
    where
        I: IntoIterator<Item = (String, Tensor<T>, Vec<bool>)>,
    {
        let mut model = Model::new(config, vocabs, None)?;
        let mut seen = 0;
        for (name, tensor, frozen) in params {
            let id = model.store.find(&name).ok_or(NeuralError::UnknownParam(name.clone()))?;
            let target = model.store.value(id);
            if target.shape != tensor.shape {
                return Err(NeuralError::DimensionMismatch {
                    what: "stored parameter",
                    expected: target.len(),
                    got: tensor.len(),
                }
                .into());
            }
            *model.store.value_mut(id) = tensor;
            model.store.set_frozen_rows(id, frozen);
            seen += 1;
        }
        if seen != model.store.len() {
            return Err(NeuralError::DimensionMismatch {
                what: "stored parameter count",
                expected: model.store.len(),
                got: seen,
            }
            .into());
        }
        Ok(model)
    }

    /// Same model with parameters converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            store: self.store.cast(),
            net: self.net.clone(),
            vocabs: self.vocabs.clone(),
            normalizer: self.normalizer.clone(),
            token_index: self.token_index.clone(),
            label_index: self.label_index.clone(),
            actions: self.actions.clone(),
            action_index: self.action_index.clone(),
        }
    }

    pub fn vocabs(&self) -> &Vocabs {
        &self.vocabs
    }

    pub fn normalizer(&self) -> &TokenNormalizer {
        &self.normalizer
    }

    /// Action inventory: `SHIFT`, `REDUCE`, then `NT(l)` for intents and
    /// slots in label order.
    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action_index(&self, action: &Action) -> Option<usize> {
        self.action_index.get(action).copied()
    }

    pub fn label_index(&self, label: &Label) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    /// Vocabulary rows of the normalized tokens.
    pub fn token_ids(&self, tokens: &[String]) -> Vec<usize> {
        let unk = self.token_index[UNK_SYMBOL];
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let sym = self.normalizer.normalize(t, i);
                self.token_index.get(&sym).copied().unwrap_or(unk)
            })
            .collect()
    }
}
