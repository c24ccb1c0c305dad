//! Discriminative recurrent neural network grammar.
//!
//! A parser state is summarized by three recurrent encoders: a stack LSTM
//! over the partial tree (reduced subtrees are folded into one vector by a
//! bidirectional composition LSTM), a buffer LSTM read right-to-left over
//! the remaining tokens, and an LSTM over the action history. Their top
//! states feed a rectifier layer and a scorer over the whole action
//! inventory; actions outside the transition mask get probability zero.

mod decode;
mod model;
mod session;
mod train;

pub use decode::{parse_beam, parse_greedy, score_actions, Parse};
pub use model::{Model, Network};
pub use session::{Hypothesis, Session};
pub use train::{loss_and_gradients, mix_seed, prepare, train, EpochEnd, Prepared, TrainReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::NeuralError;
use crate::transitions::{TransitionError, DEFAULT_MAX_OPEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RnngConfig {
    pub word_dim: usize,
    pub label_dim: usize,
    pub action_dim: usize,
    pub lstm_units: usize,
    pub lstm_layers: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub use_stack: bool,
    pub use_buffer: bool,
    pub use_actions: bool,
    pub beam_size: usize,
    pub seed: u64,
    /// Words seen fewer times are replaced by unknown-word classes.
    pub min_count: usize,
    pub max_open: usize,
    /// Keep rows initialized from pretrained vectors fixed during training.
    pub freeze_pretrained: bool,
}

impl Default for RnngConfig {
    fn default() -> Self {
        RnngConfig {
            word_dim: 64,
            label_dim: 32,
            action_dim: 32,
            lstm_units: 164,
            lstm_layers: 2,
            dropout: 0.34,
            lr: 0.0004,
            weight_decay: 0.00004,
            epochs: 1,
            use_stack: true,
            use_buffer: true,
            use_actions: true,
            beam_size: 1,
            seed: 1,
            min_count: 1,
            max_open: DEFAULT_MAX_OPEN,
            freeze_pretrained: true,
        }
    }
}

impl RnngConfig {
    pub fn validate(&self) -> Result<(), RnngError> {
        if !(self.use_stack || self.use_buffer || self.use_actions) {
            return Err(RnngError::AllEncodersDisabled);
        }
        let dims = [self.word_dim, self.label_dim, self.action_dim, self.lstm_units, self.lstm_layers];
        if dims.contains(&0) || self.beam_size == 0 || self.max_open == 0 {
            return Err(RnngError::InvalidConfig("dimensions, layers, beam size and max_open must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(RnngError::InvalidConfig("dropout must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn enabled_encoders(&self) -> usize {
        [self.use_stack, self.use_buffer, self.use_actions].iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoder {
    Stack,
    Buffer,
    Actions,
}

/// Returns `config` with `encoder` switched off.
pub fn ablate(config: &RnngConfig, encoder: Encoder) -> Result<RnngConfig, RnngError> {
    let mut out = config.clone();
    match encoder {
        Encoder::Stack => out.use_stack = false,
        Encoder::Buffer => out.use_buffer = false,
        Encoder::Actions => out.use_actions = false,
    }
    if out.enabled_encoders() == 0 {
        return Err(RnngError::AllEncodersDisabled);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RnngError {
    #[error("at least one state encoder must stay enabled")]
    AllEncodersDisabled,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("empty utterance")]
    EmptyUtterance,
    #[error("composition needs at least one child")]
    EmptyChildren,
    #[error("label {0} is not in the model's label set")]
    UnknownLabel(alloc::string::String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}
