use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, Graph, NeuralError, ParamId, ParamStore, Scalar, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Linear {
        let w = store.add_matrix(&format!("{name}.w"), output_dim, input_dim, rng);
        let b = store.add_zeros(&format!("{name}.b"), output_dim);
        Linear { w, b: Some(b), input_dim, output_dim }
    }

    /// Applies the layer to the concatenation of `inputs`.
    pub fn apply<T: Scalar>(&self, g: &mut Graph<'_, T>, inputs: &[Var]) -> Result<Var, NeuralError> {
        g.affine(self.w, self.b, inputs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub table: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<T: Scalar, R: Rng>(store: &mut ParamStore<T>, name: &str, rows: usize, dim: usize, rng: &mut R) -> Embedding {
        let table = store.add_matrix(name, rows, dim, rng);
        Embedding { table, rows, dim }
    }

    pub fn lookup<T: Scalar>(&self, g: &mut Graph<'_, T>, index: usize) -> Result<Var, NeuralError> {
        if index >= self.rows {
            return Err(NeuralError::DimensionMismatch { what: "embedding row", expected: self.rows, got: index });
        }
        Ok(g.row(self.table, index))
    }
}

/// One LSTM layer: gates `[i, f, g, o]` stacked in a `4H × (I + H)` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lstm {
    pub layers: Vec<LstmLayer>,
}

/// Per-layer hidden and cell vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmState {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

impl LstmState {
    /// Hidden vector of the top layer.
    pub fn top(&self) -> Var {
        *self.h.last().expect("lstm has at least one layer")
    }
}

impl Lstm {
    /// Weights get uniform init, biases zero except the forget gate at +1.
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input_dim: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Lstm {
        let layers = (0..layers.max(1))
            .map(|k| {
                let in_dim = if k == 0 { input_dim } else { hidden };
                let w = store.add_matrix(&format!("{name}.l{k}.w"), 4 * hidden, in_dim + hidden, rng);
                let b = store.add_zeros(&format!("{name}.l{k}.b"), 4 * hidden);
                for x in &mut store.value_mut(b).data[hidden..2 * hidden] {
                    *x = T::one();
                }
                LstmLayer { w, b, input_dim: in_dim, hidden }
            })
            .collect();
        Lstm { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    /// All-zero initial state.
    pub fn zero_state<T: Scalar>(&self, g: &mut Graph<'_, T>) -> LstmState {
        let h: Vec<Var> = self.layers.iter().map(|l| g.zeros(l.hidden)).collect();
        LstmState { c: h.clone(), h }
    }

    /// Feeds one input through every layer. Inputs to the layers above the
    /// first pass through dropout.
    pub fn step<T: Scalar>(&self, g: &mut Graph<'_, T>, state: &LstmState, x: Var) -> Result<LstmState, NeuralError> {
        check_dim("lstm input", self.input_dim(), g.dim(x))?;
        let mut next = LstmState { h: Vec::with_capacity(self.layers.len()), c: Vec::with_capacity(self.layers.len()) };
        let mut input = x;
        for (k, layer) in self.layers.iter().enumerate() {
            if k > 0 {
                input = g.dropout(input);
            }
            let hd = layer.hidden;
            let gates = g.affine(layer.w, Some(layer.b), &[input, state.h[k]])?;
            let i = g.slice(gates, 0, hd)?;
            let f = g.slice(gates, hd, hd)?;
            let u = g.slice(gates, 2 * hd, hd)?;
            let o = g.slice(gates, 3 * hd, hd)?;
            let i = g.sigmoid(i);
            let f = g.sigmoid(f);
            let u = g.tanh(u);
            let o = g.sigmoid(o);
            let keep = g.mul(f, state.c[k])?;
            let write = g.mul(i, u)?;
            let c = g.add(keep, write)?;
            let tc = g.tanh(c);
            let h = g.mul(o, tc)?;
            next.h.push(h);
            next.c.push(c);
            input = h;
        }
        Ok(next)
    }

    /// Runs the sequence from the zero state and returns the top-layer
    /// hidden vector after each input.
    pub fn sequence<T: Scalar>(&self, g: &mut Graph<'_, T>, inputs: &[Var]) -> Result<Vec<Var>, NeuralError> {
        let mut state = self.zero_state(g);
        let mut out = Vec::with_capacity(inputs.len());
        for &x in inputs {
            state = self.step(g, &state, x)?;
            out.push(state.top());
        }
        Ok(out)
    }
}

/// Bidirectional single-layer LSTM summarizing a sequence into one vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
    pub proj: Linear,
}

impl BiLstm {
    pub fn new<T: Scalar, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> BiLstm {
        let forward = Lstm::new(store, &format!("{name}.fwd"), input_dim, hidden, 1, rng);
        let backward = Lstm::new(store, &format!("{name}.bwd"), input_dim, hidden, 1, rng);
        let proj = Linear::new(store, &format!("{name}.proj"), 2 * hidden, output_dim, rng);
        BiLstm { forward, backward, proj }
    }

    /// Final forward state (after the last element) and final backward
    /// state (after the first element).
    pub fn final_states<T: Scalar>(&self, g: &mut Graph<'_, T>, inputs: &[Var]) -> Result<(Var, Var), NeuralError> {
        if inputs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let fwd = self.forward.sequence(g, inputs)?;
        let reversed: Vec<Var> = inputs.iter().rev().copied().collect();
        let bwd = self.backward.sequence(g, &reversed)?;
        Ok((*fwd.last().unwrap(), *bwd.last().unwrap()))
    }

    /// Linear projection of `[forward; backward]` final states.
    pub fn encode<T: Scalar>(&self, g: &mut Graph<'_, T>, inputs: &[Var]) -> Result<Var, NeuralError> {
        let (f, b) = self.final_states(g, inputs)?;
        self.proj.apply(g, &[f, b])
    }
}
