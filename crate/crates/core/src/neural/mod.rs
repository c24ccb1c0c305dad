//! Dense parameters, a reverse-mode tape and the few layers the parser needs.
//!
//! Everything is generic over [`Scalar`]: `f32` for training and inference,
//! `f64` for finite-difference gradient checks.

mod adam;
mod graph;
mod gradcheck;
mod layers;
mod loss;

pub use adam::{adam_step, adam_update, adam_update_corrected, AdamConfig, BiasCorrection};
pub use gradcheck::{grad_check, GradCheckReport, ParamCheck};
pub use graph::{Graph, Var};
pub use layers::{BiLstm, Embedding, Linear, Lstm, LstmLayer, LstmState};
pub use loss::{log_softmax_masked, softmax_nll};

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::{Float, NumAssign};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Float type of a computation graph.
///
/// `exp`, `ln` and `tanh` always come from `libm` so results do not depend
/// on whether `num-traits` was built with its `std` feature.
pub trait Scalar: Float + NumAssign + Default + Debug + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn libm_exp(self) -> Self;
    fn libm_ln(self) -> Self;
    fn libm_tanh(self) -> Self;
}

impl Scalar for f32 {
    fn of(x: f64) -> f32 {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn libm_exp(self) -> f32 {
        libm::expf(self)
    }
    fn libm_ln(self) -> f32 {
        libm::logf(self)
    }
    fn libm_tanh(self) -> f32 {
        libm::tanhf(self)
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> f64 {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn libm_exp(self) -> f64 {
        libm::exp(self)
    }
    fn libm_ln(self) -> f64 {
        libm::log(self)
    }
    fn libm_tanh(self) -> f64 {
        libm::tanh(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NeuralError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("gold index {0} is masked out")]
    GoldMasked(usize),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), NeuralError> {
    if expected == got {
        Ok(())
    } else {
        Err(NeuralError::DimensionMismatch { what, expected, got })
    }
}

/// Dense row-major array; parameters are vectors (`[n]`) or matrices (`[rows, cols]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Tensor<T> {
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Tensor<T>, NeuralError> {
        check_dim("tensor", shape.iter().product(), data.len())?;
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    /// Rows excluded from optimizer updates (empty = all rows train).
    pub frozen_rows: Vec<bool>,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn is_row_frozen(&self, r: usize) -> bool {
        self.frozen_rows.get(r).copied().unwrap_or(false)
    }
}

/// Named parameters with gradient accumulators and Adam moments.
#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
    grads: Vec<Vec<T>>,
    timestep: u64,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> ParamStore<T> {
        ParamStore { params: Vec::new(), grads: Vec::new(), timestep: 0 }
    }

    pub fn add(&mut self, name: &str, value: Tensor<T>) -> ParamId {
        let n = value.len();
        self.params.push(Param {
            name: name.to_string(),
            value,
            frozen_rows: Vec::new(),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        });
        self.grads.push(vec![T::zero(); n]);
        ParamId(self.params.len() - 1)
    }

    /// Matrix with uniform init in ±sqrt(6 / (rows + cols)).
    pub fn add_matrix<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, rng: &mut R) -> ParamId {
        let bound = <f64 as Float>::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols)
            .map(|_| T::of(rng.random_range(-bound..=bound)))
            .collect();
        self.add(name, Tensor { shape: vec![rows, cols], data })
    }

    pub fn add_zeros(&mut self, name: &str, n: usize) -> ParamId {
        self.add(name, Tensor::zeros(&[n]))
    }

    /// Vector with uniform init in ±sqrt(6 / (n + 1)).
    pub fn add_uniform_vector<R: Rng>(&mut self, name: &str, n: usize, rng: &mut R) -> ParamId {
        let bound = <f64 as Float>::sqrt(6.0 / (n + 1) as f64);
        let data = (0..n).map(|_| T::of(rng.random_range(-bound..=bound))).collect();
        self.add(name, Tensor { shape: vec![n], data })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn param(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn set_frozen_rows(&mut self, id: ParamId, frozen: Vec<bool>) {
        self.params[id.0].frozen_rows = frozen;
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn grad(&self, id: ParamId) -> &[T] {
        &self.grads[id.0]
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds a backward pass result into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (acc, g) in self.grads.iter_mut().zip(&grads.per_param) {
            if let Some(g) = g {
                for (a, &x) in acc.iter_mut().zip(g) {
                    *a += x;
                }
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// Same parameters converted to another scalar type (moments reset).
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for p in &self.params {
            let data = p.value.data.iter().map(|&x| U::of(x.as_f64())).collect();
            let id = out.add(&p.name, Tensor { shape: p.value.shape.clone(), data });
            out.set_frozen_rows(id, p.frozen_rows.clone());
        }
        out
    }

    /// Split borrow used by the optimizer.
    pub(crate) fn optimizer_view(&mut self) -> (&mut [Param<T>], &mut [Vec<T>], &mut u64) {
        (&mut self.params, &mut self.grads, &mut self.timestep)
    }
}

impl<T> Param<T> {
    pub(crate) fn moments_mut(&mut self) -> (&mut Tensor<T>, &mut [T], &mut [T], &[bool]) {
        (&mut self.value, &mut self.m, &mut self.v, &self.frozen_rows)
    }

    pub fn moments(&self) -> (&[T], &[T]) {
        (&self.m, &self.v)
    }
}

/// Parameter gradients from one backward pass; untouched parameters stay `None`.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub per_param: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn new(n_params: usize) -> Gradients<T> {
        Gradients { per_param: vec![None; n_params] }
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.per_param[id.0].as_deref()
    }

    pub(crate) fn slot(&mut self, id: ParamId, len: usize) -> &mut [T] {
        self.per_param[id.0].get_or_insert_with(|| vec![T::zero(); len])
    }

    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.per_param.iter_mut().zip(&other.per_param) {
            if let Some(b) = b {
                match a {
                    Some(a) => a.iter_mut().zip(b).for_each(|(x, &y)| *x += y),
                    None => *a = Some(b.clone()),
                }
            }
        }
    }
}
