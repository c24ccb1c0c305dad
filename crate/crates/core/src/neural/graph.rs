use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::log_softmax_masked;
use super::{check_dim, Gradients, NeuralError, ParamId, ParamStore, Scalar};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Row(ParamId, usize),
    Affine { w: ParamId, b: Option<ParamId>, inputs: Vec<Var> },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Scale(Var, Vec<T>),
    Nll { logits: Var, gold: usize, probs: Vec<T> },
    Sum(Vec<Var>),
}

/// Append-only tape of vector operations over a borrowed [`ParamStore`].
///
/// Values are computed eagerly; [`Graph::backward`] walks the tape in reverse.
/// A graph built in training mode applies inverted dropout with masks drawn
/// from its own seeded generator, so rebuilding a graph with the same seed
/// reproduces the same masks.
pub struct Graph<'s, T: Scalar> {
    store: &'s ParamStore<T>,
    ops: Vec<Op<T>>,
    values: Vec<Vec<T>>,
    dropout: T,
    training: bool,
    rng: ChaCha8Rng,
}

impl<'s, T: Scalar> Graph<'s, T> {
    /// Evaluation-mode graph: dropout is the identity.
    pub fn new(store: &'s ParamStore<T>) -> Graph<'s, T> {
        Graph {
            store,
            ops: Vec::new(),
            values: Vec::new(),
            dropout: T::zero(),
            training: false,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    pub fn training(store: &'s ParamStore<T>, dropout: f64, seed: u64) -> Graph<'s, T> {
        Graph {
            store,
            ops: Vec::new(),
            values: Vec::new(),
            dropout: T::of(dropout),
            training: true,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn store(&self) -> &'s ParamStore<T> {
        self.store
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Vec<T>) -> Var {
        self.ops.push(op);
        self.values.push(value);
        Var((self.ops.len() - 1) as u32)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.values[v.index()]
    }

    pub fn scalar(&self, v: Var) -> T {
        self.values[v.index()][0]
    }

    pub fn dim(&self, v: Var) -> usize {
        self.values[v.index()].len()
    }

    pub fn input(&mut self, value: Vec<T>) -> Var {
        self.push(Op::Input, value)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.input(vec![T::zero(); n])
    }

    /// The whole parameter as a vector.
    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.value(id).data.clone();
        self.push(Op::Param(id), value)
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, id: ParamId, r: usize) -> Var {
        let value = self.store.value(id).row(r).to_vec();
        self.push(Op::Row(id, r), value)
    }

    /// `W · concat(inputs) + b`, without materializing the concatenation.
    pub fn affine(&mut self, w: ParamId, b: Option<ParamId>, inputs: &[Var]) -> Result<Var, NeuralError> {
        let wt = self.store.value(w);
        let (rows, cols) = (wt.rows(), wt.cols());
        let width: usize = inputs.iter().map(|&v| self.dim(v)).sum();
        check_dim("affine input", cols, width)?;
        let mut y = match b {
            Some(b) => {
                let bias = &self.store.value(b).data;
                check_dim("affine bias", rows, bias.len())?;
                bias.clone()
            }
            None => vec![T::zero(); rows],
        };
        let mut off = 0;
        for &input in inputs {
            let x = &self.values[input.index()];
            for (r, yr) in y.iter_mut().enumerate() {
                let wrow = &wt.data[r * cols + off..r * cols + off + x.len()];
                *yr += dot(wrow, x);
            }
            off += x.len();
        }
        Ok(self.push(Op::Affine { w, b, inputs: inputs.to_vec() }, y))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        check_dim("add", self.dim(a), self.dim(b))?;
        let y = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        Ok(self.push(Op::Add(a, b), y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        check_dim("mul", self.dim(a), self.dim(b))?;
        let y = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        Ok(self.push(Op::Mul(a, b), y))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let y = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(Op::Sigmoid(a), y)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).iter().map(|&x| x.libm_tanh()).collect();
        self.push(Op::Tanh(a), y)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let y = self.value(a).iter().map(|&x| if x > T::zero() { x } else { T::zero() }).collect();
        self.push(Op::Relu(a), y)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut y = Vec::with_capacity(parts.iter().map(|&p| self.dim(p)).sum());
        for &p in parts {
            y.extend_from_slice(self.value(p));
        }
        self.push(Op::Concat(parts.to_vec()), y)
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NeuralError> {
        if start + len > self.dim(a) {
            return Err(NeuralError::DimensionMismatch {
                what: "slice",
                expected: start + len,
                got: self.dim(a),
            });
        }
        let y = self.value(a)[start..start + len].to_vec();
        Ok(self.push(Op::Slice(a, start), y))
    }

    /// Inverted dropout in training mode, identity otherwise.
    pub fn dropout(&mut self, a: Var) -> Var {
        if !self.training || self.dropout <= T::zero() {
            return a;
        }
        let p = self.dropout.as_f64();
        let keep = T::of(1.0 / (1.0 - p));
        let n = self.dim(a);
        let mask: Vec<T> = (0..n)
            .map(|_| if self.rng.random::<f64>() < p { T::zero() } else { keep })
            .collect();
        let y = self.value(a).iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        self.push(Op::Scale(a, mask), y)
    }

    /// Negative log-probability of `gold` under a softmax restricted to
    /// `mask`; masked entries get probability zero.
    pub fn masked_nll(&mut self, logits: Var, gold: usize, mask: &[bool]) -> Result<Var, NeuralError> {
        check_dim("mask", self.dim(logits), mask.len())?;
        if !mask.get(gold).copied().unwrap_or(false) {
            return Err(NeuralError::GoldMasked(gold));
        }
        let logp = log_softmax_masked(self.value(logits), mask);
        let loss = -logp[gold];
        let probs = logp
            .iter()
            .zip(mask)
            .map(|(&lp, &m)| if m { lp.libm_exp() } else { T::zero() })
            .collect();
        Ok(self.push(Op::Nll { logits, gold, probs }, vec![loss]))
    }

    /// Elementwise sum of equally sized vectors.
    pub fn sum(&mut self, parts: &[Var]) -> Result<Var, NeuralError> {
        let n = parts.first().map(|&p| self.dim(p)).ok_or(NeuralError::EmptySequence)?;
        let mut y = vec![T::zero(); n];
        for &p in parts {
            check_dim("sum", n, self.dim(p))?;
            for (a, &b) in y.iter_mut().zip(self.value(p)) {
                *a += b;
            }
        }
        Ok(self.push(Op::Sum(parts.to_vec()), y))
    }

    /// Gradients of the scalar `loss` with respect to every parameter it touches.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        let mut out = Gradients::new(self.store.len());
        let mut grads: Vec<Vec<T>> = vec![Vec::new(); self.ops.len()];
        grads[loss.index()] = vec![T::one(); self.dim(loss)];

        for i in (0..=loss.index()).rev() {
            let g = core::mem::take(&mut grads[i]);
            if g.is_empty() {
                continue;
            }
            let y = &self.values[i];
            match &self.ops[i] {
                Op::Input => {}
                Op::Param(id) => {
                    let slot = out.slot(*id, g.len());
                    axpy(slot, &g, T::one());
                }
                Op::Row(id, r) => {
                    let t = self.store.value(*id);
                    let cols = t.cols();
                    let slot = out.slot(*id, t.len());
                    axpy(&mut slot[r * cols..(r + 1) * cols], &g, T::one());
                }
                Op::Affine { w, b, inputs } => {
                    let wt = self.store.value(*w);
                    let cols = wt.cols();
                    if let Some(b) = b {
                        axpy(out.slot(*b, g.len()), &g, T::one());
                    }
                    let mut off = 0;
                    for &input in inputs {
                        let x = &self.values[input.index()];
                        let n = x.len();
                        {
                            let dw = out.slot(*w, wt.len());
                            for (r, &gr) in g.iter().enumerate() {
                                if gr != T::zero() {
                                    axpy(&mut dw[r * cols + off..r * cols + off + n], x, gr);
                                }
                            }
                        }
                        let dx = acc(&mut grads, input, n);
                        for (r, &gr) in g.iter().enumerate() {
                            if gr != T::zero() {
                                axpy(dx, &wt.data[r * cols + off..r * cols + off + n], gr);
                            }
                        }
                        off += n;
                    }
                }
                Op::Add(a, b) => {
                    axpy(acc(&mut grads, *a, g.len()), &g, T::one());
                    axpy(acc(&mut grads, *b, g.len()), &g, T::one());
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.values[a.index()], &self.values[b.index()]);
                    let da = acc(&mut grads, *a, g.len());
                    for ((d, &gi), &x) in da.iter_mut().zip(&g).zip(vb) {
                        *d += gi * x;
                    }
                    let db = acc(&mut grads, *b, g.len());
                    for ((d, &gi), &x) in db.iter_mut().zip(&g).zip(va) {
                        *d += gi * x;
                    }
                }
                Op::Sigmoid(a) => {
                    let da = acc(&mut grads, *a, g.len());
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (T::one() - yi);
                    }
                }
                Op::Tanh(a) => {
                    let da = acc(&mut grads, *a, g.len());
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * (T::one() - yi * yi);
                    }
                }
                Op::Relu(a) => {
                    let da = acc(&mut grads, *a, g.len());
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        if yi > T::zero() {
                            *d += gi;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.dim(p);
                        axpy(acc(&mut grads, p, n), &g[off..off + n], T::one());
                        off += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.dim(*a);
                    let da = acc(&mut grads, *a, n);
                    axpy(&mut da[*start..*start + g.len()], &g, T::one());
                }
                Op::Scale(a, mask) => {
                    let da = acc(&mut grads, *a, g.len());
                    for ((d, &gi), &m) in da.iter_mut().zip(&g).zip(mask) {
                        *d += gi * m;
                    }
                }
                Op::Nll { logits, gold, probs } => {
                    let g0 = g[0];
                    let dl = acc(&mut grads, *logits, probs.len());
                    for (j, (d, &p)) in dl.iter_mut().zip(probs).enumerate() {
                        let target = if j == *gold { T::one() } else { T::zero() };
                        *d += g0 * (p - target);
                    }
                }
                Op::Sum(parts) => {
                    for &p in parts {
                        axpy(acc(&mut grads, p, g.len()), &g, T::one());
                    }
                }
            }
        }
        out
    }
}

fn acc<T: Scalar>(grads: &mut [Vec<T>], v: Var, n: usize) -> &mut [T] {
    let slot = &mut grads[v.index()];
    if slot.is_empty() {
        *slot = vec![T::zero(); n];
    }
    slot
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], x: &[T], a: T) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).libm_exp())
    } else {
        let e = x.libm_exp();
        e / (T::one() + e)
    }
}
