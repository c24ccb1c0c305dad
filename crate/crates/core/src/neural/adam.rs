use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{ParamStore, Scalar};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> AdamConfig {
        AdamConfig { lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-correction denominators `1 - beta^t` of one timestep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCorrection {
    pub first: f64,
    pub second: f64,
}

impl BiasCorrection {
    /// For (1-based) timestep `t`.
    pub fn at(t: u64, cfg: &AdamConfig) -> BiasCorrection {
        let t = t as f64;
        BiasCorrection { first: 1.0 - libm::pow(cfg.beta1, t), second: 1.0 - libm::pow(cfg.beta2, t) }
    }
}

/// Updates one coordinate at (1-based) timestep `t`.
#[inline]
pub fn adam_update<T: Scalar>(p: &mut T, g: T, m: &mut T, v: &mut T, t: u64, cfg: &AdamConfig) {
    adam_update_corrected(p, g, m, v, &BiasCorrection::at(t, cfg), cfg);
}

/// [`adam_update`] with the timestep's bias corrections precomputed.
#[inline]
pub fn adam_update_corrected<T: Scalar>(p: &mut T, g: T, m: &mut T, v: &mut T, bias: &BiasCorrection, cfg: &AdamConfig) {
    let g = g.as_f64();
    let m1 = cfg.beta1 * m.as_f64() + (1.0 - cfg.beta1) * g;
    let v1 = cfg.beta2 * v.as_f64() + (1.0 - cfg.beta2) * g * g;
    let m_hat = m1 / bias.first;
    let v_hat = v1 / bias.second;
    let x = p.as_f64();
    let step = m_hat / (Float::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * x;
    *p = T::of(x - cfg.lr * step);
    *m = T::of(m1);
    *v = T::of(v1);
}

/// One optimizer step from the accumulated gradients, which are then
/// cleared. Frozen rows are left untouched.
pub fn adam_step<T: Scalar>(store: &mut ParamStore<T>, cfg: &AdamConfig) {
    let (params, grads, timestep) = store.optimizer_view();
    *timestep += 1;
    let bias = BiasCorrection::at(*timestep, cfg);
    for (param, grad) in params.iter_mut().zip(grads.iter_mut()) {
        let (value, m, v, frozen) = param.moments_mut();
        let cols = value.cols();
        for (i, g) in grad.iter_mut().enumerate() {
            if !frozen.is_empty() && frozen.get(i / cols).copied().unwrap_or(false) {
                *g = T::zero();
                continue;
            }
            adam_update_corrected(&mut value.data[i], *g, &mut m[i], &mut v[i], &bias, cfg);
            *g = T::zero();
        }
    }
}
