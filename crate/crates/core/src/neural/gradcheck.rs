use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use super::{Gradients, ParamId, ParamStore};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely: the relative error
/// uses `max(|analytic|, |numeric|, RELATIVE_FLOOR)` as its denominator.
pub const RELATIVE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub loss: f64,
    pub params: Vec<ParamCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |p| p.max_rel_error)
    }
}

/// Compares analytic gradients against central differences on every
/// coordinate of every parameter.
///
/// `loss_and_grad` must be a deterministic function of the store.
pub fn grad_check<F>(store: &ParamStore<f64>, loss_and_grad: F, tolerance: f64) -> GradCheckReport
where
    F: Fn(&ParamStore<f64>) -> (f64, Gradients<f64>),
{
    let (loss, analytic) = loss_and_grad(store);
    let mut probe = store.clone();
    let mut params = Vec::with_capacity(store.len());
    for id in store.ids() {
        let n = store.value(id).len();
        let mut check = ParamCheck {
            name: store.param(id).name.clone(),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..n {
            let a = analytic.get(id).map_or(0.0, |g| g[i]);
            let x = of(&probe, id, i);
            set(&mut probe, id, i, x + FD_STEP);
            let up = loss_and_grad(&probe).0;
            set(&mut probe, id, i, x - FD_STEP);
            let down = loss_and_grad(&probe).0;
            set(&mut probe, id, i, x);
            let numeric = (up - down) / (2.0 * FD_STEP);
            let denom = a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            let rel = (a - numeric).abs() / denom;
            if rel > check.max_rel_error || i == 0 {
                check.max_rel_error = rel;
                check.worst_index = i;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        params.push(check);
    }
    let passed = params.iter().all(|p| p.max_rel_error <= tolerance);
    GradCheckReport { tolerance, loss, params, passed }
}

fn of(store: &ParamStore<f64>, id: ParamId, i: usize) -> f64 {
    store.value(id).data[i]
}

fn set(store: &mut ParamStore<f64>, id: ParamId, i: usize, x: f64) {
    store.value_mut(id).data[i] = x;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Graph, Tensor};
    use alloc::vec;

    fn linear_store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", Tensor::from_vec(&[2, 3], vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap());
        s.add("b", Tensor::from_vec(&[2], vec![0.01, 0.02]).unwrap());
        s
    }

    fn linear_loss(s: &ParamStore<f64>) -> (f64, Gradients<f64>) {
        let mut g = Graph::new(s);
        let x = g.input(vec![1.0, 2.0, -1.0]);
        let y = g.affine(ParamId(0), Some(ParamId(1)), &[x]).unwrap();
        let a = g.slice(y, 0, 1).unwrap();
        let b = g.slice(y, 1, 1).unwrap();
        let loss = g.sum(&[a, b]).unwrap();
        (g.scalar(loss), g.backward(loss))
    }

    #[test]
    fn linear_model_is_exact() {
        let report = grad_check(&linear_store(), linear_loss, 1e-9);
        assert!(report.passed, "{report:?}");
        assert!(report.max_rel_error() < 1e-9);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let report = grad_check(
            &linear_store(),
            |s| {
                let (l, mut g) = linear_loss(s);
                g.per_param[0].as_mut().unwrap()[4] += 0.1;
                (l, g)
            },
            1e-4,
        );
        assert!(!report.passed);
        let worst = report.worst().unwrap();
        assert_eq!(worst.name, "w");
        assert_eq!(worst.worst_index, 4);
    }
}
