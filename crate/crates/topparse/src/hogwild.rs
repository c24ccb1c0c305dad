//! Lock-free multi-worker training. Workers read the shared parameters,
//! compute an example's gradient and apply AdamW element by element with
//! relaxed atomic loads and stores, tolerating lost updates. Results depend
//! on thread scheduling, so this mode is not reproducible.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::thread;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use topparse_core::dataset::Example;
use topparse_core::neural::{adam_update_corrected, AdamConfig, BiasCorrection, ParamStore};
use topparse_core::rnng::{loss_and_gradients, mix_seed, prepare, EpochEnd, Model, RnngError, TrainReport};

struct SharedParam {
    value: Vec<AtomicU32>,
    m: Vec<AtomicU32>,
    v: Vec<AtomicU32>,
    cols: usize,
    frozen: Vec<bool>,
}

fn atomics(xs: &[f32]) -> Vec<AtomicU32> {
    xs.iter().map(|x| AtomicU32::new(x.to_bits())).collect()
}

fn load(a: &AtomicU32) -> f32 {
    f32::from_bits(a.load(Ordering::Relaxed))
}

fn store(a: &AtomicU32, x: f32) {
    a.store(x.to_bits(), Ordering::Relaxed)
}

fn snapshot(shared: &[SharedParam], into: &mut ParamStore<f32>) {
    for (p, id) in shared.iter().zip(into.ids().collect::<Vec<_>>()) {
        for (dst, src) in into.value_mut(id).data.iter_mut().zip(&p.value) {
            *dst = load(src);
        }
    }
}

/// Trains like [`topparse_core::rnng::train`] but spreads each epoch's
/// examples over `workers` threads sharing one set of parameters.
pub fn train_hogwild<F>(
    model: &mut Model<f32>,
    examples: &[Example],
    workers: usize,
    mut on_epoch: F,
) -> Result<TrainReport, RnngError>
where
    F: FnMut(&EpochEnd, &Model<f32>),
{
    let workers = workers.max(1);
    let prepared = examples.iter().map(|e| prepare(model, e)).collect::<Result<Vec<_>, _>>()?;
    let adam = AdamConfig::new(model.config.lr, model.config.weight_decay);
    let seed = model.config.seed;
    let shared: Vec<SharedParam> = model
        .store
        .params()
        .iter()
        .map(|p| {
            let (m, v) = p.moments();
            SharedParam {
                value: atomics(&p.value.data),
                m: atomics(m),
                v: atomics(v),
                cols: p.value.cols().max(1),
                frozen: p.frozen_rows.clone(),
            }
        })
        .collect();
    let step = AtomicU64::new(model.store.timestep());
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x5348_5546]));
    let mut report = TrainReport::default();
    for epoch in 0..model.config.epochs {
        order.shuffle(&mut rng);
        let frozen_model: &Model<f32> = model;
        let results: Vec<Result<f64, RnngError>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let (order, shared, step, prepared, adam) = (&order, &shared, &step, &prepared, &adam);
                    scope.spawn(move || -> Result<f64, RnngError> {
                        let mut local = frozen_model.store.clone();
                        let mut total = 0.0;
                        for &i in order.iter().skip(w).step_by(workers) {
                            snapshot(shared, &mut local);
                            let dropout_seed = mix_seed(&[seed, epoch as u64, i as u64]);
                            let (loss, grads) = loss_and_gradients(frozen_model, &local, &prepared[i], Some(dropout_seed))?;
                            total += f64::from(loss);
                            let t = step.fetch_add(1, Ordering::Relaxed) + 1;
                            let bias = BiasCorrection::at(t, adam);
                            for (p, g) in shared.iter().zip(&grads.per_param) {
                                let Some(g) = g else { continue };
                                for (k, &gk) in g.iter().enumerate() {
                                    if p.frozen.get(k / p.cols).copied().unwrap_or(false) {
                                        continue;
                                    }
                                    let (mut x, mut m, mut v) = (load(&p.value[k]), load(&p.m[k]), load(&p.v[k]));
                                    adam_update_corrected(&mut x, gk, &mut m, &mut v, &bias, adam);
                                    store(&p.value[k], x);
                                    store(&p.m[k], m);
                                    store(&p.v[k], v);
                                }
                            }
                        }
                        Ok(total)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut total = 0.0;
        for r in results {
            total += r?;
        }
        snapshot(&shared, &mut model.store);
        report.updates += prepared.len() as u64;
        let mean_loss = if prepared.is_empty() { 0.0 } else { total / prepared.len() as f64 };
        report.epoch_losses.push(mean_loss);
        on_epoch(&EpochEnd { epoch, mean_loss, updates: report.updates }, model);
    }
    Ok(report)
}
