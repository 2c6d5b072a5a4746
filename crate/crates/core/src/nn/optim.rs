use ndarray::{ArrayD, Zip};

use super::{ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily per tensor.
pub struct Adam<T> {
    cfg: AdamConfig,
    step: i32,
    m: Vec<Option<ArrayD<T>>>,
    v: Vec<Option<ArrayD<T>>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    /// Apply one update. `grads[i]` belongs to the store tensor with index `i`;
    /// non-trainable tensors are skipped.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<ArrayD<T>>]) {
        if self.m.len() < store.len() {
            self.m.resize_with(store.len(), || None);
            self.v.resize_with(store.len(), || None);
        }
        self.step += 1;
        let b1 = T::of(self.cfg.beta1);
        let b2 = T::of(self.cfg.beta2);
        let one = T::one();
        let c1 = one - b1.powi(self.step);
        let c2 = one - b2.powi(self.step);
        let lr = T::of(self.cfg.learning_rate);
        let eps = T::of(self.cfg.eps);
        let ids: Vec<_> = store.iter().map(|(id, p)| (id, p.kind.trainable())).collect();
        for (id, trainable) in ids {
            let Some(Some(g)) = grads.get(id.index()) else { continue };
            if !trainable {
                continue;
            }
            let i = id.index();
            let m = self.m[i].get_or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            let v = self.v[i].get_or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            Zip::from(store.value_mut(id))
                .and(m)
                .and(v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let mhat = *m / c1;
                    let vhat = *v / c2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }
}
