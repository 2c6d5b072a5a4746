use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Role of a stored tensor; decides whether it is trained and regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
    NormScale,
    NormShift,
    RunningMean,
    RunningVar,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::RunningMean | ParamKind::RunningVar)
    }

    /// Whether the tensor contributes to the L2 penalty.
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight | ParamKind::Bias)
    }
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: ArrayD<T>,
}

/// Flat, ordered collection of every tensor a network owns.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, value: ArrayD<T>) -> ParamId {
        self.params.push(Param {
            name: name.into(),
            kind,
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &ArrayD<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ArrayD<T> {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Number of trainable scalars (running statistics excluded).
    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.kind.trainable())
            .map(|p| p.value.len())
            .sum()
    }

    /// Squared L2 norm over regularized tensors (weights and biases).
    pub fn decay_sq_norm(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.kind.decays())
            .flat_map(|p| p.value.iter())
            .fold(0.0, |acc, &v| {
                let v = v.to_f64().unwrap_or(f64::NAN);
                acc + v * v
            })
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    value: p.value.mapv(|v| U::of(v.to_f64().unwrap_or(0.0))),
                })
                .collect(),
        }
    }
}

/// Scoped helper that registers freshly initialized tensors in a store.
pub struct ParamBuilder<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a, T: Scalar> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
        }
    }

    /// Child builder whose names are prefixed with `scope.`.
    pub fn scope(&mut self, scope: &str) -> ParamBuilder<'_, T> {
        let prefix = if self.prefix.is_empty() {
            scope.to_string()
        } else {
            format!("{}.{}", self.prefix, scope)
        };
        ParamBuilder {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    pub fn normal(&mut self, name: &str, kind: ParamKind, shape: &[usize], std: f64) -> ParamId {
        let dist = Normal::new(0.0, std).expect("std is finite and non-negative");
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n).map(|_| T::of(dist.sample(self.rng))).collect();
        let value = ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape matches length");
        let full = self.full_name(name);
        self.store.add(full, kind, value)
    }

    pub fn constant(&mut self, name: &str, kind: ParamKind, shape: &[usize], v: f64) -> ParamId {
        let value = ArrayD::from_elem(IxDyn(shape), T::of(v));
        let full = self.full_name(name);
        self.store.add(full, kind, value)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }

    pub fn uniform_seed(&mut self) -> u64 {
        self.rng.random()
    }
}
