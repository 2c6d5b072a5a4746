//! Network definitions for the three frameworks.
//!
//! * [`build_inception_net`]: the six low-footprint inception networks.
//! * [`build_backbone`]: benchmark architectures trained from scratch.
//! * [`build_mlp_head`]: the dense head trained on frozen embeddings, fed by
//!   an [`EmbeddingProvider`].
//!
//! Every builder returns a [`Network`], which owns its parameters and
//! exposes softmax predictions plus named embedding taps.

mod backbones;
mod checkpoint;
mod embedding;
mod inception;
mod layers;
mod mlp;

use ndarray::{Array2, ArrayD, Axis, Ix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Spectrogram, SpectrogramKind};
use crate::nn::{Mode, NodeId, ParamStore, Scalar, Tape};

pub use backbones::{build_backbone, BackboneName};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry, CHECKPOINT_VERSION};
pub use embedding::{
    fixture_embedding_provider, EmbeddingProvider, FixtureEmbeddingProvider, NetworkTapProvider,
};
pub use inception::{build_inception_net, InceptionLayer, InceptionSpec};
pub use mlp::{build_mlp, build_mlp_head, MLP_HIDDEN};

/// Number of output classes (Normal, Crackle, Wheeze, Both).
pub const NUM_CLASSES: usize = 4;

/// What a network accepts, per example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputContract {
    Spectrogram { kind: SpectrogramKind },
    Vector { dim: usize },
}

impl InputContract {
    /// Per-example shape without the batch axis.
    pub fn example_shape(&self) -> Vec<usize> {
        match *self {
            InputContract::Spectrogram { kind } => {
                let (h, w) = kind.shape();
                vec![1, h, w]
            }
            InputContract::Vector { dim } => vec![dim],
        }
    }
}

/// Serializable recipe that rebuilds a network's parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelDescriptor {
    Inception(InceptionSpec),
    Backbone { name: BackboneName },
    Mlp { input_dim: usize, hidden: Vec<usize>, dropout: f64 },
}

impl ModelDescriptor {
    pub fn label(&self) -> String {
        match self {
            ModelDescriptor::Inception(spec) => spec.name.clone(),
            ModelDescriptor::Backbone { name } => name.to_string(),
            ModelDescriptor::Mlp { input_dim, .. } => format!("MLP({input_dim})"),
        }
    }
}

/// A named intermediate activation that can be read out as an embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TapInfo {
    pub name: String,
    pub width: usize,
}

/// Result of tracing one forward pass onto a tape.
pub struct Forward {
    pub logits: NodeId,
    pub taps: Vec<(String, NodeId)>,
}

/// Forward definition of a network over parameters it registered earlier.
pub trait Architecture<T: Scalar>: Send + Sync {
    fn trace(&self, tape: &mut Tape<'_, T>, input: NodeId) -> Result<Forward>;
    fn taps(&self) -> Vec<TapInfo>;
}

/// A trainable network together with its parameters.
pub struct Network<T: Scalar = f32> {
    descriptor: ModelDescriptor,
    input: InputContract,
    arch: Box<dyn Architecture<T>>,
    store: ParamStore<T>,
}

impl<T: Scalar> Network<T> {
    pub(crate) fn new(
        descriptor: ModelDescriptor,
        input: InputContract,
        arch: Box<dyn Architecture<T>>,
        store: ParamStore<T>,
    ) -> Self {
        Self {
            descriptor,
            input,
            arch,
            store,
        }
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn input_contract(&self) -> InputContract {
        self.input
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.store.trainable_count()
    }

    pub fn taps(&self) -> Vec<TapInfo> {
        self.arch.taps()
    }

    pub fn output_shape(&self, batch: usize) -> (usize, usize) {
        (batch, NUM_CLASSES)
    }

    pub fn check_batch(&self, batch: &ArrayD<T>) -> Result<()> {
        let expected = self.input.example_shape();
        if batch.ndim() != expected.len() + 1 || batch.shape()[1..] != expected[..] || batch.shape()[0] == 0 {
            return Err(Error::contract(format!(
                "{} expects batches of {:?}, got {:?}",
                self.descriptor.label(),
                expected,
                batch.shape()
            )));
        }
        Ok(())
    }

    /// Record a forward pass in the given mode; used by training.
    pub fn trace<'s>(&'s self, tape: &mut Tape<'s, T>, batch: ArrayD<T>) -> Result<Forward> {
        self.check_batch(&batch)?;
        let x = tape.input(batch);
        self.arch.trace(tape, x)
    }

    /// Evaluation-mode softmax probabilities, one row per example.
    pub fn forward(&self, batch: ArrayD<T>) -> Result<Array2<T>> {
        let mut tape = Tape::new(&self.store, Mode::Eval, 0);
        let out = self.trace(&mut tape, batch)?;
        let logits = tape.value(out.logits).view().into_dimensionality::<Ix2>().unwrap();
        Ok(softmax_rows(logits))
    }

    /// Evaluation-mode activations at the named tap, `[batch, width]`.
    pub fn embedding(&self, batch: ArrayD<T>, tap: &str) -> Result<Array2<T>> {
        let mut tape = Tape::new(&self.store, Mode::Eval, 0);
        let out = self.trace(&mut tape, batch)?;
        let (_, id) = out
            .taps
            .iter()
            .find(|(name, _)| name == tap)
            .ok_or_else(|| Error::contract(format!("{} has no tap `{tap}`", self.descriptor.label())))?;
        tape.value(*id)
            .view()
            .into_dimensionality::<Ix2>()
            .map(|v| v.to_owned())
            .map_err(|_| Error::contract(format!("tap `{tap}` is not a flat feature vector")))
    }
}

/// Rebuild a freshly initialized network from its descriptor.
pub fn build_network(descriptor: &ModelDescriptor, seed: u64) -> Result<Network> {
    match descriptor {
        ModelDescriptor::Inception(spec) => build_inception_net(spec, seed),
        ModelDescriptor::Backbone { name } => Ok(backbones::build_backbone_generic(*name, seed)),
        ModelDescriptor::Mlp {
            input_dim,
            hidden,
            dropout,
        } => build_mlp(*input_dim, hidden, *dropout, seed),
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows<T: Scalar>(logits: ndarray::ArrayView2<T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Stack spectrograms into an `[n, 1, bins, frames]` batch.
pub fn spectrogram_batch(items: &[&Spectrogram]) -> Result<ArrayD<f32>> {
    let first = items.first().ok_or_else(|| Error::contract("empty spectrogram batch"))?;
    let (h, w) = first.kind().shape();
    let mut out = ndarray::Array4::<f32>::zeros((items.len(), 1, h, w));
    for (i, s) in items.iter().enumerate() {
        if s.kind() != first.kind() {
            return Err(Error::contract("mixed spectrogram kinds in one batch"));
        }
        out.index_axis_mut(Axis(0), i).index_axis_mut(Axis(0), 0).assign(s.values());
    }
    Ok(out.into_dyn())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax_rows(Array2::<f64>::zeros((2, 4)).view());
        assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_survives_large_logits() {
        let p = softmax_rows(array![[1000.0f32, 0.0, -1000.0, 999.0]].view());
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.sum() - 1.0).abs() < 1e-6);
    }
}
