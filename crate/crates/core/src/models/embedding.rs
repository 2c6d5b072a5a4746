//! Embedding providers: frozen extractors that turn spectrograms into
//! fixed-width vectors for the MLP head.
//!
//! A pretrained-checkpoint adapter only has to implement
//! [`EmbeddingProvider`]: report the spectrogram kind it consumes, its output
//! width, and map a batch to a `[batch, dim]` matrix deterministically.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{spectrogram_batch, Network};
use crate::error::{Error, Result};
use crate::features::{Spectrogram, SpectrogramKind};

pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier written into manifests.
    fn id(&self) -> String;
    fn input_kind(&self) -> SpectrogramKind;
    fn dim(&self) -> usize;
    fn embed(&self, batch: &[&Spectrogram]) -> Result<Array2<f32>>;
}

fn check_kind(provider: &dyn EmbeddingProvider, batch: &[&Spectrogram]) -> Result<()> {
    if let Some(s) = batch.iter().find(|s| s.kind() != provider.input_kind()) {
        return Err(Error::contract(format!(
            "{} embeds {} spectrograms, got {}",
            provider.id(),
            provider.input_kind(),
            s.kind()
        )));
    }
    Ok(())
}

/// Deterministic stand-in for a pretrained extractor.
///
/// Pools each log-mel bin over time (mean and standard deviation, 256
/// statistics), centers them, and applies a fixed Gaussian projection.
#[derive(Debug, Clone)]
pub struct FixtureEmbeddingProvider {
    projection: Array2<f32>,
    seed: u64,
}

const FIXTURE_STATS: usize = 256;

impl FixtureEmbeddingProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("embedding width must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (FIXTURE_STATS as f32).sqrt();
        let projection = Array2::from_shape_simple_fn((FIXTURE_STATS, dim), || {
            let z: f32 = StandardNormal.sample(&mut rng);
            z * scale
        });
        Ok(Self { projection, seed })
    }

    fn stats(s: &Spectrogram) -> Array1<f32> {
        let v = s.values();
        let mean = v.mean_axis(Axis(1)).expect("non-empty time axis");
        let std = v.std_axis(Axis(1), 0.0);
        let mut out = Array1::zeros(FIXTURE_STATS);
        let n = mean.len();
        out.slice_mut(ndarray::s![..n]).assign(&mean);
        out.slice_mut(ndarray::s![n..2 * n]).assign(&std);
        let centre = out.mean().unwrap_or(0.0);
        out.slice_mut(ndarray::s![..n]).mapv_inplace(|m| m - centre);
        out
    }
}

impl EmbeddingProvider for FixtureEmbeddingProvider {
    fn id(&self) -> String {
        format!("fixture-{}-{}", self.dim(), self.seed)
    }

    fn input_kind(&self) -> SpectrogramKind {
        SpectrogramKind::LogMel
    }

    fn dim(&self) -> usize {
        self.projection.ncols()
    }

    fn embed(&self, batch: &[&Spectrogram]) -> Result<Array2<f32>> {
        check_kind(self, batch)?;
        let mut stats = Array2::zeros((batch.len(), FIXTURE_STATS));
        for (mut row, s) in stats.axis_iter_mut(Axis(0)).zip(batch) {
            row.assign(&Self::stats(s));
        }
        Ok(stats.dot(&self.projection))
    }
}

/// Fixture provider shaped like a pretrained global-pooling embedding.
pub fn fixture_embedding_provider(dim: usize, seed: u64) -> Result<FixtureEmbeddingProvider> {
    FixtureEmbeddingProvider::new(dim, seed)
}

/// Reads a named tap of a trained network as a frozen embedding.
pub struct NetworkTapProvider {
    net: Network,
    tap: String,
    dim: usize,
    kind: SpectrogramKind,
}

impl NetworkTapProvider {
    pub fn new(net: Network, tap: &str) -> Result<Self> {
        let kind = match net.input_contract() {
            super::InputContract::Spectrogram { kind } => kind,
            super::InputContract::Vector { .. } => {
                return Err(Error::contract("tap providers need a spectrogram network"))
            }
        };
        let dim = net
            .taps()
            .into_iter()
            .find(|t| t.name == tap)
            .map(|t| t.width)
            .ok_or_else(|| Error::contract(format!("{} has no tap `{tap}`", net.descriptor().label())))?;
        Ok(Self {
            net,
            tap: tap.to_string(),
            dim,
            kind,
        })
    }
}

impl EmbeddingProvider for NetworkTapProvider {
    fn id(&self) -> String {
        format!("{}:{}", self.net.descriptor().label(), self.tap)
    }

    fn input_kind(&self) -> SpectrogramKind {
        self.kind
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, batch: &[&Spectrogram]) -> Result<Array2<f32>> {
        check_kind(self, batch)?;
        if batch.is_empty() {
            return Ok(Array2::zeros((0, self.dim)));
        }
        self.net.embedding(spectrogram_batch(batch)?, &self.tap)
    }
}
