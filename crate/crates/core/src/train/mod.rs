//! KL-divergence training with L2 regularization and Adam.
//!
//! The per-batch objective is `KL(y ‖ ŷ) + (λ/2)·‖θ‖²`, where the
//! divergence is averaged over the batch by default ([`Reduction`]) and `θ`
//! covers convolution and dense weights and biases (normalization scale,
//! shift and running statistics are excluded).
//!
//! Training is deterministic for a given [`TrainConfig::seed`]: shuffling,
//! augmentation and dropout each draw from their own named substream.

mod loss;

use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayD, ArrayView2, Axis, Ix2};
use rand::seq::SliceRandom;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use loss::{kl_divergence, kl_logit_gradient, kl_loss, kl_loss_reduced, Reduction, PROB_CLAMP};

use crate::augment::{AugmentConfig, SoftLabel};
use crate::error::{Error, Result};
use crate::features::Spectrogram;
use crate::models::{build_mlp_head, softmax_rows, spectrogram_batch, EmbeddingProvider, InputContract, Network};
use crate::nn::{Adam, AdamConfig, Mode, ParamId, Scalar, Tape};
use crate::seed::{subseed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_reg: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub reduction: Reduction,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 100,
            lambda_reg: 1e-4,
            learning_rate: 1e-4,
            seed: 0,
            optimizer: Optimizer::Adam,
            reduction: Reduction::Mean,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Config(format!("lambda_reg {} must be non-negative", self.lambda_reg)));
        }
        Ok(())
    }
}

/// Mean per-batch objective over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub kl: f64,
    pub reg: f64,
    pub seconds: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn total_steps(&self) -> usize {
        self.epochs.iter().map(|e| e.steps).sum()
    }

    /// CSV with header `epoch,loss,kl,reg,seconds`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "loss", "kl", "reg", "seconds"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.loss.to_string(),
                e.kl.to_string(),
                e.reg.to_string(),
                format!("{:.3}", e.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Objective components of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub kl: f64,
    pub reg: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.kl + self.reg
    }
}

/// Loss, parameter gradients and pending running-statistic updates for one
/// batch.
pub struct StepOutput<T> {
    pub parts: LossParts,
    pub grads: Vec<Option<ArrayD<T>>>,
    pub running: Vec<(ParamId, ArrayD<T>)>,
}

/// Forward and backward pass of the regularized objective on one batch.
pub fn loss_and_gradients<T: Scalar>(
    net: &Network<T>,
    batch: ArrayD<T>,
    targets: ArrayView2<f64>,
    lambda_reg: f64,
    reduction: Reduction,
    mode: Mode,
    seed: u64,
) -> Result<StepOutput<T>> {
    let mut tape = Tape::new(net.store(), mode, seed);
    let out = net.trace(&mut tape, batch)?;
    let logits = tape
        .value(out.logits)
        .view()
        .into_dimensionality::<Ix2>()
        .map_err(|_| Error::contract("logits must be [batch, classes]"))?
        .mapv(|v| v.to_f64().unwrap_or(f64::NAN));
    let probs = softmax_rows(logits.view());
    let kl = kl_divergence(targets, probs.view())? * reduction.scale(targets.nrows());
    let theta = net.store().decay_sq_norm();
    let parts = LossParts {
        kl,
        reg: 0.5 * lambda_reg * theta,
    };
    let seed_grad = kl_logit_gradient(targets, probs.view(), reduction)?.mapv(T::of).into_dyn();
    let mut grads = tape.backward(vec![(out.logits, seed_grad)])?.into_params();
    let running = tape.take_running_updates();
    drop(tape);

    if lambda_reg > 0.0 {
        let lam = T::of(lambda_reg);
        grads.resize_with(net.store().len(), || None);
        for (id, p) in net.store().iter() {
            if !p.kind.decays() {
                continue;
            }
            let slot = &mut grads[id.index()];
            match slot {
                Some(g) => g.zip_mut_with(&p.value, |g, &w| *g += lam * w),
                None => *slot = Some(p.value.mapv(|w| lam * w)),
            }
        }
    }
    Ok(StepOutput { parts, grads, running })
}

/// Called after every epoch with its statistics and the current weights;
/// returning `Break` ends training early.
pub type EpochHook<'h, T> = dyn FnMut(&EpochStats, &Network<T>) -> ControlFlow<()> + 'h;

/// A hook that never stops training.
pub fn run_all_epochs<T: Scalar>(_: &EpochStats, _: &Network<T>) -> ControlFlow<()> {
    ControlFlow::Continue(())
}

/// Supplies a batch (inputs and soft targets) for the given example indices.
type BatchFn<'f, T> = dyn FnMut(&[usize], &mut ChaCha8Rng) -> Result<(ArrayD<T>, Array2<f64>)> + 'f;

fn fit<T: Scalar>(
    net: &mut Network<T>,
    n: usize,
    cfg: &TrainConfig,
    make_batch: &mut BatchFn<'_, T>,
    augment_seed: u64,
    hook: &mut EpochHook<'_, T>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::contract("training set is empty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = substream(cfg.seed, "shuffle");
    let mut augment = substream(cfg.seed, &format!("augment/{augment_seed}"));
    let mut dropout = substream(cfg.seed, "dropout");
    let mut adam = Adam::new(AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    });
    let mut history = TrainHistory::default();
    let mut steps = 0;
    'epochs: for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle);
        let (mut kl_sum, mut reg_sum, mut batches) = (0.0, 0.0, 0);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let (x, y) = make_batch(idx, &mut augment)?;
            let step = loss_and_gradients(
                net,
                x,
                y.view(),
                cfg.lambda_reg,
                cfg.reduction,
                Mode::Train,
                dropout.next_u64(),
            )?;
            if !step.parts.total().is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    kl: step.parts.kl,
                    reg: step.parts.reg,
                });
            }
            let store = net.store_mut();
            for (id, v) in step.running {
                *store.value_mut(id) = v;
            }
            adam.step(store, &step.grads);
            kl_sum += step.parts.kl;
            reg_sum += step.parts.reg;
            batches += 1;
            steps += 1;
        }
        if batches == 0 {
            break 'epochs;
        }
        let stats = EpochStats {
            epoch,
            loss: (kl_sum + reg_sum) / batches as f64,
            kl: kl_sum / batches as f64,
            reg: reg_sum / batches as f64,
            seconds: started.elapsed().as_secs_f64(),
            steps: batches,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} (kl {:.5}, reg {:.5}) in {:.1}s",
            stats.loss,
            stats.kl,
            stats.reg,
            stats.seconds
        );
        let flow = hook(&stats, net);
        history.epochs.push(stats);
        if flow.is_break() {
            break 'epochs;
        }
    }
    Ok(history)
}

/// A training example for spectrogram networks.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrogram {
    pub spectrogram: Spectrogram,
    pub label: SoftLabel,
}

fn targets(labels: impl Iterator<Item = SoftLabel>) -> Array2<f64> {
    let rows: Vec<SoftLabel> = labels.collect();
    Array2::from_shape_fn((rows.len(), 4), |(i, c)| rows[i].probs()[c])
}

/// Train a spectrogram network; see [`train_model_with`].
pub fn train_model(
    net: Network,
    train_set: &[LabeledSpectrogram],
    cfg: &TrainConfig,
    augment: &AugmentConfig,
) -> Result<(Network, TrainHistory)> {
    train_model_with(net, train_set, cfg, augment, &mut run_all_epochs)
}

/// Mini-batch Adam on the regularized KL objective, with augmentation
/// applied per batch and `hook` consulted after every epoch.
pub fn train_model_with(
    mut net: Network,
    train_set: &[LabeledSpectrogram],
    cfg: &TrainConfig,
    augment: &AugmentConfig,
    hook: &mut EpochHook<'_, f32>,
) -> Result<(Network, TrainHistory)> {
    if let Some(bad) = train_set
        .iter()
        .find(|e| InputContract::Spectrogram { kind: e.spectrogram.kind() } != net.input_contract())
    {
        return Err(Error::contract(format!(
            "{} cannot train on {} spectrograms",
            net.descriptor().label(),
            bad.spectrogram.kind()
        )));
    }
    let mut make_batch = |idx: &[usize], rng: &mut ChaCha8Rng| -> Result<(ArrayD<f32>, Array2<f64>)> {
        let items: Vec<(Spectrogram, SoftLabel)> = idx
            .iter()
            .map(|&i| (train_set[i].spectrogram.clone(), train_set[i].label))
            .collect();
        let items = if augment.is_disabled() { items } else { augment.apply_batch(items, rng)? };
        let refs: Vec<&Spectrogram> = items.iter().map(|(s, _)| s).collect();
        Ok((spectrogram_batch(&refs)?, targets(items.iter().map(|(_, y)| *y))))
    };
    let history = fit(&mut net, train_set.len(), cfg, &mut make_batch, augment.augment_seed, hook)?;
    Ok((net, history))
}

/// Train a vector-input network on rows of `x`.
pub fn train_on_vectors<T: Scalar>(
    mut net: Network<T>,
    x: ArrayView2<f32>,
    y: &[SoftLabel],
    cfg: &TrainConfig,
    hook: &mut EpochHook<'_, T>,
) -> Result<(Network<T>, TrainHistory)> {
    if x.nrows() != y.len() {
        return Err(Error::contract(format!("{} vectors but {} labels", x.nrows(), y.len())));
    }
    if net.input_contract() != (InputContract::Vector { dim: x.ncols() }) {
        return Err(Error::contract(format!(
            "{} does not accept {}-wide vectors",
            net.descriptor().label(),
            x.ncols()
        )));
    }
    let mut make_batch = |idx: &[usize], _: &mut ChaCha8Rng| -> Result<(ArrayD<T>, Array2<f64>)> {
        let rows = x.select(Axis(0), idx).mapv(|v| T::of(v as f64));
        Ok((rows.into_dyn(), targets(idx.iter().map(|&i| y[i]))))
    };
    let history = fit(&mut net, x.nrows(), cfg, &mut make_batch, 0, hook)?;
    Ok((net, history))
}

/// Build the embedding head for `x.ncols()` inputs and train it.
pub fn train_mlp_on_vectors(x: ArrayView2<f32>, y: &[SoftLabel], cfg: &TrainConfig) -> Result<(Network, TrainHistory)> {
    if x.nrows() == 0 {
        return Err(Error::contract("training set is empty"));
    }
    let head = build_mlp_head(x.ncols(), subseed(cfg.seed, "init"))?;
    train_on_vectors(head, x, y, cfg, &mut run_all_epochs)
}

/// Embed every training spectrogram once, then train the MLP head on the
/// cached vectors.
pub fn train_mlp_on_embeddings(
    provider: &dyn EmbeddingProvider,
    train_set: &[LabeledSpectrogram],
    cfg: &TrainConfig,
) -> Result<(Network, TrainHistory)> {
    if train_set.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    let x = embed_all(provider, train_set.iter().map(|e| &e.spectrogram))?;
    let y: Vec<SoftLabel> = train_set.iter().map(|e| e.label).collect();
    train_mlp_on_vectors(x.view(), &y, cfg)
}

/// Embed spectrograms in chunks, checking the provider's declared width.
pub fn embed_all<'s>(
    provider: &dyn EmbeddingProvider,
    items: impl Iterator<Item = &'s Spectrogram>,
) -> Result<Array2<f32>> {
    let items: Vec<&Spectrogram> = items.collect();
    let mut out = Array2::zeros((items.len(), provider.dim()));
    for (c, chunk) in items.chunks(32).enumerate() {
        let e = provider.embed(chunk)?;
        if e.dim() != (chunk.len(), provider.dim()) {
            return Err(Error::contract(format!(
                "{} returned {:?}, expected ({}, {})",
                provider.id(),
                e.dim(),
                chunk.len(),
                provider.dim()
            )));
        }
        out.slice_mut(ndarray::s![c * 32..c * 32 + chunk.len(), ..]).assign(&e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_mlp;
    use rand::{Rng, SeedableRng};

    fn random_simplex(rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
        let mut a = Array2::from_shape_simple_fn((rows, 4), || rng.random_range(0.01..1.0));
        for mut r in a.rows_mut() {
            let s = r.sum();
            r /= s;
        }
        a
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = build_mlp::<f64>(4, &[3], 0.0, 17).unwrap();
        let x = Array2::from_shape_simple_fn((5, 4), || rng.random_range(-1.0..1.0)).into_dyn();
        let y = random_simplex(&mut rng, 5);
        let lambda = 0.05;
        let step = loss_and_gradients(&net, x.clone(), y.view(), lambda, Reduction::Mean, Mode::Train, 0).unwrap();
        let ids: Vec<_> = net.store().iter().map(|(id, _)| id).collect();
        let h = 1e-6;
        for id in ids {
            let g = step.grads[id.index()].clone().unwrap();
            for k in 0..g.len() {
                let orig = net.store().value(id).as_slice().unwrap()[k];
                let mut eval = |v: f64| {
                    net.store_mut().value_mut(id).as_slice_mut().unwrap()[k] = v;
                    loss_and_gradients(&net, x.clone(), y.view(), lambda, Reduction::Mean, Mode::Eval, 0)
                        .unwrap()
                        .parts
                        .total()
                };
                let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
                eval(orig);
                let analytic = g.as_slice().unwrap()[k];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-4, "param {id:?}[{k}]: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn zero_epochs_leave_weights_untouched() {
        let net = build_mlp::<f32>(3, &[5], 0.1, 2).unwrap();
        let before = net.store().clone();
        let x = Array2::<f32>::ones((4, 3));
        let y = vec![SoftLabel::one_hot(crate::dataio::Label::Normal); 4];
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (after, hist) = train_on_vectors(net, x.view(), &y, &cfg, &mut run_all_epochs).unwrap();
        assert!(hist.epochs.is_empty());
        for ((_, a), (_, b)) in before.iter().zip(after.store().iter()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn history_components_add_up_and_runs_repeat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_simple_fn((12, 6), || rng.random_range(-1.0f32..1.0));
        let y: Vec<SoftLabel> = (0..12).map(|i| SoftLabel::one_hot(crate::dataio::Label::ALL[i % 4])).collect();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 5,
            learning_rate: 1e-3,
            seed: 9,
            ..TrainConfig::default()
        };
        let run = || {
            let net = build_mlp::<f32>(6, &[8], 0.2, 4).unwrap();
            train_on_vectors(net, x.view(), &y, &cfg, &mut run_all_epochs).unwrap().1
        };
        let (a, b) = (run(), run());
        assert_eq!(a.epochs.len(), 3);
        for (ea, eb) in a.epochs.iter().zip(&b.epochs) {
            assert!((ea.loss - (ea.kl + ea.reg)).abs() < 1e-6);
            assert_eq!((ea.loss, ea.kl, ea.reg), (eb.loss, eb.kl, eb.reg));
        }
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 4);
    }

    #[test]
    fn empty_and_mismatched_inputs_are_rejected() {
        let x = Array2::<f32>::zeros((0, 8));
        assert!(matches!(train_mlp_on_vectors(x.view(), &[], &TrainConfig::default()), Err(Error::Contract(_))));
        let net = build_mlp::<f32>(3, &[4], 0.0, 0).unwrap();
        let x = Array2::<f32>::zeros((2, 5));
        let y = vec![SoftLabel::one_hot(crate::dataio::Label::Wheeze); 2];
        assert!(train_on_vectors(net, x.view(), &y, &TrainConfig::default(), &mut run_all_epochs).is_err());
    }
}
