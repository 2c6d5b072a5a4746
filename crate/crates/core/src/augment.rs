//! Spectrogram augmentation: mixup with soft labels, and band masking.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{Error, Result};
use crate::features::{Spectrogram, SpectrogramKind};
use crate::models::NUM_CLASSES;

/// Probability vector over (Normal, Crackle, Wheeze, Both).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel([f64; NUM_CLASSES]);

impl SoftLabel {
    /// Checks entries lie in [0, 1] and sum to 1 within 1e-6.
    pub fn new(probs: [f64; NUM_CLASSES]) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::contract(format!("{probs:?} is not a probability vector")));
        }
        Ok(Self(probs))
    }

    pub fn one_hot(label: Label) -> Self {
        let mut p = [0.0; NUM_CLASSES];
        p[label.index()] = 1.0;
        Self(p)
    }

    pub fn probs(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        (1..NUM_CLASSES).fold(0, |best, i| if self.0[i] > self.0[best] { i } else { best })
    }
}

impl From<Label> for SoftLabel {
    fn from(l: Label) -> Self {
        SoftLabel::one_hot(l)
    }
}

/// Convex combination `lam·(x1, y1) + (1 − lam)·(x2, y2)`.
pub fn mixup_pair(
    x1: &Spectrogram,
    y1: &SoftLabel,
    x2: &Spectrogram,
    y2: &SoftLabel,
    lam: f64,
) -> Result<(Spectrogram, SoftLabel)> {
    if x1.kind() != x2.kind() {
        return Err(Error::contract("mixup of different spectrogram kinds"));
    }
    if !(0.0..=1.0).contains(&lam) {
        return Err(Error::contract(format!("mixup weight {lam} outside [0, 1]")));
    }
    let mu = 1.0 - lam;
    let mut values = x1.values().clone();
    values.zip_mut_with(x2.values(), |a, &b| *a = (lam * *a as f64 + mu * b as f64) as f32);
    let mut probs = [0.0; NUM_CLASSES];
    for (c, p) in probs.iter_mut().enumerate() {
        *p = lam * y1.0[c] + mu * y2.0[c];
    }
    Ok((Spectrogram::new(values, x1.kind())?, SoftLabel(probs)))
}

/// Draw a mixup weight from Beta(alpha, alpha).
pub fn sample_mixup_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::Config(format!("mixup alpha {alpha}: {e}")))?;
    Ok(beta.sample(rng))
}

/// Replace `time_masks` bands of exactly `time_width` frames and `freq_masks`
/// bands of exactly `freq_width` bins with the input's mean value. Band
/// positions are uniform and fully determined by `rng_seed`.
pub fn spec_augment(
    x: &Spectrogram,
    time_masks: usize,
    time_width: usize,
    freq_masks: usize,
    freq_width: usize,
    rng_seed: u64,
) -> Result<Spectrogram> {
    let (bins, frames) = x.values().dim();
    if time_width >= frames || freq_width >= bins {
        return Err(Error::contract(format!(
            "mask widths ({time_width} frames, {freq_width} bins) must be below {frames} × {bins}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let fill = x.mean();
    let mut values: Array2<f32> = x.values().clone();
    if time_width > 0 {
        for _ in 0..time_masks {
            let t0 = rng.random_range(0..=frames - time_width);
            values.slice_mut(s![.., t0..t0 + time_width]).fill(fill);
        }
    }
    if freq_width > 0 {
        for _ in 0..freq_masks {
            let f0 = rng.random_range(0..=bins - freq_width);
            values.slice_mut(s![f0..f0 + freq_width, ..]).fill(fill);
        }
    }
    Spectrogram::new(values, x.kind())
}

/// Augmentation settings as stored in experiment configs.
///
/// During training each example gets masks whose widths are drawn uniformly
/// from `0..=time_width` / `0..=freq_width`; `mixup_alpha = 0` or zero mask
/// counts disable the respective method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub mixup_alpha: f64,
    pub time_masks: usize,
    pub time_width: usize,
    pub freq_masks: usize,
    pub freq_width: usize,
    pub augment_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::for_kind(SpectrogramKind::LogMel)
    }
}

impl AugmentConfig {
    /// About 10% occlusion per axis: 100 frames / 16 bins on log-mel input,
    /// scaled to the wavelet grid.
    pub fn for_kind(kind: SpectrogramKind) -> Self {
        let (bins, frames) = kind.shape();
        Self {
            mixup_alpha: 0.4,
            time_masks: 1,
            time_width: frames / 10,
            freq_masks: 1,
            freq_width: 16 * bins / 128,
            augment_seed: 0,
        }
    }

    pub fn disabled() -> Self {
        Self {
            mixup_alpha: 0.0,
            time_masks: 0,
            time_width: 0,
            freq_masks: 0,
            freq_width: 0,
            augment_seed: 0,
        }
    }

    pub fn is_disabled(&self) -> bool {
        self.mixup_alpha <= 0.0 && (self.time_masks == 0 || self.time_width == 0) && (self.freq_masks == 0 || self.freq_width == 0)
    }

    /// Mask each example, then mix it with a random in-batch partner.
    pub fn apply_batch<R: Rng + ?Sized>(
        &self,
        batch: Vec<(Spectrogram, SoftLabel)>,
        rng: &mut R,
    ) -> Result<Vec<(Spectrogram, SoftLabel)>> {
        let mut out = Vec::with_capacity(batch.len());
        for (x, y) in batch {
            let (bins, frames) = x.values().dim();
            let tw = rng.random_range(0..=self.time_width.min(frames - 1));
            let fw = rng.random_range(0..=self.freq_width.min(bins - 1));
            let seed = rng.random();
            out.push((spec_augment(&x, self.time_masks, tw, self.freq_masks, fw, seed)?, y));
        }
        if self.mixup_alpha > 0.0 && out.len() > 1 {
            let mut partner: Vec<usize> = (0..out.len()).collect();
            partner.shuffle(rng);
            let source = out.clone();
            for (i, item) in out.iter_mut().enumerate() {
                let lam = sample_mixup_lambda(self.mixup_alpha, rng)?;
                let (x2, y2) = &source[partner[i]];
                *item = mixup_pair(&source[i].0, &source[i].1, x2, y2, lam)?;
            }
        }
        Ok(out)
    }
}
