//! Spectrogram front ends for 10-second cycles at the pipeline rate.
//!
//! Two kinds are produced:
//!
//! * [`SpectrogramKind::LogMel`]: 128 mel bins × 1000 frames, the input the
//!   transfer-learning extractors expect.
//! * [`SpectrogramKind::Wavelet`]: 124 scales × 154 frames, the input of the
//!   inception networks and the benchmark backbones.
//!
//! Front-end parameters (window, hop, mel range, wavelet family) are local
//! choices; only the output shapes are fixed. See [`logmel`] and
//! [`wavelet_scalogram`] for the exact settings.

mod cache;
mod logmel;
mod wavelet;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::{read_feature_file, write_feature_file, FeatureFile, FEATURE_FILE_VERSION};
pub use logmel::{logmel, logmel_with, mel_filterbank, LogMelConfig, MelFilterbank};
pub use wavelet::{wavelet_center_frequencies, wavelet_scalogram, wavelet_with, WaveletConfig};

/// Sample rate every clip is resampled to before feature extraction.
pub const PIPELINE_RATE: u32 = 32_000;
/// Cycle length after duration normalization.
pub const CYCLE_SECONDS: f64 = 10.0;
/// Floor added before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrogramKind {
    LogMel,
    Wavelet,
}

impl SpectrogramKind {
    /// `(freq_bins, time_frames)` required for this kind.
    pub const fn shape(self) -> (usize, usize) {
        match self {
            SpectrogramKind::LogMel => (128, 1000),
            SpectrogramKind::Wavelet => (124, 154),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            SpectrogramKind::LogMel => 1,
            SpectrogramKind::Wavelet => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(SpectrogramKind::LogMel),
            2 => Some(SpectrogramKind::Wavelet),
            _ => None,
        }
    }
}

impl fmt::Display for SpectrogramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrogramKind::LogMel => "logmel",
            SpectrogramKind::Wavelet => "wavelet",
        })
    }
}

impl FromStr for SpectrogramKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logmel" | "log-mel" | "log_mel" => Ok(SpectrogramKind::LogMel),
            "wavelet" => Ok(SpectrogramKind::Wavelet),
            other => Err(Error::Config(format!("unknown spectrogram kind `{other}`"))),
        }
    }
}

/// A time–frequency image, `[freq_bins, time_frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Array2<f32>,
    kind: SpectrogramKind,
}

impl Spectrogram {
    /// Wraps `values`, checking the kind's shape and that all values are finite.
    pub fn new(values: Array2<f32>, kind: SpectrogramKind) -> Result<Self> {
        if values.dim() != kind.shape() {
            return Err(Error::contract(format!(
                "{kind} spectrogram must be {:?}, got {:?}",
                kind.shape(),
                values.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract(format!("{kind} spectrogram contains non-finite values")));
        }
        Ok(Self { values, kind })
    }

    pub fn kind(&self) -> SpectrogramKind {
        self.kind
    }

    pub fn values(&self) -> &Array2<f32> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f32> {
        self.values
    }

    pub fn freq_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn time_frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn mean(&self) -> f32 {
        let n = self.values.len() as f64;
        (self.values.iter().map(|&v| v as f64).sum::<f64>() / n) as f32
    }
}

pub(crate) fn check_cycle_clip(clip: &crate::dataio::AudioClip) -> Result<()> {
    let expected = (CYCLE_SECONDS * PIPELINE_RATE as f64).round() as usize;
    if clip.sample_rate() != PIPELINE_RATE || clip.len() != expected {
        return Err(Error::contract(format!(
            "expected {expected} samples at {PIPELINE_RATE} Hz, got {} samples at {} Hz",
            clip.len(),
            clip.sample_rate()
        )));
    }
    Ok(())
}

/// Extract the spectrogram of the requested kind.
pub fn extract(clip: &crate::dataio::AudioClip, kind: SpectrogramKind) -> Result<Spectrogram> {
    match kind {
        SpectrogramKind::LogMel => logmel(clip),
        SpectrogramKind::Wavelet => wavelet_scalogram(clip),
    }
}
