//! Respiratory-sound anomaly classification on ICBHI-style recordings.
//!
//! Respiratory cycles are cut from annotated recordings, normalized to 10 s
//! at 32 kHz and turned into wavelet scalograms (124 × 154) or log-mel
//! spectrograms (128 × 1000). Three frameworks classify them into Normal,
//! Crackle, Wheeze or Both:
//!
//! 1. inception networks trained from scratch on scalograms ([`models::build_inception_net`]),
//! 2. benchmark backbones trained from scratch ([`models::build_backbone`]),
//! 3. an MLP head over frozen embeddings ([`models::EmbeddingProvider`], [`models::build_mlp_head`]).
//!
//! Training minimizes KL divergence plus L2 ([`train`]); frameworks are
//! combined by embedding concatenation or by the product rule ([`fusion`]);
//! results are scored by specificity, sensitivity and their mean ([`metrics`]).
//! [`pipeline`] drives the whole lifecycle from an experiment config.

pub mod augment;
pub mod dataio;
pub mod error;
pub mod features;
pub mod fusion;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
