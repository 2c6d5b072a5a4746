//! Minimal reverse-mode autodiff engine for the convolutional and dense
//! networks in this crate.
//!
//! Activations are NCHW (`[batch, channels, height, width]`) or `[batch,
//! features]` arrays. A [`Tape`] records one forward pass over a borrowed
//! [`ParamStore`]; [`Tape::backward`] returns parameter gradients which an
//! optimizer such as [`Adam`] applies to the store afterwards. Parameters are
//! never copied onto the tape, so large heads stay cheap to step.

mod kernels;
mod optim;
mod params;
mod tape;

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use optim::{Adam, AdamConfig};
pub use params::{Param, ParamBuilder, ParamId, ParamKind, ParamStore};
pub use tape::{Gradients, Mode, NodeId, Padding, Tape};

/// Floating-point element type usable by the engine (`f32` or `f64`).
pub trait Scalar:
    LinalgScalar
    + Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
