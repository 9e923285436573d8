//! Minimal reverse-mode layer library.
//!
//! Layers keep their parameters in [`Tensor`]s and expose explicit
//! `forward`/`backward` pairs; backward accumulates into `Tensor::grad` and
//! returns the gradient with respect to the layer input. Everything is
//! generic over [`Scalar`] so models train in `f32` while the
//! finite-difference oracle in [`gradcheck`] runs the same code in `f64`.

mod adam;
pub mod checkpoint;
mod conv;
mod embedding;
mod encoder;
pub mod gradcheck;
mod linear;
pub mod loss;
mod lstm;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState, LrSchedule};
pub use conv::Conv1d;
pub use embedding::Embedding;
pub use encoder::{accumulate_gradients, accumulate_gradients_with, BiLstmHead, BiLstmHeadCache, ConvBiLstm, ConvBiLstmCache};
pub use linear::Linear;
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};
pub use tensor::{tanh_backward, tanh_forward, Mat, Parameterized, Tensor};

use crate::io::FormatError;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` constant into the working scalar.
#[inline]
pub fn sc<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 is representable in every Scalar")
}

#[inline]
pub fn f64_of<F: Scalar>(x: F) -> f64 {
    x.to_f64().expect("Scalar converts to f64")
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("gradient check failed: {0}")]
    GradCheck(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

impl NnError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, NnError::NonFinite(_) | NnError::GradCheck(_))
    }
}

pub type NnResult<T> = std::result::Result<T, NnError>;
