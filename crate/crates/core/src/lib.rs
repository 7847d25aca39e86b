//! Multi-vision attention networks (MvANet) for four-class fruit grading.
//!
//! The crate is organised bottom-up:
//!
//! - [`ops`] and [`layers`]: NCHW tensor primitives with hand-written
//!   backward passes (convolution, batch norm, PReLU, pooling, fully
//!   connected, sigmoid gating, channel concatenation, softmax loss).
//! - [`arch`]: channel-plan arithmetic, the composite blocks and the
//!   assembled model with dense wiring between visual layers.
//! - [`train`]: He initialization, SGD with momentum, the step schedule,
//!   augmentation and the epoch loop.
//! - [`data`]: manifests, image decoding and normalization, the synthetic
//!   dataset generator and the `MVAN` weights format.
//! - [`eval`]: confusion matrices, per-fruit grading and latency benchmarks.
//! - [`verify`]: finite-difference, channel-plan and parameter-count suites.
//!
//! Every kernel is generic over [`Real`], so the same code runs in `f32` for
//! training and in `f64` for reference gradient checks.

pub mod arch;
pub mod data;
mod error;
pub mod eval;
pub mod layers;
pub mod ops;
mod parallel;
mod param;
mod real;
mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use parallel::with_threads;
pub use param::{Param, ParamKind};
pub use real::Real;
pub use tensor::Tensor;

/// Forward-pass mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Batch statistics, running-stat updates, activations saved for backward.
    Train,
    /// Running statistics, no side effects.
    Eval,
}
