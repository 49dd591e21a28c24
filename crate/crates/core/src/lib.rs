//! Coherence-constrained semi-supervised training of a pool of small
//! convolutional classifiers over appearance and shape representations of
//! face parts.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, image decoding and
//! the command line live in the `fercoh` companion crate.
//!
//! Layout:
//! - [`tensor`]: reverse-mode differentiation for the handful of layers the
//!   networks need, Adam, and a finite-difference gradient checker.
//! - [`repr`]: landmark geometry, appearance crops, shape sketches, occlusion.
//! - [`dataset`]: frame/sequence types, α/β label assignment, splits, class
//!   weights, and the synthetic corpus generator.
//! - [`model`]: CNN specs, the 15-network pool, frame prediction, ensemble.
//! - [`loss`]: weighted cross-entropy and the three coherence penalties.
//! - [`train`]: batching, the Adam training loop with early stopping, grid search.
//! - [`eval`]: voting, metrics, reports, occlusion study, timelines.
#![no_std]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod repr;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
