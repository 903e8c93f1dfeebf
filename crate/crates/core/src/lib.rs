//! Convolution-transformer hybrid models for bio-signal transfer learning.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical part of
//! the workbench: signal preprocessing, mask sampling, a small reverse-mode
//! autograd engine, the model family (PatchTST, NLPatchTST, Ci, CiTrus),
//! masked auto-encoding pre-training, frequency-aligned fine-tuning and the
//! cross-validated evaluation protocol with its statistics.
//!
//! File formats, the CLI and report emission live in the `citrus-workbench`
//! crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod autograd;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod masking;
pub mod nn;
pub mod optim;
pub mod pretrain;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod synth;
pub mod tensor;
pub mod transfer;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
