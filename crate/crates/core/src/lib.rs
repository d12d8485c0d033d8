//! Zero-shot rigid part assembly driven by a point-cloud denoiser.
//!
//! A misposed multi-part cloud is noised at a small diffusion step, denoised
//! once, and each part is rigidly aligned to its slice of the estimate. The
//! loop repeats until the parts settle.

pub mod assembler;
pub mod baselines;
pub mod datagen;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;

pub use error::{Error, Result};
