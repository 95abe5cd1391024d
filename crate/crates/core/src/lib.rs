//! Pairwise augmented GAN laboratory: a small reverse-mode autodiff engine,
//! the generator/encoder/discriminator networks, the augmented pair game and
//! its f-divergence and Wasserstein variants, a training loop, reconstruction
//! and sample-quality metrics, and discrete oracles for the underlying theory.

pub mod augment;
pub mod data_io;
pub mod error;
pub mod metrics;
pub mod nets;
pub mod objectives;
pub mod oracle;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
