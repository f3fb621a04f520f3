//! Multi-threshold spiking neuron kernel.
//!
//! Dense-tensor plumbing, multi-threshold neuron dynamics with learnable
//! temporal mixing, detached surrogate-gradient training, quantized-ANN
//! conversion, a lossless single-threshold reparameterization, and the
//! randomized oracle suites that pin the equivalences between all of the
//! above. Everything is deterministic under explicit seeds; trial batches
//! run data-parallel by default (`parallel` feature) with a sequential
//! fallback that produces identical output.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod neuron;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod qann;
pub mod refgrad;
pub mod reparam;
pub mod rng;
pub mod stbp;
pub mod tgim;

pub use error::{Error, Result};
