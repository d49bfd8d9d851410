//! Instruction-data synthesis by cross-task interpolation in embedding
//! space, diversity selection via K-Means, and a small built-in model
//! trained on the selected soft-labeled pool.

pub mod artifacts;
pub mod config;
pub mod corpus;
pub mod diversity;
pub mod embedder;
pub mod error;
pub mod interpolator;
pub mod pipeline;
pub mod projection;
pub mod seed;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
