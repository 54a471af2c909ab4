//! Hate-speech classification over cached sentence embeddings: dataset
//! ingestion, embedding caches, a small f64 autodiff-free neural kernel,
//! five classifier variants, training/evaluation and error analysis.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod io;
pub mod kernel;
pub mod parallel;
pub mod pipeline;
pub mod synthetic;
pub mod train;
pub mod zoo;

pub use error::{Error, Result};
