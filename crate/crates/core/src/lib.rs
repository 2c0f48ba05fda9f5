//! Privacy-preserving mechanisms for text embeddings and a simulated-attacker
//! harness for measuring how much demographic information they leak.

pub mod data;
pub mod error;
pub mod experiments;
pub mod mechanisms;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod vector;

pub use error::{Error, Result};
pub use rng::RandomSource;
pub use vector::{distance, normalize_minmax, Embedding, Metric};
