//! Sequence-classification engine for multi-level video features: SRU
//! recurrence with an LSTM baseline, temporal-pooling softmax heads, late
//! score fusion, a deterministic training loop, and an architecture
//! complexity calculus. Everything runs on a single CPU core; correctness is
//! anchored by gradient checks and scan-equivalence oracles rather than GPU
//! parity.

pub mod bench;
pub mod checkpoint;
pub mod complexity;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod head;
pub mod init;
pub mod lstm;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sru;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
