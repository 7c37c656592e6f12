//! Straggler-resilient alternating least squares on a simulated cluster.
//!
//! The crate factors a dense matrix `R ≈ U Vᵀ` by running the ALS inner
//! products through a polynomial code: each worker receives algebraically
//! encoded blocks, and the master recovers every per-iteration product from
//! any large-enough subset of responses, so slow or silent workers never
//! stall an iteration.
//!
//! Module map:
//! - [`linalg`]: dense matrices, block splitting, inversion, serialization.
//! - [`epc`]: the polynomial encode/decode layer and recovery thresholds.
//! - [`als`]: the factorization protocol (baseline, coded iteration,
//!   pre/post computation).
//! - [`cluster`]: discrete-event worker simulation and runtime estimates.
//! - [`analysis`]: partition selection and cost model formulas.

pub mod als;
pub mod analysis;
pub mod cluster;
pub mod epc;
pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub use linalg::Matrix;
