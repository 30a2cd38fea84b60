//! Position-zero attention sink laboratory.
//!
//! A small instrumented pre-norm decoder transformer, an analytic builder for
//! the two-block position-zero sink circuit, Monte Carlo validators for the
//! cone mixing model and RMSNorm stability, and the diagnostics used to watch
//! sinks form during training (sink rate, norm profiles, cosine clustering,
//! head ablation, stage classification).
//!
//! Oracles run in `f64`. Model forward and training run in `f32`, but every
//! model routine is generic over [`numerics::Real`] so gradient checks can use
//! `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod circuit;
pub mod conemodel;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};

/// Hex SHA-256 of a serializable value's compact JSON form.
pub fn json_digest<T: serde::Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(bytes))
}
