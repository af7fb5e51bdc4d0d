//! Learning permutation-equivariant wireless resource-allocation policies.
//!
//! The crate bundles the optimal label oracles (water-filling, WMMSE,
//! caching water-filling), seeded dataset generation, the joint sample
//! ranking transform, a small feed-forward network stack with dense and
//! permutation-equivariant layers, the supervised training protocol, and
//! the experiment driver that compares the three learning variants.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod experiment;
pub mod neural;
pub mod oracles;
pub mod orderstats;
pub mod ranking;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
