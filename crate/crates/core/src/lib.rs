//! Gradient-based attention-head importance ranking and head pruning for
//! cross-lingual sequence labeling, built on a small from-scratch
//! autodiff engine and transformer encoder.

pub mod autodiff;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod importance;
pub mod metrics;
pub mod oracles;
pub mod protocol;
pub mod runner;
pub mod seed;

pub use error::{Error, Result};
