//! Miniature transformer encoder for token classification with per-head
//! gates and a boolean head mask.

mod batch;
pub mod checkpoint;
mod config;
mod mask;
mod model;

pub use batch::Batch;
pub use config::{ArchConfig, ModelConfig};
pub use mask::{HeadCoord, HeadMask};
pub use model::{EncoderModel, ForwardPass};
