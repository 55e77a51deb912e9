//! Transformer model: configuration, parameters, both encoder variants,
//! the depth-adaptive decoder and checkpoint serialization.

pub mod blocks;
pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod encoder;
pub mod params;

pub use config::{ModelConfig, Variant};
pub use decoder::{concat_forward, decode, DecodeMode};
pub use encoder::{context_unit_forward, encode, EncoderOutput};
pub use params::Params;
