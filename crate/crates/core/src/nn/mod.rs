//! A small from-scratch neural network: dense and 3x3 convolution layers
//! with hand-written backward passes over batched row-major tensors.

mod checkpoint;
mod net;
mod ops;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use net::{
    DecoderCache, EncoderCache, Layout, NetConfig, Network, PredictorCache, PredictorLayout,
    ACTION_INPUTS,
};
pub use ops::{
    tanh_backward, to_interleaved, to_planar, upsample2, upsample2_backward, Conv3, Dense, Scalar,
};
