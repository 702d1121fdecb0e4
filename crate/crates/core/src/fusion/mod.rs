//! Encoder-decoder fusion network: N candidate masks in, a two-class
//! probability map out.
//!
//! The encoder has five stages of 3x3 convolutions with ReLU, each followed
//! by 2x2 max pooling. The decoder mirrors it: every step upsamples with a
//! stride-2 transposed convolution, concatenates the encoder feature map of
//! the same resolution (taken before pooling) and reduces back to that
//! stage's width with a 3x3 convolution and ReLU. A final 3x3 convolution
//! produces two logits per pixel, followed by a channel softmax.

mod checkpoint;
mod network;
mod train;

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use network::{backward, build_network, forward, forward_cached, import_encoder, ForwardCache, NetConfig, STAGES};
pub use train::{
    mask_from_probs, masks_to_input, predict_mask, train, TrainConfig, Trainer, TrainingSample,
};
