//! Minimal differentiable layer library for the fusion network.
//!
//! Every layer is a pair of free functions: a forward pass and a backward
//! pass that takes the upstream gradient and whatever the forward pass
//! needed to keep. There is no autodiff graph; the fusion network wires the
//! backward passes by hand.

mod adam;
pub mod gradcheck;
mod init;
mod layers;
mod loss;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use init::{he_init, he_init_with_fan_in};
pub use layers::{
    concat_channels, conv2d, conv2d_backward, deconv2, deconv2_backward, maxpool2,
    maxpool2_backward, relu, relu_backward, softmax_channels, softmax_channels_backward,
    split_channels, ConvGrads, PoolIndices,
};
pub use loss::{balanced_ce_loss, batch_balanced_ce_loss, BatchLoss, LossTerms, PROB_CLAMP};
pub use params::{Param, ParamKind, ParamStore};
pub use tensor::{Scalar, Shape, Tensor};
