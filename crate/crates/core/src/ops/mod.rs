//! Differentiable primitives (forward and backward) on NCHW tensors.

mod activation;
mod concat;
mod conv;
mod linear;
mod loss;
mod norm;
mod pool;

pub use activation::{prelu_backward, prelu_forward, sigmoid, sigmoid_backward};
pub use concat::{channel_scale, channel_scale_backward, concat_channels, split_channels};
pub use conv::{conv2d_backward, conv2d_direct, conv2d_forward, ConvGrads};
pub use linear::{fully_connected, fully_connected_backward, LinearGrads};
pub use loss::{softmax, softmax_cross_entropy};
pub use norm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use pool::{avg_pool_2x2, avg_pool_2x2_backward, global_avg_pool, global_avg_pool_backward};
