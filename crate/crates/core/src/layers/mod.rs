//! Differentiable layer kernels used by the two-stream network.

pub mod basic;
mod batchnorm;
mod conv;
mod conv_flat;
pub mod gradcheck;
mod loss;
mod pool;
mod reduce;

pub use basic::{
    dropout, dropout_backward, fully_connected, fully_connected_backward, gap, gap_backward, relu, relu_backward,
    FcGrads, FcParams,
};
pub use batchnorm::{
    batch_norm, batch_norm_backward, batch_norm_forward, BatchNormParams, BatchStats, BnCache, BnGrads, Mode,
    BN_EPSILON, BN_MOMENTUM,
};
pub use conv::{conv3d, conv3d_backward, conv3d_backward_opt, ConvGeometry, ConvGrads, ConvKernels};
pub use gradcheck::{finite_difference_check, GradCheckReport, LayerInput, LayerSpec};
pub use loss::{softmax, softmax_cross_entropy};
pub use pool::{maxpool3d, maxpool3d_backward, pooled_dims};
