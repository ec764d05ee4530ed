//! Forward and backward kernels on plain [`Tensor`](crate::Tensor)s.
//!
//! These are the numerical building blocks; [`crate::tape`] wires them into
//! a differentiable graph.

pub mod conv;
pub mod elementwise;
pub(crate) mod gemm;
pub mod layout;
pub mod matmul;
pub mod pool;
pub mod resize;
pub mod softmax;

pub use conv::{conv2d_backward, conv2d_forward, ConvSpec};
pub use elementwise::{add, broadcast_shape, gelu, mul, relu, sigmoid};
pub use layout::{concat_channels, crop, pad_replicate, permute, pixel_shuffle, pixel_unshuffle, slice_channels, Windows};
pub use matmul::{matmul, matmul_ex};
pub use pool::max_pool2d;
pub use resize::{bicubic_resize, bilinear_resize, Filter, ResizePlan};
pub use softmax::softmax_last;
