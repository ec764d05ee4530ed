//! Differentiable building blocks: local context, spatial/channel
//! self-attention, spatial gating, sub-band fusion and cross attention.
//!
//! Every block follows the same pattern: a constructor that registers its
//! parameters through a [`ParamBuilder`], and a `forward` that records onto a
//! [`Tape`](crate::tape::Tape). Output projections start at zero so fresh
//! blocks reduce to their residual path.

mod afb;
mod cab;
mod esa;
mod layers;
mod lcb;
mod scatb;

pub use afb::{Afb, AfbAttention, AfbMode};
pub use cab::{Cab, Fuse};
pub use esa::{Esa, MIN_SIDE as ESA_MIN_SIDE};
pub use layers::{Conv2d, ParamBuilder, Projection};
pub use lcb::Lcb;
pub use scatb::{OsaTrace, Scatb, ScatbStack};
