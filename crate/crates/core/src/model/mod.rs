//! The full super-resolution network.
//!
//! ```text
//! x ─ pad ─ head ─ SCATB×N ───────────────────────── fuse_full ─ tail ─ shuffle ─ crop ─(+)─ y
//!        └─ lhfib1 ─ f1 ───────── fuse_half ─ up ─────┘                                 │
//!              └ LL1 ─ lhfib2 ─ f2 ─ up ─┘                              x ─ bicubic ────┘
//! ```

mod config;
mod net;

pub use config::{Ablation, ModelConfig, MIN_INPUT_SIDE};
pub use net::{param_delta, tail_params, Lhfib, MlCraist, Network};
