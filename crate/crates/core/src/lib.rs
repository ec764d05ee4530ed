//! Wavelet-domain spatial/channel attention super-resolution on a small
//! self-contained tensor engine.
//!
//! ```no_run
//! use mlcraist::{checkpoint, image_io, MlCraist, ModelConfig};
//! # fn main() -> mlcraist::Result<()> {
//! let model = MlCraist::new(ModelConfig::lite(2), 0)?;
//! let lr = image_io::load_rgb("low.png".as_ref())?;
//! let sr = model.forward(&lr)?;
//! image_io::save_rgb("high.png".as_ref(), &sr)?;
//! checkpoint::save(&model, "model.ckpt".as_ref())?;
//! # Ok(())
//! # }
//! ```

pub mod blocks;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod image_io;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod param;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod wavelet;

pub use error::{Error, Result};
pub use model::{Ablation, MlCraist, ModelConfig};
pub use param::{Param, ParamId, ParamStore};
pub use tape::{Tape, Var};
pub use tensor::{Shape, Tensor};
pub use wavelet::{dwt2_haar, dwt2_multilevel, idwt2_haar, SubBandSet};
