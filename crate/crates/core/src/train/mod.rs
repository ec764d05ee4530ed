//! L1 training with Adam, the paired-patch data pipeline, and evaluation
//! helpers.

pub mod adam;
pub mod data;
pub mod loss;
pub mod schedule;
mod trainer;

pub use adam::{adam_step, adam_step_all, AdamConfig};
pub use data::{augment, compose, degrade, inverse_code, transform, Dataset, Provenance, SamplePair};
pub use loss::l1;
pub use schedule::{default_period, lr_at};
pub use trainer::{train, StepRecord, TrainConfig, TrainReport};
