//! Two-headed feed-forward predictor, optimiser, training loop, and
//! patient-level cross-validation.

pub mod adam;
pub mod crossval;
pub mod mlp;
pub mod snapshot;
pub mod train;

pub use adam::Adam;
pub use crossval::{crossval_split, derive_seed, run_crossval, CrossvalOutput, FoldAssignment, FoldPrediction};
pub use mlp::{Mlp, ModelConfig, Workspace};
pub use train::{dataset_loss, train, EpochRecord, TrainConfig, TrainHistory};
