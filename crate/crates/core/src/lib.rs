//! Censored multi-task learning of scan malignancy and cancer-free
//! progression time (CFPT).
//!
//! - [`labels`] turns censored patient timelines into per-scan targets.
//! - [`loss`] holds the censored regression loss, cross entropy, and the joint objective.
//! - [`model`] trains a two-headed feed-forward predictor under patient-level cross-validation.
//! - [`synth`] simulates censored screening cohorts with a learnable time-to-onset signal.
//! - [`eval`] computes ROC/AUC, McNemar, Kaplan-Meier, and the predicted-vs-observed time regions.
//! - [`io`], [`config`] and [`cli`] wire these into file-based experiments.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod labels;
pub mod loss;
pub mod model;
pub mod synth;

pub use dataset::{Dataset, Sample};
pub use error::{Error, Result};
pub use labels::{derive_scan_labels, effective_biopsy_time, validate_record, PatientRecord, ScanLabel};
pub use loss::{LossConfig, Prediction};
