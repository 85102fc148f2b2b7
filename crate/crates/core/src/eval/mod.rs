//! ROC/AUC, McNemar, Kaplan-Meier, and predicted-vs-observed time analysis.

pub mod km;
pub mod mcnemar;
pub mod regions;
pub mod report;
pub mod roc;

pub use km::{km_estimate, KmCurve, KmStep};
pub use mcnemar::{mcnemar, mcnemar_counts, McNemarMethod, McNemarResult};
pub use regions::{region_of, region_ratios, threshold_table, Region, RegionRatios, ThresholdRow};
pub use report::{cohort_km, evaluate, observed_axis, Comparison, EvalReport, ScatterPoint, DEFAULT_THRESHOLDS};
pub use roc::{roc_auc, RocPoint, RocResult};
