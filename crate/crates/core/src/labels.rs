//! Per-scan targets derived from censored patient timelines.
//!
//! Every scan gets a defined cancer-free progression time `t_d` (years), the
//! patient-level cancer flag `p`, and a scan-level malignancy label `y`:
//!
//! - non-cancer patients are right-censored one year after their last scan, so
//!   `t_d = last_scan - scan_time + 1` and `y = 0`;
//! - cancer patients measure `t_d = biopsy - scan_time` (negative for scans
//!   taken after diagnosis). The latest scan at or before the biopsy and every
//!   scan after it are malignant.
//!
//! A cancer patient without a recorded diagnosis time uses the last scan as
//! the biopsy time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw longitudinal events for one patient. Times are fractional years from
/// an arbitrary per-patient origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub scan_ids: Vec<String>,
    pub scan_times: Vec<f64>,
    pub is_cancer: bool,
    pub diagnosis_time: Option<f64>,
}

impl PatientRecord {
    /// Builds a record with scan ids `"{patient_id}_s{index}"`.
    pub fn new(
        patient_id: impl Into<String>,
        scan_times: Vec<f64>,
        is_cancer: bool,
        diagnosis_time: Option<f64>,
    ) -> Self {
        let patient_id = patient_id.into();
        let scan_ids = (0..scan_times.len())
            .map(|i| format!("{patient_id}_s{i}"))
            .collect();
        Self {
            patient_id,
            scan_ids,
            scan_times,
            is_cancer,
            diagnosis_time,
        }
    }

    pub fn last_scan_time(&self) -> Option<f64> {
        self.scan_times.last().copied()
    }
}

/// Training target for one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanLabel {
    pub scan_id: String,
    pub patient_id: String,
    /// Defined cancer-free progression time in years.
    pub t_d: f64,
    /// Patient is finally diagnosed with cancer.
    pub p: bool,
    /// Scan-level malignancy.
    pub y: bool,
    pub right_censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyScans,
    ScanCountMismatch { ids: usize, times: usize },
    NonFiniteTime { index: usize },
    NotStrictlyIncreasing { index: usize },
    DiagnosisForNonCancer,
    NonFiniteDiagnosis,
    EmptyPatientId,
    DuplicateScanId(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyScans => write!(f, "scan list is empty"),
            Violation::ScanCountMismatch { ids, times } => {
                write!(f, "{ids} scan ids for {times} scan times")
            }
            Violation::NonFiniteTime { index } => write!(f, "scan time {index} is not finite"),
            Violation::NotStrictlyIncreasing { index } => {
                write!(f, "scan_times not strictly increasing at index {index}")
            }
            Violation::DiagnosisForNonCancer => {
                write!(f, "diagnosis_time present for non-cancer patient")
            }
            Violation::NonFiniteDiagnosis => write!(f, "diagnosis_time is not finite"),
            Violation::EmptyPatientId => write!(f, "patient_id is empty"),
            Violation::DuplicateScanId(id) => write!(f, "duplicate scan id {id}"),
        }
    }
}

/// Lists every violated record invariant. An empty list means the record is valid.
pub fn validate_record(record: &PatientRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if record.patient_id.is_empty() {
        out.push(Violation::EmptyPatientId);
    }
    if record.scan_times.is_empty() {
        out.push(Violation::EmptyScans);
    }
    if record.scan_ids.len() != record.scan_times.len() {
        out.push(Violation::ScanCountMismatch {
            ids: record.scan_ids.len(),
            times: record.scan_times.len(),
        });
    }
    for (i, t) in record.scan_times.iter().enumerate() {
        if !t.is_finite() {
            out.push(Violation::NonFiniteTime { index: i });
        }
    }
    for (i, pair) in record.scan_times.windows(2).enumerate() {
        if pair[1] <= pair[0] {
            out.push(Violation::NotStrictlyIncreasing { index: i + 1 });
        }
    }
    let mut ids: Vec<&str> = record.scan_ids.iter().map(String::as_str).collect();
    ids.sort_unstable();
    for pair in ids.windows(2) {
        if pair[0] == pair[1] {
            out.push(Violation::DuplicateScanId(pair[0].to_string()));
        }
    }
    if let Some(dx) = record.diagnosis_time {
        if !record.is_cancer {
            out.push(Violation::DiagnosisForNonCancer);
        }
        if !dx.is_finite() {
            out.push(Violation::NonFiniteDiagnosis);
        }
    }
    out
}

fn check(record: &PatientRecord) -> Result<()> {
    let violations = validate_record(record);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidRecord {
            patient_id: record.patient_id.clone(),
            violations: violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        })
    }
}

/// Diagnosis time if recorded, otherwise the last scan time.
pub fn effective_biopsy_time(record: &PatientRecord) -> Result<f64> {
    if !record.is_cancer {
        return Err(Error::InvalidArgument(format!(
            "patient {} is not a cancer patient; no biopsy time is defined",
            record.patient_id
        )));
    }
    match record.diagnosis_time {
        Some(t) => Ok(t),
        None => record.last_scan_time().ok_or_else(|| Error::InvalidRecord {
            patient_id: record.patient_id.clone(),
            violations: Violation::EmptyScans.to_string(),
        }),
    }
}

/// One label per scan, in scan order.
pub fn derive_scan_labels(record: &PatientRecord) -> Result<Vec<ScanLabel>> {
    check(record)?;
    let make = |i: usize, t_d: f64, y: bool| ScanLabel {
        scan_id: record.scan_ids[i].clone(),
        patient_id: record.patient_id.clone(),
        t_d,
        p: record.is_cancer,
        y,
        right_censored: !record.is_cancer,
    };

    if !record.is_cancer {
        let last = record.scan_times[record.scan_times.len() - 1];
        return Ok(record
            .scan_times
            .iter()
            .enumerate()
            .map(|(i, &s)| make(i, (last - s) + 1.0, false))
            .collect());
    }

    let biopsy = effective_biopsy_time(record)?;
    // Scans are strictly increasing, so the latest scan not later than the
    // biopsy is the last index with time <= biopsy.
    let latest_before = record.scan_times.iter().rposition(|&s| s <= biopsy);
    Ok(record
        .scan_times
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let malignant = s > biopsy || Some(i) == latest_before;
            make(i, biopsy - s, malignant)
        })
        .collect())
}

/// Labels for a whole cohort, concatenated in record order.
pub fn derive_cohort_labels(records: &[PatientRecord]) -> Result<Vec<ScanLabel>> {
    let mut out = Vec::new();
    for record in records {
        out.extend(derive_scan_labels(record)?);
    }
    Ok(out)
}
