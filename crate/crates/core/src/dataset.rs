//! Labelled scans joined with their feature vectors.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::labels::ScanLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: ScanLabel,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.features.len());
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: s.features.len(),
                });
            }
            if !seen.insert(s.label.scan_id.as_str()) {
                return Err(Error::DataMismatch(format!(
                    "duplicate scan id {}",
                    s.label.scan_id
                )));
            }
        }
        Ok(Self { dim, samples })
    }

    /// Joins labels with a feature table keyed by scan id. Output follows label order.
    pub fn join(labels: Vec<ScanLabel>, features: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut table: HashMap<String, Vec<f64>> = HashMap::with_capacity(features.len());
        for (id, f) in features {
            if table.insert(id.clone(), f).is_some() {
                return Err(Error::DataMismatch(format!("duplicate feature row for scan {id}")));
            }
        }
        let mut missing = Vec::new();
        let mut samples = Vec::with_capacity(labels.len());
        for label in labels {
            match table.remove(&label.scan_id) {
                Some(features) => samples.push(Sample { label, features }),
                None => missing.push(label.scan_id),
            }
        }
        if !missing.is_empty() {
            return Err(Error::DataMismatch(format!(
                "no features for scans: {}",
                missing.join(", ")
            )));
        }
        Self::new(samples)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels(&self) -> impl Iterator<Item = &ScanLabel> {
        self.samples.iter().map(|s| &s.label)
    }

    /// Distinct patient ids in order of first appearance.
    pub fn patient_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.samples
            .iter()
            .filter(|s| seen.insert(s.label.patient_id.as_str()))
            .map(|s| s.label.patient_id.clone())
            .collect()
    }

    /// Samples whose patient is in `patients`, preserving order.
    pub fn subset(&self, patients: &[String]) -> Self {
        let keep: HashSet<&str> = patients.iter().map(String::as_str).collect();
        Self {
            dim: self.dim,
            samples: self
                .samples
                .iter()
                .filter(|s| keep.contains(s.label.patient_id.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn mean_t_d(&self) -> Option<f64> {
        if self.samples.is_empty() {
            None
        } else {
            Some(self.samples.iter().map(|s| s.label.t_d).sum::<f64>() / self.samples.len() as f64)
        }
    }

    pub fn scans(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.samples
            .iter()
            .map(|s| (s.label.scan_id.as_str(), s.features.as_slice()))
    }
}
