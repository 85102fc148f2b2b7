//! Synthetic censored screening cohorts.
//!
//! Each patient carries a baseline risk vector `x ~ N(0, I)`. The latent risk
//! score `r = w . x` (with `w` the unit vector along the all-ones direction)
//! scales a Weibull onset time:
//!
//! ```text
//! T_onset = onset_scale * exp(-risk_coeff * r) * (-ln U)^(1 / onset_shape)
//! ```
//!
//! Scans follow a fixed schedule `0, dt, 2 dt, ...` up to the study horizon,
//! cut short by a per-scan dropout probability. Cancer is diagnosed at the
//! first realised scan at or after onset; patients whose onset falls past
//! their last scan are right-censored non-cancer patients. Scheduled scans
//! continue after diagnosis until the horizon or dropout.
//!
//! Per-scan features are `x` followed by one progression channel,
//! `gain * max(0, 1 - (T_onset - t) / horizon) + noise`, which is pure noise
//! for patients whose onset lies beyond the horizon.
//!
//! The cohort structure beyond these rules (feature distribution, dropout
//! model, Weibull onset) is invented for testing and carries no clinical
//! meaning.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{derive_scan_labels, PatientRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub cancer_fraction_target: f64,
    /// Dimension of the baseline risk vector; scans get one extra channel.
    pub feature_dim: usize,
    pub scan_interval: f64,
    pub study_horizon: f64,
    pub dropout_prob: f64,
    pub onset_scale: f64,
    pub onset_shape: f64,
    pub risk_coeff: f64,
    pub progression_gain: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_patients: 1433,
            cancer_fraction_target: 0.26,
            feature_dim: 8,
            scan_interval: 1.0,
            study_horizon: 6.0,
            dropout_prob: 0.35,
            onset_scale: 12.0,
            onset_shape: 1.5,
            risk_coeff: 0.8,
            progression_gain: 1.5,
            noise_sd: 0.5,
            seed: 0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_patients == 0 {
            return fail("cohort.n_patients must be at least 1".into());
        }
        if !(self.scan_interval > 0.0 && self.scan_interval.is_finite()) {
            return fail(format!("cohort.scan_interval must be positive, got {}", self.scan_interval));
        }
        if !(self.study_horizon >= self.scan_interval && self.study_horizon.is_finite()) {
            return fail("cohort.study_horizon must be at least scan_interval".into());
        }
        if !(self.onset_shape > 0.0 && self.onset_scale > 0.0) {
            return fail("cohort.onset_shape and onset_scale must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return fail(format!("cohort.dropout_prob must lie in [0, 1), got {}", self.dropout_prob));
        }
        if !(self.cancer_fraction_target > 0.0 && self.cancer_fraction_target < 1.0) {
            return fail("cohort.cancer_fraction_target must lie in (0, 1)".into());
        }
        if !(self.noise_sd >= 0.0 && self.risk_coeff.is_finite() && self.progression_gain.is_finite()) {
            return fail("cohort.noise_sd must be non-negative and coefficients finite".into());
        }
        if self.feature_dim == 0 {
            return fail("cohort.feature_dim must be at least 1".into());
        }
        Ok(())
    }

    /// Number of scans a patient without dropout receives.
    pub fn full_schedule_len(&self) -> usize {
        (self.study_horizon / self.scan_interval + 1e-9).floor() as usize + 1
    }
}

/// Evaluation-only ground truth for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetTruth {
    pub patient_id: String,
    pub onset_time: f64,
    pub risk_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub records: Vec<PatientRecord>,
    /// `(scan_id, features)` in record/scan order.
    pub features: Vec<(String, Vec<f64>)>,
    pub truth: Vec<OnsetTruth>,
}

impl Cohort {
    pub fn feature_width(&self) -> usize {
        self.features.first().map_or(0, |f| f.1.len())
    }
}

pub fn generate_cohort(cfg: &CohortConfig) -> Result<Cohort> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = 1.0 / (cfg.feature_dim as f64).sqrt();
    let width = (cfg.n_patients.max(1) as f64).log10().floor() as usize + 1;
    let max_scans = cfg.full_schedule_len();

    let mut records = Vec::with_capacity(cfg.n_patients);
    let mut features = Vec::new();
    let mut truth = Vec::with_capacity(cfg.n_patients);

    for i in 0..cfg.n_patients {
        let patient_id = format!("P{i:0width$}");
        let x: Vec<f64> = (0..cfg.feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let risk_score: f64 = x.iter().sum::<f64>() * w;
        let u: f64 = rng.random();
        let scale = cfg.onset_scale * (-cfg.risk_coeff * risk_score).exp();
        let onset = scale * (-(1.0 - u).ln()).powf(1.0 / cfg.onset_shape);

        let mut n_scans = 1;
        while n_scans < max_scans {
            let drop: f64 = rng.random();
            if drop < cfg.dropout_prob {
                break;
            }
            n_scans += 1;
        }
        let scan_times: Vec<f64> = (0..n_scans).map(|k| k as f64 * cfg.scan_interval).collect();
        let diagnosis_time = scan_times.iter().copied().find(|&t| t >= onset);
        let record = PatientRecord::new(
            patient_id.clone(),
            scan_times,
            diagnosis_time.is_some(),
            diagnosis_time,
        );

        for (scan_id, &t) in record.scan_ids.iter().zip(&record.scan_times) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let ramp = if onset <= cfg.study_horizon {
                cfg.progression_gain * (1.0 - (onset - t) / cfg.study_horizon).max(0.0)
            } else {
                0.0
            };
            let mut f = x.clone();
            f.push(ramp + cfg.noise_sd * noise);
            features.push((scan_id.clone(), f));
        }
        truth.push(OnsetTruth {
            patient_id,
            onset_time: onset,
            risk_score,
        });
        records.push(record);
    }
    Ok(Cohort {
        records,
        features,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub patients: usize,
    pub scans: usize,
    pub cancer_patients: usize,
    pub malignant_scans: usize,
    pub cancer_fraction: f64,
    /// Fraction of patients right-censored (non-cancer).
    pub censoring_rate: f64,
    pub mean_scans_per_patient: f64,
    /// Scan count -> number of patients with that many scans.
    pub scans_per_patient: BTreeMap<usize, usize>,
}

pub fn cohort_summary(records: &[PatientRecord]) -> Result<CohortSummary> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("empty cohort".into()));
    }
    let mut scans = 0;
    let mut malignant = 0;
    let mut cancer = 0;
    let mut hist = BTreeMap::new();
    for r in records {
        let labels = derive_scan_labels(r)?;
        scans += labels.len();
        malignant += labels.iter().filter(|l| l.y).count();
        cancer += usize::from(r.is_cancer);
        *hist.entry(labels.len()).or_insert(0) += 1;
    }
    let n = records.len() as f64;
    Ok(CohortSummary {
        patients: records.len(),
        scans,
        cancer_patients: cancer,
        malignant_scans: malignant,
        cancer_fraction: cancer as f64 / n,
        censoring_rate: (records.len() - cancer) as f64 / n,
        mean_scans_per_patient: scans as f64 / n,
        scans_per_patient: hist,
    })
}

/// Bisects `onset_scale` (log scale) until the simulated cancer fraction hits
/// `cfg.cancer_fraction_target` within `tol`. The fraction is monotone in the
/// scale for a fixed seed because the onset is drawn by inverse transform.
pub fn calibrate_onset_scale(cfg: &CohortConfig, tol: f64) -> Result<f64> {
    cfg.validate()?;
    let fraction = |scale: f64| -> Result<f64> {
        let c = generate_cohort(&CohortConfig {
            onset_scale: scale,
            ..cfg.clone()
        })?;
        Ok(c.records.iter().filter(|r| r.is_cancer).count() as f64 / c.records.len() as f64)
    };
    let (mut lo, mut hi) = (1e-2f64.ln(), 1e4f64.ln());
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = fraction(mid.exp())?;
        if (f - cfg.cancer_fraction_target).abs() <= tol {
            return Ok(mid.exp());
        }
        // Larger scale -> later onset -> fewer cancers.
        if f > cfg.cancer_fraction_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Undefined(format!(
        "could not reach cancer fraction {} within {tol}",
        cfg.cancer_fraction_target
    )))
}
