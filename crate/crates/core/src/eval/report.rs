use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::km::{km_estimate, KmCurve};
use super::mcnemar::{mcnemar, McNemarResult};
use super::regions::{region_ratios, threshold_table, RegionRatios, ThresholdRow};
use super::roc::{roc_auc, RocPoint};
use crate::error::{Error, Result};
use crate::labels::ScanLabel;
use crate::loss::Prediction;

pub const DEFAULT_THRESHOLDS: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub auc_b: f64,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub mcnemar: McNemarResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_scans: usize,
    pub n_malignant: usize,
    pub n_cancer_scans: usize,
    pub auc: f64,
    pub operating_point: f64,
    pub accuracy: f64,
    pub mean_t_pred_cancer: Option<f64>,
    pub mean_t_pred_noncancer: Option<f64>,
    pub threshold_table: Vec<ThresholdRow>,
    pub cancer_regions: Vec<RegionRatios>,
    pub noncancer_regions: Vec<RegionRatios>,
    pub km: KmCurve,
    pub comparison: Option<Comparison>,
    pub roc: Vec<RocPoint>,
}

/// One scatter point of the region analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub scan_id: String,
    pub t_pred: f64,
    /// Defined CFPT for cancer scans, time to last scan otherwise.
    pub x: f64,
    pub cancer: bool,
}

/// Observed-time axis for the region analysis: `t_d` for cancer scans and
/// `t_d - 1` (time to last scan) for censored ones.
pub fn observed_axis(label: &ScanLabel) -> f64 {
    if label.p {
        label.t_d
    } else {
        label.t_d - 1.0
    }
}

/// Per-patient survival data at the earliest scan: time from first scan to
/// biopsy (event) or to the censoring bound one year after the last scan.
/// Negative times, possible only for diagnoses before the first scan, clamp to 0.
pub fn cohort_km(labels: &[ScanLabel]) -> Result<KmCurve> {
    let mut per_patient: BTreeMap<&str, (f64, bool)> = BTreeMap::new();
    for l in labels {
        let entry = per_patient
            .entry(l.patient_id.as_str())
            .or_insert((f64::NEG_INFINITY, l.p));
        entry.0 = entry.0.max(l.t_d);
    }
    let (times, events): (Vec<f64>, Vec<bool>) = per_patient
        .values()
        .map(|&(t, e)| (t.max(0.0), e))
        .unzip();
    km_estimate(&times, &events)
}

/// Pairs predictions with labels by scan id, sorted by scan id so every
/// derived quantity is independent of input order.
pub fn align<'a>(
    preds: &'a [Prediction],
    labels: &'a [ScanLabel],
) -> Result<Vec<(&'a Prediction, &'a ScanLabel)>> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.scan_id.as_str(), p).is_some() {
            return Err(Error::DataMismatch(format!("scan {} predicted twice", p.scan_id)));
        }
    }
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(labels.len());
    for l in labels {
        match by_id.remove(l.scan_id.as_str()) {
            Some(p) => pairs.push((p, l)),
            None => missing.push(l.scan_id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::DataMismatch(format!(
            "scans without predictions: {}",
            missing.join(", ")
        )));
    }
    if !by_id.is_empty() {
        let mut extra: Vec<&str> = by_id.into_keys().collect();
        extra.sort_unstable();
        return Err(Error::DataMismatch(format!(
            "predictions without labels: {}",
            extra.join(", ")
        )));
    }
    pairs.sort_by(|a, b| a.1.scan_id.cmp(&b.1.scan_id));
    Ok(pairs)
}

pub fn scatter(pairs: &[(&Prediction, &ScanLabel)]) -> Vec<ScatterPoint> {
    pairs
        .iter()
        .map(|(p, l)| ScatterPoint {
            scan_id: l.scan_id.clone(),
            t_pred: p.t_pred,
            x: observed_axis(l),
            cancer: l.p,
        })
        .collect()
}

fn correct(pairs: &[(&Prediction, &ScanLabel)], op: f64) -> Vec<bool> {
    pairs.iter().map(|(p, l)| (p.y_hat >= op) == l.y).collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Full evaluation of pooled predictions. A second prediction set adds a
/// paired McNemar comparison at `operating_point` (A = first set).
pub fn evaluate(
    preds: &[Prediction],
    labels: &[ScanLabel],
    preds_b: Option<&[Prediction]>,
    thresholds: &[f64],
    operating_point: f64,
) -> Result<EvalReport> {
    if !(operating_point > 0.0 && operating_point < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "operating point must lie in (0, 1), got {operating_point}"
        )));
    }
    let pairs = align(preds, labels)?;
    let scores: Vec<f64> = pairs.iter().map(|(p, _)| p.y_hat).collect();
    let ys: Vec<bool> = pairs.iter().map(|(_, l)| l.y).collect();
    let roc = roc_auc(&scores, &ys)?;

    let points = scatter(&pairs);
    let cancer: Vec<(f64, f64)> = points.iter().filter(|p| p.cancer).map(|p| (p.t_pred, p.x)).collect();
    let noncancer: Vec<(f64, f64)> = points.iter().filter(|p| !p.cancer).map(|p| (p.t_pred, p.x)).collect();
    let regions = |pts: &[(f64, f64)]| -> Result<Vec<RegionRatios>> {
        if pts.is_empty() {
            return Ok(Vec::new());
        }
        thresholds.iter().map(|&t| region_ratios(pts, t)).collect()
    };
    let table = if cancer.is_empty() || noncancer.is_empty() {
        Vec::new()
    } else {
        threshold_table(&cancer, &noncancer, thresholds)?
    };

    let sorted_labels: Vec<ScanLabel> = pairs.iter().map(|(_, l)| (*l).clone()).collect();
    let correct_a = correct(&pairs, operating_point);
    let comparison = match preds_b {
        None => None,
        Some(b) => {
            let pairs_b = align(b, labels)?;
            let scores_b: Vec<f64> = pairs_b.iter().map(|(p, _)| p.y_hat).collect();
            let correct_b = correct(&pairs_b, operating_point);
            let acc = |c: &[bool]| c.iter().filter(|&&v| v).count() as f64 / c.len() as f64;
            Some(Comparison {
                auc_b: roc_auc(&scores_b, &ys)?.auc,
                accuracy_a: acc(&correct_a),
                accuracy_b: acc(&correct_b),
                mcnemar: mcnemar(&correct_a, &correct_b)?,
            })
        }
    };

    Ok(EvalReport {
        n_scans: pairs.len(),
        n_malignant: ys.iter().filter(|&&y| y).count(),
        n_cancer_scans: cancer.len(),
        auc: roc.auc,
        operating_point,
        accuracy: correct_a.iter().filter(|&&v| v).count() as f64 / correct_a.len() as f64,
        mean_t_pred_cancer: mean(cancer.iter().map(|p| p.0)),
        mean_t_pred_noncancer: mean(noncancer.iter().map(|p| p.0)),
        threshold_table: table,
        cancer_regions: regions(&cancer)?,
        noncancer_regions: regions(&noncancer)?,
        km: cohort_km(&sorted_labels)?,
        comparison,
        roc: roc.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(scan: &str, patient: &str, t_d: f64, p: bool, y: bool) -> ScanLabel {
        ScanLabel {
            scan_id: scan.into(),
            patient_id: patient.into(),
            t_d,
            p,
            y,
            right_censored: !p,
        }
    }

    fn pred(scan: &str, y_hat: f64, t_pred: f64) -> Prediction {
        Prediction {
            scan_id: scan.into(),
            y_hat,
            t_pred,
        }
    }

    fn toy() -> (Vec<ScanLabel>, Vec<Prediction>) {
        let labels = vec![
            label("a0", "a", 2.0, true, false),
            label("a1", "a", 0.5, true, true),
            label("b0", "b", 3.0, false, false),
            label("b1", "b", 2.0, false, false),
            label("b2", "b", 1.0, false, false),
            label("c0", "c", 1.5, true, true),
        ];
        let preds = vec![
            pred("a0", 0.2, 1.0),
            pred("a1", 0.9, 0.0),
            pred("b0", 0.1, 6.0),
            pred("b1", 0.3, 4.5),
            pred("b2", 0.05, 3.5),
            pred("c0", 0.8, 0.4),
        ];
        (labels, preds)
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let (labels, preds) = toy();
        let r = evaluate(&preds, &labels, None, &DEFAULT_THRESHOLDS, 0.5).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.threshold_table.len(), 5);
        assert_eq!(r.n_scans, 6);
        assert_eq!(r.n_malignant, 2);
        assert_eq!(r.km.n_total, 3);
        assert_eq!(r.km.n_events, 2);
    }

    #[test]
    fn report_is_order_invariant() {
        let (mut labels, mut preds) = toy();
        let a = evaluate(&preds, &labels, None, &DEFAULT_THRESHOLDS, 0.5).unwrap();
        labels.reverse();
        preds.rotate_left(2);
        let b = evaluate(&preds, &labels, None, &DEFAULT_THRESHOLDS, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn swapping_comparison_swaps_counts() {
        let (labels, preds) = toy();
        let mut other = preds.clone();
        other[0].y_hat = 0.7; // wrong
        other[2].y_hat = 0.6; // wrong
        let ab = evaluate(&preds, &labels, Some(&other), &DEFAULT_THRESHOLDS, 0.5).unwrap();
        let ba = evaluate(&other, &labels, Some(&preds), &DEFAULT_THRESHOLDS, 0.5).unwrap();
        let (m1, m2) = (ab.comparison.unwrap().mcnemar, ba.comparison.unwrap().mcnemar);
        assert_eq!((m1.b, m1.c), (2, 0));
        assert_eq!((m2.b, m2.c), (0, 2));
        assert_eq!(m1.p_value, m2.p_value);
    }

    #[test]
    fn missing_predictions_are_listed() {
        let (labels, mut preds) = toy();
        preds.retain(|p| p.scan_id != "b1" && p.scan_id != "a0");
        let err = evaluate(&preds, &labels, None, &DEFAULT_THRESHOLDS, 0.5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("a0, b1"), "{msg}");
    }

    #[test]
    fn single_class_labels_fail() {
        let labels = vec![label("a", "a", 3.0, false, false), label("b", "b", 2.0, false, false)];
        let preds = vec![pred("a", 0.1, 1.0), pred("b", 0.2, 1.0)];
        assert!(matches!(
            evaluate(&preds, &labels, None, &DEFAULT_THRESHOLDS, 0.5),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn cohort_km_uses_baseline_scan() {
        let (labels, _) = toy();
        let km = cohort_km(&labels).unwrap();
        // a: event at 2, b: censored at 3, c: event at 1.5
        assert_eq!(km.steps.len(), 2);
        assert_eq!(km.steps[0].time, 1.5);
        assert_eq!(km.steps[1].time, 2.0);
        assert!((km.steps[1].survival - 1.0 / 3.0).abs() < 1e-12);
    }
}
