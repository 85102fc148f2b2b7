//! Browser demo. Each operation is a plain function returning JSON so it can
//! be tested natively; the `wasm_bindgen` wrappers at the bottom expose them
//! to the page in `www/`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cfpt_core::config::ExperimentConfig;
use cfpt_core::eval::{self, cohort_km, KmStep, RocPoint, ScatterPoint, ThresholdRow};
use cfpt_core::labels::derive_cohort_labels;
use cfpt_core::loss::{crl, crl_grad};
use cfpt_core::model::{run_crossval, ModelConfig, TrainConfig};
use cfpt_core::synth::{cohort_summary, generate_cohort, CohortConfig, CohortSummary};
use cfpt_core::{Dataset, LossConfig, Result};

#[derive(Debug, Serialize)]
pub struct LossCurve {
    pub t_pred: Vec<f64>,
    pub loss: Vec<f64>,
    pub grad: Vec<f64>,
}

/// Loss and gradient of the censored regression loss over `[lo, hi]`.
pub fn loss_curve(t_d: f64, cancer: bool, epsilon: f64, lo: f64, hi: f64, points: usize) -> Result<LossCurve> {
    let points = points.clamp(2, 2000);
    let mut out = LossCurve {
        t_pred: Vec::with_capacity(points),
        loss: Vec::with_capacity(points),
        grad: Vec::with_capacity(points),
    };
    for i in 0..points {
        let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        out.t_pred.push(t);
        out.loss.push(crl(t, t_d, cancer, epsilon)?);
        out.grad.push(crl_grad(t, t_d, cancer, epsilon)?);
    }
    Ok(out)
}

fn demo_cohort(n_patients: usize, dropout_prob: f64, seed: u64) -> CohortConfig {
    CohortConfig {
        n_patients,
        dropout_prob,
        seed,
        ..ExperimentConfig::reference().cohort
    }
}

#[derive(Debug, Serialize)]
pub struct CohortView {
    pub summary: CohortSummary,
    pub km: Vec<KmStep>,
    pub median: Option<f64>,
}

/// Simulates a cohort and returns its Kaplan-Meier curve.
pub fn cohort_view(n_patients: usize, dropout_prob: f64, seed: u64) -> Result<CohortView> {
    let cohort = generate_cohort(&demo_cohort(n_patients, dropout_prob, seed))?;
    let labels = derive_cohort_labels(&cohort.records)?;
    let km = cohort_km(&labels)?;
    Ok(CohortView {
        summary: cohort_summary(&cohort.records)?,
        median: km.median(),
        km: km.steps,
    })
}

#[derive(Debug, Serialize)]
pub struct ModeResult {
    pub auc: f64,
    pub roc: Vec<RocPoint>,
}

#[derive(Debug, Serialize)]
pub struct TrainView {
    pub scans: usize,
    pub single: ModeResult,
    pub multi: ModeResult,
    pub mcnemar_p: f64,
    pub thresholds: Vec<ThresholdRow>,
    pub scatter: Vec<ScatterPoint>,
}

/// Three-fold cross-validation of a small network in both modes on one
/// simulated cohort. Region analysis uses the multi-task predictions.
pub fn train_view(n_patients: usize, lambda: f64, epochs: usize, seed: u64) -> Result<TrainView> {
    let cohort = generate_cohort(&demo_cohort(n_patients, 0.45, seed))?;
    let labels = derive_cohort_labels(&cohort.records)?;
    let data = Dataset::join(labels.clone(), cohort.features)?;
    let mcfg = ModelConfig {
        input_dim: data.dim(),
        hidden_dims: vec![16, 16],
        seed,
        init_regression_bias: true,
    };
    let epochs = epochs.clamp(1, 200);
    let run = |lambda: f64| {
        let tcfg = TrainConfig {
            max_epochs: epochs,
            lr_decay_epochs: vec![epochs / 3, epochs / 2, 2 * epochs / 3],
            seed,
            loss: LossConfig {
                lambda,
                ..LossConfig::default()
            },
            ..TrainConfig::default()
        };
        run_crossval(&data, &mcfg, &tcfg, 3)
            .map(|out| out.predictions.into_iter().map(|p| p.prediction).collect::<Vec<_>>())
    };
    let single = run(0.0)?;
    let multi = run(lambda)?;
    let report_single = eval::evaluate(&single, &labels, None, &eval::DEFAULT_THRESHOLDS, 0.5)?;
    let report = eval::evaluate(&multi, &labels, Some(&single), &eval::DEFAULT_THRESHOLDS, 0.5)?;
    let pairs = eval::report::align(&multi, &labels)?;
    Ok(TrainView {
        scans: report.n_scans,
        single: ModeResult {
            auc: report_single.auc,
            roc: report_single.roc,
        },
        multi: ModeResult {
            auc: report.auc,
            roc: report.roc,
        },
        mcnemar_p: report.comparison.map_or(1.0, |c| c.mcnemar.p_value),
        thresholds: report.threshold_table,
        scatter: eval::report::scatter(&pairs),
    })
}

fn to_js<T: Serialize>(value: Result<T>) -> std::result::Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = lossCurve)]
pub fn loss_curve_js(t_d: f64, cancer: bool, epsilon: f64) -> std::result::Result<String, JsError> {
    to_js(loss_curve(t_d, cancer, epsilon, -5.0, 10.0, 301))
}

#[wasm_bindgen(js_name = cohortView)]
pub fn cohort_view_js(n_patients: usize, dropout_prob: f64, seed: u64) -> std::result::Result<String, JsError> {
    to_js(cohort_view(n_patients, dropout_prob, seed))
}

#[wasm_bindgen(js_name = trainView)]
pub fn train_view_js(n_patients: usize, lambda: f64, epochs: usize, seed: u64) -> std::result::Result<String, JsError> {
    to_js(train_view(n_patients, lambda, epochs, seed))
}
