//! Censored regression loss, binary cross entropy, and their joint objective.
//!
//! The censored regression loss (CRL) penalises a predicted cancer-free
//! progression time `t_pred` against the defined time `t_d` in one of three
//! ways, selected by the patient cancer flag `p` and margin `epsilon`:
//!
//! | case                     | loss                                  |
//! |--------------------------|---------------------------------------|
//! | `p = 0`                  | `min(0, t_pred - t_d - eps)^2`        |
//! | `p = 1`, `t_d > eps`     | `(t_pred - t_d + eps)^2`              |
//! | `p = 1`, `t_d <= eps`    | `max(0, t_pred - t_d + eps)^2`        |
//!
//! Note that the middle case regresses toward `t_d - eps`, not `t_d`: a model
//! trained on it predicts times shifted down by the margin for cancer scans.
//!
//! All three branches are convex and continuously differentiable in `t_pred`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::labels::ScanLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the regression term in the joint objective.
    pub lambda: f64,
    /// CRL margin in years.
    pub epsilon: f64,
    /// Probabilities are clamped to `[prob_clamp, 1 - prob_clamp]` before the log.
    pub prob_clamp: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            epsilon: 1.0,
            prob_clamp: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "loss.epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "loss.lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return Err(Error::Config(format!(
                "loss.prob_clamp must lie in (0, 0.5), got {}",
                self.prob_clamp
            )));
        }
        Ok(())
    }
}

/// Model output for one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scan_id: String,
    /// Malignancy probability.
    pub y_hat: f64,
    /// Predicted cancer-free progression time in years.
    pub t_pred: f64,
}

/// Which branch of the CRL applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrlCase {
    /// Right-censored: only under-prediction is penalised.
    Censored,
    /// Cancer, diagnosis comfortably ahead: two-sided regression.
    Regress,
    /// Cancer, diagnosis within the margin or past: only over-prediction is penalised.
    Imminent,
}

pub fn crl_case(t_d: f64, p: bool, epsilon: f64) -> CrlCase {
    if !p {
        CrlCase::Censored
    } else if t_d > epsilon {
        CrlCase::Regress
    } else {
        CrlCase::Imminent
    }
}

/// Signed residual whose square (after the case clamp) is the loss.
fn crl_residual(t_pred: f64, t_d: f64, p: bool, epsilon: f64) -> Result<f64> {
    ensure_finite("t_pred", t_pred)?;
    ensure_finite("t_d", t_d)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(match crl_case(t_d, p, epsilon) {
        CrlCase::Censored => (t_pred - t_d - epsilon).min(0.0),
        CrlCase::Regress => t_pred - t_d + epsilon,
        CrlCase::Imminent => (t_pred - t_d + epsilon).max(0.0),
    })
}

/// Censored regression loss.
pub fn crl(t_pred: f64, t_d: f64, p: bool, epsilon: f64) -> Result<f64> {
    let r = crl_residual(t_pred, t_d, p, epsilon)?;
    Ok(r * r)
}

/// Derivative of [`crl`] with respect to `t_pred`.
pub fn crl_grad(t_pred: f64, t_d: f64, p: bool, epsilon: f64) -> Result<f64> {
    Ok(2.0 * crl_residual(t_pred, t_d, p, epsilon)?)
}

fn clamp_prob(y_hat: f64, prob_clamp: f64) -> f64 {
    y_hat.clamp(prob_clamp, 1.0 - prob_clamp)
}

/// Binary cross entropy on a clamped probability.
pub fn cel(y_hat: f64, y: bool, prob_clamp: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y_hat) {
        return Err(Error::InvalidArgument(format!(
            "y_hat must lie in [0, 1], got {y_hat}"
        )));
    }
    let q = clamp_prob(y_hat, prob_clamp);
    Ok(if y { -q.ln() } else { -(1.0 - q).ln() })
}

/// Like [`cel`] but takes the label as a number; rejects anything but 0 or 1.
pub fn cel_numeric(y_hat: f64, y: f64, prob_clamp: f64) -> Result<f64> {
    if y == 0.0 {
        cel(y_hat, false, prob_clamp)
    } else if y == 1.0 {
        cel(y_hat, true, prob_clamp)
    } else {
        Err(Error::InvalidArgument(format!("label must be 0 or 1, got {y}")))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Derivative of cross entropy composed with the sigmoid, w.r.t. the logit.
pub fn cel_grad_logit(logit: f64, y: bool) -> Result<f64> {
    ensure_finite("logit", logit)?;
    Ok(sigmoid(logit) - if y { 1.0 } else { 0.0 })
}

/// `lambda * crl + cel` for one scan.
pub fn joint_loss(pred: &Prediction, label: &ScanLabel, cfg: &LossConfig) -> Result<f64> {
    let c = cel(pred.y_hat, label.y, cfg.prob_clamp)?;
    if cfg.lambda == 0.0 {
        return Ok(c);
    }
    let r = crl(pred.t_pred, label.t_d, label.p, cfg.epsilon)?;
    Ok(cfg.lambda * r + c)
}

/// Mean joint loss over a batch. Predictions and labels must align by scan id.
pub fn batch_loss(preds: &[Prediction], labels: &[ScanLabel], cfg: &LossConfig) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for (pred, label) in preds.iter().zip(labels) {
        if pred.scan_id != label.scan_id {
            return Err(Error::DataMismatch(format!(
                "prediction {} paired with label {}",
                pred.scan_id, label.scan_id
            )));
        }
        total += joint_loss(pred, label, cfg)?;
    }
    Ok(total / preds.len() as f64)
}
