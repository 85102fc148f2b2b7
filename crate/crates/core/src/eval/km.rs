use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub time: f64,
    /// At risk just before `time`.
    pub n_risk: usize,
    pub n_events: usize,
    /// Censored exactly at `time` (still counted at risk).
    pub n_censored: usize,
    pub survival: f64,
}

/// Product-limit survival curve. Steps exist only at event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
    pub n_total: usize,
    pub n_events: usize,
}

impl KmCurve {
    /// `S(t)`, right-continuous; 1 before the first event.
    pub fn survival_at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|s| s.time <= t)
            .last()
            .map_or(1.0, |s| s.survival)
    }

    /// First time at which `S(t) <= 0.5`.
    pub fn median(&self) -> Option<f64> {
        self.steps.iter().find(|s| s.survival <= 0.5).map(|s| s.time)
    }
}

/// Kaplan-Meier estimate. `event[i] = true` is an observed event, `false`
/// right-censoring. At tied times events are counted before censorings.
pub fn km_estimate(times: &[f64], event: &[bool]) -> Result<KmCurve> {
    if times.len() != event.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: event.len(),
        });
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "survival times must be finite and non-negative, got {t}"
        )));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk = times.len();
    let mut survival = 1.0;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0;
        while j < order.len() && times[order[j]] == t {
            if event[order[j]] {
                d += 1;
            }
            j += 1;
        }
        let group = j - i;
        if d > 0 {
            // (n - d) / n rather than 1 - d / n: exact for the small-integer cases.
            survival = survival * (at_risk - d) as f64 / at_risk as f64;
            steps.push(KmStep {
                time: t,
                n_risk: at_risk,
                n_events: d,
                n_censored: group - d,
                survival,
            });
        }
        at_risk -= group;
        i = j;
    }
    Ok(KmCurve {
        n_total: times.len(),
        n_events: event.iter().filter(|&&e| e).count(),
        steps,
    })
}
