//! Quadrant analysis of predicted time against observed time.
//!
//! With `P` the predicted time, `X` the observed time (defined CFPT for cancer
//! scans, time to last scan for non-cancer scans) and threshold `T`:
//!
//! ```text
//!            X > T        X <= T
//! P >  T   region 1     region 4
//! P <= T   region 2     region 3
//! ```
//!
//! Points on the threshold fall on the `<=` side of either axis. "Recall" at
//! `T` is the region-3 fraction of all cancer scans (not a conditional
//! recall), and "non-cancer beyond threshold" is regions 1 + 4 of the
//! non-cancer scans, i.e. the fraction predicted past `T`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    R1,
    R2,
    R3,
    R4,
}

pub fn region_of(t_pred: f64, x: f64, threshold: f64) -> Region {
    match (t_pred > threshold, x > threshold) {
        (true, true) => Region::R1,
        (false, true) => Region::R2,
        (false, false) => Region::R3,
        (true, false) => Region::R4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRatios {
    pub threshold: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub counts: [usize; 4],
    pub n: usize,
}

/// Fractions of `(t_pred, x)` points in each region.
pub fn region_ratios(points: &[(f64, f64)], threshold: f64) -> Result<RegionRatios> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("region analysis needs at least one point".into()));
    }
    let mut counts = [0usize; 4];
    for &(p, x) in points {
        let idx = match region_of(p, x, threshold) {
            Region::R1 => 0,
            Region::R2 => 1,
            Region::R3 => 2,
            Region::R4 => 3,
        };
        counts[idx] += 1;
    }
    let n = points.len();
    let frac = |c: usize| c as f64 / n as f64;
    Ok(RegionRatios {
        threshold,
        r1: frac(counts[0]),
        r2: frac(counts[1]),
        r3: frac(counts[2]),
        r4: frac(counts[3]),
        counts,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub threshold: f64,
    /// Region-3 fraction of cancer scans.
    pub recall: f64,
    /// Region 1 + region 4 fraction of non-cancer scans.
    pub noncancer_beyond: f64,
}

pub fn threshold_table(
    cancer_points: &[(f64, f64)],
    noncancer_points: &[(f64, f64)],
    thresholds: &[f64],
) -> Result<Vec<ThresholdRow>> {
    if cancer_points.is_empty() || noncancer_points.is_empty() {
        return Err(Error::InvalidArgument(
            "threshold table needs both cancer and non-cancer points".into(),
        ));
    }
    thresholds
        .iter()
        .map(|&t| {
            if !t.is_finite() {
                return Err(Error::InvalidArgument(format!("threshold {t} is not finite")));
            }
            let c = region_ratios(cancer_points, t)?;
            let nc = region_ratios(noncancer_points, t)?;
            Ok(ThresholdRow {
                threshold: t,
                recall: c.r3,
                noncancer_beyond: (nc.counts[0] + nc.counts[3]) as f64 / nc.n as f64,
            })
        })
        .collect()
}
