use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Discordant-pair totals below this use the exact binomial test.
pub const EXACT_BELOW: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ExactBinomial,
    ChiSquare,
    /// No discordant pairs; `p_value` is 1 by convention.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Samples only model A gets right.
    pub b: usize,
    /// Samples only model B gets right.
    pub c: usize,
    /// Continuity-corrected chi-square statistic `max(0, |b - c| - 1)^2 / (b + c)`.
    pub statistic: f64,
    pub p_value: f64,
    pub method: McNemarMethod,
}

impl McNemarResult {
    pub fn is_undefined(&self) -> bool {
        self.method == McNemarMethod::Undefined
    }
}

/// Two-sided exact binomial p-value for `k` successes out of `n` at p = 0.5,
/// doubling the smaller tail and capping at 1.
pub fn exact_binomial_two_sided(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let m = k.min(n - k);
    // Walk C(n, i) / 2^n in log space so large n does not overflow.
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_c = 0.0;
    let mut tail = 0.0;
    for i in 0..=m {
        if i > 0 {
            ln_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        tail += (ln_c + ln_half_n).exp();
    }
    (2.0 * tail).min(1.0)
}

pub fn chi_square_p(statistic: f64) -> f64 {
    let chi = ChiSquared::new(1.0).expect("one degree of freedom");
    chi.sf(statistic).clamp(0.0, 1.0)
}

/// McNemar test from discordant counts.
pub fn mcnemar_counts(b: usize, c: usize) -> McNemarResult {
    let n = b + c;
    if n == 0 {
        return McNemarResult {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
            method: McNemarMethod::Undefined,
        };
    }
    // Clamped so that b == c gives 0 rather than 1 / n.
    let diff = ((b as f64 - c as f64).abs() - 1.0).max(0.0);
    let statistic = diff * diff / n as f64;
    let (p_value, method) = if n < EXACT_BELOW {
        (exact_binomial_two_sided(b, n), McNemarMethod::ExactBinomial)
    } else {
        (chi_square_p(statistic), McNemarMethod::ChiSquare)
    };
    McNemarResult {
        b,
        c,
        statistic,
        p_value,
        method,
    }
}

/// Paired comparison of two classifiers from per-sample correctness.
pub fn mcnemar(correct_a: &[bool], correct_b: &[bool]) -> Result<McNemarResult> {
    if correct_a.len() != correct_b.len() {
        return Err(Error::DimensionMismatch {
            expected: correct_a.len(),
            got: correct_b.len(),
        });
    }
    if correct_a.is_empty() {
        return Err(Error::InvalidArgument("McNemar needs at least one sample".into()));
    }
    let b = correct_a.iter().zip(correct_b).filter(|&(&a, &b)| a && !b).count();
    let c = correct_a.iter().zip(correct_b).filter(|&(&a, &b)| !a && b).count();
    Ok(mcnemar_counts(b, c))
}
