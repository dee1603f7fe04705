//! Hypothesis tests on model parameters: likelihood-ratio tests from
//! importance-sampled log-likelihoods, Wald tests from Fisher-information
//! standard errors, and Benjamini–Hochberg multiplicity adjustment for
//! taxon-wise studies.

use crate::error::{Error, Result};
use crate::special::chi2_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    Lrt,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    /// Upper-tail chi-square probability of the statistic.
    pub p_value: f64,
    pub method: TestMethod,
    /// The raw LRT statistic fell below the Monte Carlo noise tolerance and
    /// was clamped to zero.
    pub negative_clamped: bool,
}

/// Monte Carlo noise allowance on 2·ΔLL before a negative statistic is
/// flagged: importance-sampled log-likelihoods of nested models can cross by
/// a little.
const LRT_NOISE_TOLERANCE: f64 = -0.5;

/// Likelihood-ratio test of a reduced model nested in a full model. The two
/// log-likelihoods must come from the same importance-sampling size.
pub fn lrt(loglik_full: f64, loglik_reduced: f64, df: usize) -> Result<TestResult> {
    if df == 0 {
        return Err(Error::Validation("lrt needs df >= 1".into()));
    }
    if !loglik_full.is_finite() || !loglik_reduced.is_finite() {
        return Err(Error::Domain("lrt needs finite log-likelihoods".into()));
    }
    let raw = 2.0 * (loglik_full - loglik_reduced);
    let negative_clamped = raw < LRT_NOISE_TOLERANCE;
    let statistic = raw.max(0.0);
    Ok(TestResult {
        statistic,
        df,
        p_value: chi2_sf(statistic, df),
        method: TestMethod::Lrt,
        negative_clamped,
    })
}

/// Wald test of a single parameter: (estimate/se)² against chi-square with
/// one degree of freedom.
pub fn wald(estimate: f64, se: f64) -> Result<TestResult> {
    if !(se > 0.0) {
        return Err(Error::Domain(format!("wald needs se > 0, got {se}")));
    }
    let statistic = (estimate / se).powi(2);
    Ok(TestResult {
        statistic,
        df: 1,
        p_value: chi2_sf(statistic, 1),
        method: TestMethod::Wald,
        negative_clamped: false,
    })
}

/// Benjamini–Hochberg step-up adjusted p-values, order-preserving and clamped
/// to one.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Validation("p-values must lie in [0, 1]".into()));
    }
    let n = p_values.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]));
    let mut adjusted = vec![0.0; n];
    let mut running_min = 1.0f64;
    for rank in (0..n).rev() {
        let idx = order[rank];
        let scaled = (p_values[idx] * n as f64 / (rank + 1) as f64).min(1.0);
        running_min = running_min.min(scaled);
        adjusted[idx] = running_min;
    }
    Ok(adjusted)
}
