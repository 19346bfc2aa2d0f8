//! End-to-end certification of the Gibbs-measure count at one `(k, theta)`.
//!
//! For `k = 2` the model has a unique translation-invariant Gibbs measure
//! for `0 <= theta <= 5/6` and exactly three for `5/6 < theta < 1`; for
//! `k = 3` the threshold is `5/9`. Verification enumerates the complete
//! analytic root set, certifies every root under both residual oracles,
//! and compares the positive count against the predicted value.

use crate::error::{Error, Result};
use crate::kernel::ModelParams;
use crate::reduction::{analytic_fixed_points, FixedPointReport, REPORT_RESIDUAL_TOL};

/// Exact phase-transition threshold `5/(3k)` for the proved orders.
pub fn threshold(k: usize) -> Result<f64> {
    match k {
        2 | 3 => Ok(5.0 / (3.0 * k as f64)),
        _ => Err(Error::UnsupportedBranchingOrder(k)),
    }
}

/// Predicted number of translation-invariant Gibbs measures: 1 up to and
/// including the threshold, 3 strictly above it.
pub fn predicted_count(k: usize, theta: f64) -> Result<usize> {
    Ok(if theta > threshold(k)? { 3 } else { 1 })
}

/// Outcome of a verification run.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub params: ModelParams,
    pub report: FixedPointReport,
    pub expected_count: usize,
    /// Largest plane-map residual over all roots.
    pub max_residual_vk: f64,
    /// Largest Hammerstein residual over all roots.
    pub max_residual_hk: f64,
    /// All residuals below the certification tolerance.
    pub residuals_ok: bool,
    /// Positive count matches the predicted count.
    pub count_ok: bool,
}

impl VerifyReport {
    pub fn count_positive(&self) -> usize {
        self.report.count_positive
    }
}

/// Enumerates, certifies, and compares against the predicted count.
pub fn verify(params: &ModelParams) -> Result<VerifyReport> {
    let expected_count = predicted_count(params.k(), params.theta())?;
    let report = analytic_fixed_points(params)?;
    let max_residual_vk = report
        .points
        .iter()
        .map(|p| p.residual_vk)
        .fold(0.0, f64::max);
    let max_residual_hk = report
        .points
        .iter()
        .map(|p| p.residual_hk)
        .fold(0.0, f64::max);
    let residuals_ok =
        max_residual_vk < REPORT_RESIDUAL_TOL && max_residual_hk < REPORT_RESIDUAL_TOL;
    let count_ok = report.count_positive == expected_count;
    Ok(VerifyReport {
        params: *params,
        report,
        expected_count,
        max_residual_vk,
        max_residual_hk,
        residuals_ok,
        count_ok,
    })
}
