//! Coupling sweeps and phase-transition detection.
//!
//! A sweep walks `theta` over a grid, counts the strictly positive fixed
//! points at each step (each one carries a translation-invariant Gibbs
//! measure), and brackets the coupling where the count jumps from 1 to 3.
//! Bisection then refines the bracket; for k = 2 and 3 the refined value
//! reproduces the exact thresholds `5/6` and `5/9`. For other orders the
//! count comes from Newton multistart and any threshold is reported as an
//! observation, not a claim.

use std::io::Write;

use crate::error::{Error, Result};
use crate::kernel::ModelParams;
use crate::reduction::{
    analytic_fixed_points, enumerate_with_starts, FixedPointReport, MomentPair,
    DEFAULT_DEDUPE_TOL, DEFAULT_GRID_DENSITY,
};

/// How each sweep row enumerates its fixed points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// Closed-form root sets; `k` must be 2 or 3. Rows are independent.
    Analytic,
    /// Newton multistart with warm starts carried from the previous row;
    /// rows are computed serially as a continuation.
    Newton,
}

/// One row of a sweep: the coupling, the Gibbs-measure count, and the
/// positive-class roots (constant branch first, then descending `y`).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub theta: f64,
    pub count_positive: usize,
    pub roots: Vec<MomentPair>,
}

/// A completed sweep.
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub k: usize,
    pub rows: Vec<SweepRow>,
    /// Tightest adjacent pair of grid couplings across which the positive
    /// count jumps from 1 to 3; absent when no jump occurs in range.
    pub threshold_bracket: Option<(f64, f64)>,
}

fn row_from_report(theta: f64, report: &FixedPointReport) -> SweepRow {
    SweepRow {
        theta,
        count_positive: report.count_positive,
        roots: report
            .positive_points()
            .iter()
            .map(|p| p.point())
            .collect(),
    }
}

fn validate_range(theta_min: f64, theta_max: f64, step: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta_min)
        || !(theta_min..1.0).contains(&theta_max)
        || theta_min >= theta_max
    {
        return Err(Error::InvalidRange(format!(
            "need 0 <= theta_min < theta_max < 1, got [{theta_min}, {theta_max}]"
        )));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidRange(format!("step = {step}, need > 0")));
    }
    Ok(())
}

fn theta_grid(theta_min: f64, theta_max: f64, step: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let theta = theta_min + i as f64 * step;
        if theta > theta_max + 1e-12 {
            break;
        }
        grid.push(theta.min(theta_max));
        i += 1;
    }
    grid
}

/// Sweeps the coupling from `theta_min` to `theta_max` in steps of `step`.
///
/// `jobs` bounds the worker threads for independent rows (analytic method
/// only; the Newton continuation is inherently serial). Results are
/// identical for any `jobs`.
pub fn sweep(
    params_base: &ModelParams,
    theta_min: f64,
    theta_max: f64,
    step: f64,
    method: SweepMethod,
    jobs: usize,
) -> Result<SweepTable> {
    validate_range(theta_min, theta_max, step)?;
    let grid = theta_grid(theta_min, theta_max, step);
    let rows = match method {
        SweepMethod::Analytic => {
            if !matches!(params_base.k(), 2 | 3) {
                return Err(Error::UnsupportedBranchingOrder(params_base.k()));
            }
            sweep_rows_parallel(params_base, &grid, jobs.max(1))?
        }
        SweepMethod::Newton => {
            let mut rows = Vec::with_capacity(grid.len());
            let mut warm: Vec<MomentPair> = Vec::new();
            for &theta in &grid {
                let params = params_base.with_theta(theta)?;
                let report = enumerate_with_starts(
                    &params,
                    &warm,
                    DEFAULT_GRID_DENSITY,
                    DEFAULT_DEDUPE_TOL,
                )?;
                warm = report.points.iter().map(|p| p.point()).collect();
                rows.push(row_from_report(theta, &report));
            }
            rows
        }
    };
    let threshold_bracket = rows
        .windows(2)
        .find(|w| w[0].count_positive == 1 && w[1].count_positive == 3)
        .map(|w| (w[0].theta, w[1].theta));
    Ok(SweepTable {
        k: params_base.k(),
        rows,
        threshold_bracket,
    })
}

fn sweep_rows_parallel(
    params_base: &ModelParams,
    grid: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let chunk = grid.len().div_ceil(jobs);
    let mut results: Vec<Result<Vec<SweepRow>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = grid
            .chunks(chunk.max(1))
            .map(|thetas| {
                scope.spawn(move || {
                    thetas
                        .iter()
                        .map(|&theta| {
                            let params = params_base.with_theta(theta)?;
                            let report = analytic_fixed_points(&params)?;
                            Ok(row_from_report(theta, &report))
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        for h in handles {
            results.push(h.join().expect("sweep worker panicked"));
        }
    });
    let mut rows = Vec::with_capacity(grid.len());
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Bisects a bracket across which the positive count changes, down to a
/// width below `tol`, and returns the midpoint.
pub fn refine_threshold(
    params_base: &ModelParams,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::BracketInvalid(format!("tol = {tol}, need > 0")));
    }
    let (mut lo, mut hi) = bracket;
    if !(0.0..1.0).contains(&lo) || !(0.0..1.0).contains(&hi) || lo >= hi {
        return Err(Error::BracketInvalid(format!("bracket [{lo}, {hi}]")));
    }
    let count_at = |theta: f64| -> Result<usize> {
        let params = params_base.with_theta(theta)?;
        let report = if matches!(params.k(), 2 | 3) {
            analytic_fixed_points(&params)?
        } else {
            enumerate_with_starts(&params, &[], DEFAULT_GRID_DENSITY, DEFAULT_DEDUPE_TOL)?
        };
        Ok(report.count_positive)
    };
    let count_lo = count_at(lo)?;
    let count_hi = count_at(hi)?;
    if count_lo == count_hi {
        return Err(Error::BracketInvalid(format!(
            "count does not change across [{lo}, {hi}] (both {count_lo})"
        )));
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if count_at(mid)? == count_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl SweepTable {
    /// Widest positive-root count over the table, which fixes the CSV
    /// column count.
    pub fn max_roots(&self) -> usize {
        self.rows.iter().map(|r| r.roots.len()).max().unwrap_or(0)
    }

    /// Writes `theta,count_positive,x_1,y_1,...` rows, blank-padded to the
    /// widest row. Roots are ordered constant branch first, then by
    /// descending `y`. Comment lines go first; `summary`, when given, is
    /// appended as a trailing `threshold_estimate=...` line.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        comments: &[String],
        summary: Option<&str>,
    ) -> std::io::Result<()> {
        for line in comments {
            writeln!(out, "# {line}")?;
        }
        let width = self.max_roots();
        let mut header = String::from("theta,count_positive");
        for i in 1..=width {
            header.push_str(&format!(",x_{i},y_{i}"));
        }
        writeln!(out, "{header}")?;
        for row in &self.rows {
            let mut line = format!(
                "{},{}",
                crate::fmt_float(row.theta),
                row.count_positive
            );
            for i in 0..width {
                match row.roots.get(i) {
                    Some(p) => {
                        line.push_str(&format!(
                            ",{},{}",
                            crate::fmt_float(p.x),
                            crate::fmt_float(p.y)
                        ));
                    }
                    None => line.push_str(",,"),
                }
            }
            writeln!(out, "{line}")?;
        }
        if let Some(s) = summary {
            writeln!(out, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::cbrt2;

    fn base(k: usize) -> ModelParams {
        ModelParams::with_unit_beta(k, 0.5).unwrap()
    }

    #[test]
    fn sweep_below_threshold_has_no_bracket() {
        let table = sweep(&base(2), 0.1, 0.5, 0.1, SweepMethod::Analytic, 1).unwrap();
        assert!(table.threshold_bracket.is_none());
        assert!(table.rows.iter().all(|r| r.count_positive == 1));
    }

    #[test]
    fn sweep_brackets_k2_threshold() {
        let table = sweep(&base(2), 0.5, 0.99, 0.005, SweepMethod::Analytic, 4).unwrap();
        let (lo, hi) = table.threshold_bracket.unwrap();
        assert!(lo <= 5.0 / 6.0 && 5.0 / 6.0 <= hi, "bracket [{lo}, {hi}]");
        assert!(hi - lo < 0.006);
        // Counts never decrease along the sweep.
        for w in table.rows.windows(2) {
            assert!(w[1].count_positive >= w[0].count_positive);
        }
        // Positivity margin of the broken branches stays strictly positive.
        for row in &table.rows {
            if row.count_positive == 3 {
                for root in &row.roots[1..] {
                    assert!(root.x - root.y.abs() * row.theta * cbrt2() > 0.0);
                }
            }
        }
    }

    #[test]
    fn sweep_brackets_k3_threshold() {
        let table = sweep(&base(3), 0.3, 0.99, 0.005, SweepMethod::Analytic, 2).unwrap();
        let (lo, hi) = table.threshold_bracket.unwrap();
        assert!(lo <= 5.0 / 9.0 && 5.0 / 9.0 <= hi, "bracket [{lo}, {hi}]");
    }

    #[test]
    fn sweep_is_independent_of_job_count() {
        let one = sweep(&base(2), 0.8, 0.9, 0.01, SweepMethod::Analytic, 1).unwrap();
        let many = sweep(&base(2), 0.8, 0.9, 0.01, SweepMethod::Analytic, 7).unwrap();
        assert_eq!(one.rows.len(), many.rows.len());
        for (a, b) in one.rows.iter().zip(&many.rows) {
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.count_positive, b.count_positive);
            assert_eq!(a.roots.len(), b.roots.len());
            for (ra, rb) in a.roots.iter().zip(&b.roots) {
                assert_eq!(ra.x, rb.x);
                assert_eq!(ra.y, rb.y);
            }
        }
    }

    #[test]
    fn analytic_and_newton_counts_agree() {
        for k in [2usize, 3] {
            let a = sweep(&base(k), 0.45, 0.95, 0.05, SweepMethod::Analytic, 1).unwrap();
            let n = sweep(&base(k), 0.45, 0.95, 0.05, SweepMethod::Newton, 1).unwrap();
            let ac: Vec<usize> = a.rows.iter().map(|r| r.count_positive).collect();
            let nc: Vec<usize> = n.rows.iter().map(|r| r.count_positive).collect();
            assert_eq!(ac, nc, "k = {k}");
        }
    }

    #[test]
    fn refine_recovers_exact_thresholds() {
        let t2 = refine_threshold(&base(2), (0.83, 0.84), 1e-6).unwrap();
        assert!((t2 - 5.0 / 6.0).abs() < 1e-6, "{t2}");
        let t3 = refine_threshold(&base(3), (0.55, 0.56), 1e-6).unwrap();
        assert!((t3 - 5.0 / 9.0).abs() < 1e-6, "{t3}");
    }

    #[test]
    fn refine_rejects_flat_bracket() {
        let err = refine_threshold(&base(2), (0.1, 0.2), 1e-6).unwrap_err();
        assert!(matches!(err, Error::BracketInvalid(_)));
    }

    #[test]
    fn newton_sweep_observes_conjectural_k4_threshold() {
        let base4 = ModelParams::with_unit_beta(4, 0.5).unwrap();
        let table = sweep(&base4, 0.35, 0.48, 0.01, SweepMethod::Newton, 1).unwrap();
        let bracket = table.threshold_bracket.expect("no jump found");
        let t4 = refine_threshold(&base4, bracket, 1e-4).unwrap();
        // 5/(3k) = 5/12; measured, not claimed.
        assert!((t4 - 5.0 / 12.0).abs() < 1e-3, "{t4}");
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(sweep(&base(2), 0.5, 0.4, 0.01, SweepMethod::Analytic, 1).is_err());
        assert!(sweep(&base(2), 0.0, 1.0, 0.01, SweepMethod::Analytic, 1).is_err());
        assert!(sweep(&base(2), 0.1, 0.5, 0.0, SweepMethod::Analytic, 1).is_err());
        assert!(sweep(&base(4), 0.1, 0.5, 0.1, SweepMethod::Analytic, 1).is_err());
    }

    #[test]
    fn csv_shape() {
        let table = sweep(&base(2), 0.82, 0.85, 0.01, SweepMethod::Analytic, 1).unwrap();
        let mut buf = Vec::new();
        table
            .write_csv(&mut buf, &["cmd".into()], Some("threshold_estimate=0.8333"))
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# cmd"));
        assert_eq!(lines.next().unwrap(), "theta,count_positive,x_1,y_1,x_2,y_2,x_3,y_3");
        // Rows below the threshold are blank-padded to the full width.
        let first_row = lines.next().unwrap();
        assert_eq!(first_row.matches(',').count(), 7);
        assert!(first_row.ends_with(",,"));
        assert!(text.trim_end().ends_with("threshold_estimate=0.8333"));
    }
}
