//! The Hammerstein operator `(H_k f)(t) = integral_0^1 K(t,u) f(u)^k du`,
//! the normalized consistency map it descends from, and the machinery that
//! certifies fixed points: sup-norm residuals on a collocation grid, the
//! lift from operator fixed points to consistency-equation solutions, and
//! Picard iteration of the normalized map.
//!
//! Two density representations are supported. [`ClosedFormDensity`] holds a
//! member `phi(t) = c1 + c2*theta*e(t)` of the two-parameter family that
//! contains every continuous fixed point; the operator is evaluated on it
//! through the cube-root substitution, where the integrand is polynomial and
//! the quadrature exact. [`SampledDensity`] holds arbitrary grid samples and
//! is interpolated in the substituted variable `w = cbrt(2t-1)`, where the
//! functions of interest are smooth.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::kernel::{basis_unchecked, cbrt2, cbrt4, kernel_unchecked, real_cbrt, ModelParams};
use crate::quadrature::{integrate_cube_substituted, QuadratureRule};

/// Grid size used by residual certificates and lifted densities.
pub const DEFAULT_GRID_SIZE: usize = 129;

/// Strict-positivity margin required of a density before it may back a
/// probability construction.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Hammerstein residual a density must certify before being lifted.
pub const LIFT_RESIDUAL_TOL: f64 = 1e-8;

/// Smallest admissible consistency-map denominator.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Overflow guard for Picard iteration.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// A density in the two-parameter family `phi(t) = c1 + c2*theta*e(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormDensity {
    pub c1: f64,
    pub c2: f64,
    pub params: ModelParams,
}

impl ClosedFormDensity {
    pub fn new(c1: f64, c2: f64, params: ModelParams) -> Self {
        Self { c1, c2, params }
    }

    /// `phi(t)`; total in `t` since the real cube root is.
    pub fn eval(&self, t: f64) -> f64 {
        self.c1 + self.c2 * self.params.theta() * basis_unchecked(t)
    }

    /// Value in the substituted variable, `phi(1/2 + w^3/2)`.
    pub(crate) fn eval_w(&self, w: f64) -> f64 {
        self.c1 + self.c2 * self.params.theta() * cbrt2() * w
    }

    /// Minimum over `[0, 1]`; `phi` is monotone in `e(t)`, so the minimum
    /// sits at an endpoint: `c1 - |c2|*theta*cbrt(2)`.
    pub fn min_value(&self) -> f64 {
        self.c1 - self.c2.abs() * self.params.theta() * cbrt2()
    }

    /// Strict positivity on `[0, 1]`, i.e. `c1 > |c2|*theta*cbrt(2)` with
    /// the crate-wide margin.
    pub fn is_strictly_positive(&self) -> bool {
        self.min_value() > POSITIVITY_TOL
    }

    /// The spin-flipped density `phi(1-t)`.
    pub fn flip(&self) -> Self {
        Self {
            c1: self.c1,
            c2: -self.c2,
            params: self.params,
        }
    }
}

/// A density sampled on a strictly increasing grid spanning `[0, 1]`.
///
/// Between nodes the density is interpolated by a local cubic in the
/// substituted variable `w = cbrt(2t-1)`; fixed points of the consistency
/// map are polynomial in `w`, so they interpolate exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDensity {
    grid: Vec<f64>,
    w_grid: Vec<f64>,
    values: Vec<f64>,
}

impl SampledDensity {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "sampled density needs at least 2 nodes, got {}",
                grid.len()
            )));
        }
        if grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
            return Err(Error::InvalidInput(
                "grid must span [0, 1] with both endpoints included".into(),
            ));
        }
        if !grid.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("values must be finite".into()));
        }
        let w_grid = grid.iter().map(|&t| real_cbrt(2.0 * t - 1.0)).collect();
        Ok(Self {
            grid,
            w_grid,
            values,
        })
    }

    /// The default collocation grid: Chebyshev-Lobatto points in the
    /// substituted variable, mapped to `[0, 1]` by `t = 1/2 + w^3/2`.
    pub fn chebyshev_grid(n: usize) -> Vec<f64> {
        assert!(n >= 2, "grid needs at least 2 nodes");
        (0..n)
            .map(|i| {
                let w = -(std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
                if i == 0 {
                    0.0
                } else if i == n - 1 {
                    1.0
                } else {
                    0.5 + 0.5 * w * w * w
                }
            })
            .collect()
    }

    /// Samples `f` on the default grid of `n` nodes.
    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self> {
        let grid = Self::chebyshev_grid(n);
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Sup distance on the shared grid; errors if the grids differ.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("grids differ".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Local cubic Lagrange interpolation in the substituted variable.
    pub fn eval(&self, t: f64) -> f64 {
        let w = real_cbrt(2.0 * t.clamp(0.0, 1.0) - 1.0);
        let n = self.w_grid.len();
        // Cell index such that w_grid[i] <= w < w_grid[i+1].
        let cell = match self
            .w_grid
            .binary_search_by(|x| x.partial_cmp(&w).unwrap())
        {
            Ok(i) => return self.values[i.min(n - 1)],
            Err(i) => i.clamp(1, n - 1) - 1,
        };
        let stencil = 4.min(n);
        let start = cell
            .saturating_sub((stencil - 1) / 2)
            .min(n - stencil);
        let ws = &self.w_grid[start..start + stencil];
        let vs = &self.values[start..start + stencil];
        let mut acc = 0.0;
        for i in 0..stencil {
            let mut l = vs[i];
            for j in 0..stencil {
                if j != i {
                    l *= (w - ws[j]) / (ws[i] - ws[j]);
                }
            }
            acc += l;
        }
        acc
    }

    /// Writes the two-column `t,value` CSV form, preceded by the given
    /// comment lines.
    pub fn write_csv<W: Write>(&self, out: &mut W, comments: &[String]) -> std::io::Result<()> {
        for line in comments {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,value")?;
        for (t, v) in self.grid.iter().zip(&self.values) {
            writeln!(out, "{},{}", crate::fmt_float(*t), crate::fmt_float(*v))?;
        }
        Ok(())
    }

    /// Parses the two-column CSV form; `#` comments and a `t,value` header
    /// are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(format!("read error: {e}")))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| {
                    Error::InvalidInput(format!("line {}: expected `t,value`", lineno + 1))
                })
            };
            grid.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        Self::new(grid, values)
    }
}

/// Either density representation, for operations defined on both.
#[derive(Clone, Copy)]
pub enum DensityRef<'a> {
    Closed(&'a ClosedFormDensity),
    Sampled(&'a ModelParams, &'a SampledDensity),
}

impl DensityRef<'_> {
    fn params(&self) -> &ModelParams {
        match self {
            DensityRef::Closed(phi) => &phi.params,
            DensityRef::Sampled(p, _) => p,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        match self {
            DensityRef::Closed(phi) => phi.eval(t),
            DensityRef::Sampled(_, f) => f.eval(t),
        }
    }
}

/// Quadrature order that is exact for the closed-form family at order `k`:
/// the substituted integrand has degree `k + 3`.
fn exact_rule(k: usize) -> Result<std::sync::Arc<QuadratureRule>> {
    QuadratureRule::gauss_legendre(16.max(k))
}

/// Applies `H_k` to a density at the point `t`.
///
/// Closed-form input uses the substituted (exact) path; sampled input is
/// interpolated and integrated with an order-64 rule.
pub fn apply_hammerstein(f: DensityRef<'_>, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain { name: "t", value: t });
    }
    let params = *f.params();
    let theta = params.theta();
    let k = params.k() as i32;
    match f {
        DensityRef::Closed(phi) => {
            let rule = exact_rule(params.k())?;
            let et = basis_unchecked(t);
            let slope = theta * et * cbrt2() / cbrt4();
            integrate_cube_substituted(
                |w| {
                    // K(t, u(w)) = 1 + theta*e(t)*e(u)/cbrt(4), e(u) = cbrt(2) w.
                    (1.0 + slope * w) * phi.eval_w(w).powi(k)
                },
                &rule,
            )
        }
        DensityRef::Sampled(_, f) => {
            let rule = QuadratureRule::gauss_legendre(64)?;
            integrate_cube_substituted(
                |w| {
                    let u = 0.5 + 0.5 * w * w * w;
                    kernel_unchecked(theta, t, u) * f.eval(u).powi(k)
                },
                &rule,
            )
        }
    }
}

/// Sup over a Chebyshev-distributed grid of `|(H_k f)(t) - f(t)|`.
pub fn hammerstein_residual(f: DensityRef<'_>, norm_grid_size: usize) -> Result<f64> {
    if norm_grid_size < 2 {
        return Err(Error::InvalidInput(format!(
            "norm_grid_size = {norm_grid_size}, need at least 2"
        )));
    }
    let mut sup: f64 = 0.0;
    for t in SampledDensity::chebyshev_grid(norm_grid_size) {
        let r = (apply_hammerstein(f, t)? - f.eval(t)).abs();
        sup = sup.max(r);
    }
    Ok(sup)
}

/// One application of the normalized consistency map
/// `f(t) -> (integral K(t,u) f(u) du / integral K(0,u) f(u) du)^k`,
/// sampled on the input grid.
pub fn consistency_map(params: &ModelParams, f: &SampledDensity) -> Result<SampledDensity> {
    let min = f.min_value();
    if min <= 0.0 {
        return Err(Error::NotPositive { min });
    }
    let rule = QuadratureRule::gauss_legendre(64)?;
    let theta = params.theta();
    // The integrand is shared across targets; sample f once per node.
    let nodes = rule.unit_nodes_weights();
    let f_at: Vec<(f64, f64, f64)> = nodes
        .iter()
        .map(|&(u, wt)| (u, wt, f.eval(u)))
        .collect();
    let field_integral = |t: f64| -> f64 {
        f_at.iter()
            .map(|&(u, wt, fv)| wt * kernel_unchecked(theta, t, u) * fv)
            .sum()
    };
    let denom = field_integral(0.0);
    if denom <= DENOMINATOR_TOL {
        return Err(Error::DegenerateDenominator {
            value: denom,
            tol: DENOMINATOR_TOL,
        });
    }
    let k = params.k() as i32;
    let values = f
        .grid()
        .iter()
        .map(|&t| (field_integral(t) / denom).powi(k))
        .collect();
    SampledDensity::new(f.grid().to_vec(), values)
}

/// Sup residual of `f` under the consistency map.
pub fn consistency_residual(params: &ModelParams, f: &SampledDensity) -> Result<f64> {
    consistency_map(params, f)?.sup_distance(f)
}

/// Lifts a certified positive fixed point of `H_k` to a solution of the
/// consistency equation: `f(t) = (phi(t)/phi(0))^k`, sampled on the default
/// grid.
pub fn lift_fixed_point(phi: &ClosedFormDensity) -> Result<SampledDensity> {
    lift_fixed_point_on(phi, DEFAULT_GRID_SIZE)
}

/// [`lift_fixed_point`] on a grid of the given size.
pub fn lift_fixed_point_on(phi: &ClosedFormDensity, grid_size: usize) -> Result<SampledDensity> {
    if !phi.is_strictly_positive() {
        return Err(Error::NotPositive {
            min: phi.min_value(),
        });
    }
    let residual = hammerstein_residual(DensityRef::Closed(phi), DEFAULT_GRID_SIZE)?;
    if residual > LIFT_RESIDUAL_TOL {
        return Err(Error::NotCertified(format!(
            "Hammerstein residual {residual:e} exceeds {LIFT_RESIDUAL_TOL:e}"
        )));
    }
    let phi0 = phi.eval(0.0);
    let k = phi.params.k() as i32;
    SampledDensity::from_fn(grid_size, |t| (phi.eval(t) / phi0).powi(k))
}

/// Outcome of a Picard run.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub density: SampledDensity,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates the normalized consistency map until the sup change drops
/// below `tol` or `max_iters` is reached.
pub fn picard_iterate(
    params: &ModelParams,
    f0: &SampledDensity,
    max_iters: usize,
    tol: f64,
) -> Result<PicardOutcome> {
    if tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tol = {tol}, need tol > 0")));
    }
    let mut current = f0.clone();
    for iter in 1..=max_iters {
        let next = consistency_map(params, &current)?;
        let sup = next
            .values()
            .iter()
            .cloned()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        if sup > OVERFLOW_GUARD {
            return Err(Error::Divergence { sup });
        }
        let change = next.sup_distance(&current)?;
        current = next;
        if change < tol {
            return Ok(PicardOutcome {
                density: current,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(PicardOutcome {
        density: current,
        iterations: max_iters,
        converged: false,
    })
}

/// Least-squares projection of `f^(1/k)` onto the family
/// `a + b*theta*e(t)`, reported with the sup error of the fit.
#[derive(Debug, Clone, Copy)]
pub struct FamilyProjection {
    pub c1: f64,
    pub c2: f64,
    pub sup_error: f64,
}

/// Projects a positive sampled density onto the closed-form family after
/// taking the k-th root. A small `sup_error` certifies that the density is
/// (a power of) a member of the family.
pub fn project_onto_family(params: &ModelParams, f: &SampledDensity) -> Result<FamilyProjection> {
    let min = f.min_value();
    if min <= 0.0 {
        return Err(Error::NotPositive { min });
    }
    let inv_k = 1.0 / params.k() as f64;
    let roots: Vec<f64> = f.values().iter().map(|&v| v.powf(inv_k)).collect();
    let theta = params.theta();
    let (c1, c2) = if theta == 0.0 {
        (roots.iter().sum::<f64>() / roots.len() as f64, 0.0)
    } else {
        // Normal equations for the basis {1, theta*e(t)}.
        let mut s_bb = 0.0;
        let mut s_b = 0.0;
        let mut s_gb = 0.0;
        let mut s_g = 0.0;
        let n = roots.len() as f64;
        for (&t, &g) in f.grid().iter().zip(&roots) {
            let b = theta * basis_unchecked(t);
            s_bb += b * b;
            s_b += b;
            s_gb += g * b;
            s_g += g;
        }
        let det = n * s_bb - s_b * s_b;
        if det.abs() < 1e-30 {
            return Err(Error::InvalidInput("degenerate projection basis".into()));
        }
        ((s_g * s_bb - s_b * s_gb) / det, (n * s_gb - s_b * s_g) / det)
    };
    let sup_error = f
        .grid()
        .iter()
        .zip(&roots)
        .map(|(&t, &g)| (g - (c1 + c2 * theta * basis_unchecked(t))).abs())
        .fold(0.0, f64::max);
    Ok(FamilyProjection { c1, c2, sup_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, theta: f64) -> ModelParams {
        ModelParams::with_unit_beta(k, theta).unwrap()
    }

    /// The symmetry-broken k = 2 fixed point at coupling `theta > 5/6`.
    fn phi2(theta: f64) -> ClosedFormDensity {
        let x = 5.0 / (6.0 * theta);
        let y = 5.0 / (6.0 * theta * theta) / cbrt2() * ((6.0 * theta - 5.0) / 3.0).sqrt();
        ClosedFormDensity::new(x, y, params(2, theta))
    }

    #[test]
    fn apply_constant_density_is_identity() {
        for &theta in &[0.0, 0.5, 0.9] {
            for k in 2..=4 {
                let phi = ClosedFormDensity::new(1.0, 0.0, params(k, theta));
                for &t in &[0.0, 0.3, 0.5, 1.0] {
                    let v = apply_hammerstein(DensityRef::Closed(&phi), t).unwrap();
                    assert!((v - 1.0).abs() < 1e-14, "k={k} theta={theta} t={t}: {v}");
                }
            }
        }
    }

    #[test]
    fn apply_theta_zero_collapses_to_kth_moment() {
        // K == 1, and the c2 term is annihilated by theta = 0.
        let phi = ClosedFormDensity::new(2.0, 5.0, params(2, 0.0));
        let v = apply_hammerstein(DensityRef::Closed(&phi), 0.3).unwrap();
        assert!((v - 4.0).abs() < 1e-13, "{v}");
        // theta = 0 scale law: the image is constant in t.
        let base = apply_hammerstein(DensityRef::Closed(&phi), 0.0).unwrap();
        for i in 0..=32 {
            let t = i as f64 / 32.0;
            let v = apply_hammerstein(DensityRef::Closed(&phi), t).unwrap();
            assert!((v - base).abs() < 1e-13);
        }
    }

    #[test]
    fn apply_at_fixed_point_reproduces_value() {
        let phi = phi2(0.9);
        let t = 0.25;
        let v = apply_hammerstein(DensityRef::Closed(&phi), t).unwrap();
        assert!((v - phi.eval(t)).abs() < 1e-12, "{v} vs {}", phi.eval(t));
        // e(1/4) = cbrt(-1) = -1 pins the value itself.
        let expected = phi.c1 - phi.c2 * 0.9;
        assert!((phi.eval(t) - expected).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_out_of_domain_t() {
        let phi = ClosedFormDensity::new(1.0, 0.0, params(2, 0.5));
        assert!(apply_hammerstein(DensityRef::Closed(&phi), -0.01).is_err());
        assert!(apply_hammerstein(DensityRef::Closed(&phi), 1.01).is_err());
    }

    #[test]
    fn residual_examples() {
        let one = ClosedFormDensity::new(1.0, 0.0, params(3, 0.7));
        assert!(hammerstein_residual(DensityRef::Closed(&one), 65).unwrap() < 1e-13);
        let half = ClosedFormDensity::new(0.5, 0.0, params(2, 0.5));
        let r = hammerstein_residual(DensityRef::Closed(&half), 65).unwrap();
        assert!((r - 0.25).abs() < 1e-13, "{r}");
        let r2 = hammerstein_residual(DensityRef::Closed(&phi2(0.9)), 129).unwrap();
        assert!(r2 < 1e-10, "{r2}");
    }

    #[test]
    fn residual_of_flip_matches() {
        let phi = phi2(0.9);
        let r = hammerstein_residual(DensityRef::Closed(&phi), 65).unwrap();
        let rf = hammerstein_residual(DensityRef::Closed(&phi.flip()), 65).unwrap();
        assert!(rf <= r + 1e-12, "{rf} vs {r}");
    }

    /// The image of a family member is again of the form `A + B*theta*e(t)`:
    /// fit A, B from two points and check a third.
    #[test]
    fn closed_form_closure() {
        for &(k, theta, c1, c2) in &[
            (2usize, 0.9, 0.7, 0.4),
            (3, 0.6, 1.1, -0.8),
            (4, 0.3, 0.2, 1.5),
            (5, 0.85, -0.6, 0.9),
        ] {
            let phi = ClosedFormDensity::new(c1, c2, params(k, theta));
            let apply = |t: f64| apply_hammerstein(DensityRef::Closed(&phi), t).unwrap();
            let (t0, t1, t2) = (0.0, 1.0, 0.31);
            let (e0, e1, e2) = (
                basis_unchecked(t0),
                basis_unchecked(t1),
                basis_unchecked(t2),
            );
            let (v0, v1) = (apply(t0), apply(t1));
            let b = (v1 - v0) / (e1 - e0);
            let a = v0 - b * e0;
            let predicted = a + b * e2;
            assert!(
                (apply(t2) - predicted).abs() < 1e-12,
                "k={k} theta={theta}: {} vs {predicted}",
                apply(t2)
            );
        }
    }

    #[test]
    fn sampled_matches_closed_form_application() {
        let phi = phi2(0.9);
        let p = phi.params;
        let f = SampledDensity::from_fn(129, |t| phi.eval(t)).unwrap();
        for &t in &[0.0, 0.2, 0.5, 0.77, 1.0] {
            let a = apply_hammerstein(DensityRef::Closed(&phi), t).unwrap();
            let b = apply_hammerstein(DensityRef::Sampled(&p, &f), t).unwrap();
            assert!((a - b).abs() < 1e-12, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn sampled_density_validation_and_interpolation() {
        assert!(SampledDensity::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SampledDensity::new(vec![0.1, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SampledDensity::new(vec![0.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(SampledDensity::new(vec![0.0, 0.0, 1.0], vec![1.0; 3]).is_err());
        assert!(SampledDensity::new(vec![0.0, 1.0], vec![f64::NAN, 1.0]).is_err());

        // Functions polynomial in w interpolate exactly off-grid.
        let f = SampledDensity::from_fn(33, |t| {
            let e = basis_unchecked(t);
            0.3 + 0.5 * e + 0.25 * e * e * e
        })
        .unwrap();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let e = basis_unchecked(t);
            let exact = 0.3 + 0.5 * e + 0.25 * e * e * e;
            assert!((f.eval(t) - exact).abs() < 1e-14, "t = {t}");
        }
    }

    #[test]
    fn consistency_map_fixes_constants() {
        let p = params(2, 0.9);
        let one = SampledDensity::from_fn(65, |_| 1.0).unwrap();
        let mapped = consistency_map(&p, &one).unwrap();
        assert!(mapped.sup_distance(&one).unwrap() < 1e-14);
        // Any positive constant maps to the constant one.
        let c = SampledDensity::from_fn(65, |_| 7.3).unwrap();
        let mapped = consistency_map(&p, &c).unwrap();
        assert!(mapped.sup_distance(&one).unwrap() < 1e-13);
    }

    #[test]
    fn consistency_map_rejects_nonpositive_input() {
        let p = params(2, 0.5);
        let f = SampledDensity::from_fn(17, |t| t - 0.5).unwrap();
        assert!(matches!(
            consistency_map(&p, &f),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn lift_of_fixed_point_solves_consistency_equation() {
        let phi = phi2(0.9);
        let lifted = lift_fixed_point(&phi).unwrap();
        assert!((lifted.eval(0.0) - 1.0).abs() < 1e-14);
        let res = consistency_residual(&phi.params, &lifted).unwrap();
        assert!(res < 1e-9, "{res}");
        // The flipped branch lifts to a genuinely different solution.
        let lifted_flip = lift_fixed_point(&phi.flip()).unwrap();
        assert!(lifted.sup_distance(&lifted_flip).unwrap() > 0.1);
    }

    #[test]
    fn lift_rejects_nonpositive_and_uncertified() {
        let p = params(2, 0.9);
        let zero = ClosedFormDensity::new(0.0, 0.0, p);
        assert!(matches!(
            lift_fixed_point(&zero),
            Err(Error::NotPositive { .. })
        ));
        let not_fixed = ClosedFormDensity::new(0.5, 0.0, p);
        assert!(matches!(
            lift_fixed_point(&not_fixed),
            Err(Error::NotCertified(_))
        ));
    }

    #[test]
    fn picard_fixed_point_converges_immediately() {
        let p = params(3, 0.8);
        let one = SampledDensity::from_fn(65, |_| 1.0).unwrap();
        let out = picard_iterate(&p, &one, 50, 1e-12).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn picard_uniqueness_regime_recovers_constant() {
        let p = params(2, 0.5);
        let f0 = SampledDensity::from_fn(129, |t| 1.0 + 0.1 * basis_unchecked(t)).unwrap();
        let out = picard_iterate(&p, &f0, 500, 1e-12).unwrap();
        assert!(out.converged);
        let one = SampledDensity::from_fn(129, |_| 1.0).unwrap();
        assert!(out.density.sup_distance(&one).unwrap() < 1e-8);
        let res = consistency_residual(&p, &out.density).unwrap();
        assert!(res <= 10.0 * 1e-12, "{res}");
    }

    #[test]
    fn picard_broken_regime_converges_to_some_fixed_point() {
        let p = params(2, 0.9);
        let f0 = SampledDensity::from_fn(129, |t| 1.0 + 0.5 * basis_unchecked(t)).unwrap();
        let out = picard_iterate(&p, &f0, 2000, 1e-12).unwrap();
        assert!(out.converged, "stalled after {} iterations", out.iterations);
        let res = consistency_residual(&p, &out.density).unwrap();
        assert!(res < 1e-8, "{res}");
        let proj = project_onto_family(&p, &out.density).unwrap();
        assert!(proj.sup_error < 1e-7, "{}", proj.sup_error);
    }

    #[test]
    fn csv_round_trip() {
        let f = SampledDensity::from_fn(17, |t| 1.0 + 0.25 * basis_unchecked(t)).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf, &["demo".to_string()]).unwrap();
        let parsed = SampledDensity::read_csv(&buf[..]).unwrap();
        assert_eq!(f, parsed);
    }
}
