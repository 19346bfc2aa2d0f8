//! The finite-dimensional reduction of the fixed-point problem.
//!
//! Every continuous fixed point of `H_k` has the form
//! `phi(t) = x + y*theta*e(t)`, and `(x, y)` must be a fixed point of the
//! plane map
//!
//! ```text
//! V_k(x, y) = ( integral phi^k(u) du,  integral cbrt(u-1/2) phi^k(u) du )
//! ```
//!
//! Three evaluation routes are kept side by side and cross-checked:
//!
//! * [`apply_vk`] — the binomial/moment expansion, regular everywhere
//!   (primary path);
//! * [`apply_vk_closedform`] — the literal power-sum expression, which
//!   divides by powers of `y*theta` and is evaluated in double-double to
//!   survive the cancellation near its removable singularity (fidelity
//!   path);
//! * [`moment_integrals`] — direct quadrature of the two integrals
//!   (oracle path).
//!
//! Fixed points are produced analytically for `k = 2, 3`, where the root
//! sets are known in closed form and complete, and by damped-Newton
//! multistart for any other order, where completeness is reported, not
//! claimed.

use serde::Serialize;

use crate::dd::{cbrt2_dd, Dd};
use crate::error::{Error, Result};
use crate::hammerstein::{hammerstein_residual, ClosedFormDensity, DensityRef};
use crate::kernel::{cbrt2, real_cbrt, ModelParams};
use crate::quadrature::{integrate_unit, QuadratureRule};

/// Residual bound every reported fixed point must satisfy.
pub const REPORT_RESIDUAL_TOL: f64 = 1e-10;

/// Tolerance for the positivity and degeneracy classifications.
pub const CLASS_TOL: f64 = 1e-12;

/// Guard below which the literal closed form refuses to divide.
pub const SINGULAR_GUARD: f64 = 1e-12;

/// Default multistart grid density per axis.
pub const DEFAULT_GRID_DENSITY: usize = 16;

/// Default deduplication tolerance in the sup norm.
pub const DEFAULT_DEDUPE_TOL: f64 = 1e-8;

const NEWTON_MAX_STEPS: usize = 50;
const NEWTON_CONVERGED: f64 = 1e-12;
const MULTISTART_BOX: f64 = 2.0;

/// A point `(x, y)` of the reduction plane, identified with the
/// coefficients of `phi(t) = x + y*theta*e(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentPair {
    pub x: f64,
    pub y: f64,
}

impl MomentPair {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

/// Classification of a fixed point by the sign behaviour of its density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointClass {
    #[serde(rename = "trivial-zero")]
    TrivialZero,
    #[serde(rename = "constant-one")]
    ConstantOne,
    #[serde(rename = "positive-nontrivial")]
    PositiveNontrivial,
    #[serde(rename = "sign-changing")]
    SignChanging,
    #[serde(rename = "negative")]
    Negative,
}

impl PointClass {
    /// Whether the density is strictly positive, i.e. the point counts as a
    /// Gibbs measure.
    pub fn is_positive(self) -> bool {
        matches!(self, PointClass::ConstantOne | PointClass::PositiveNontrivial)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PointClass::TrivialZero => "trivial-zero",
            PointClass::ConstantOne => "constant-one",
            PointClass::PositiveNontrivial => "positive-nontrivial",
            PointClass::SignChanging => "sign-changing",
            PointClass::Negative => "negative",
        }
    }
}

/// A fixed point with its classification and both residual certificates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifiedPoint {
    pub x: f64,
    pub y: f64,
    pub class: PointClass,
    pub residual_vk: f64,
    pub residual_hk: f64,
}

impl ClassifiedPoint {
    pub fn point(&self) -> MomentPair {
        MomentPair::new(self.x, self.y)
    }
}

/// Enumerated fixed points of `V_k` at one parameter point.
#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub params: ModelParams,
    pub points: Vec<ClassifiedPoint>,
    pub count_positive: usize,
    /// Whether the root set is provably complete (analytic branch) or just
    /// what the multistart found.
    pub complete: bool,
    /// Multistart starts that failed to converge (0 for the analytic branch).
    pub non_converged_starts: usize,
}

impl FixedPointReport {
    /// The documented structured form: a single object with fields
    /// `k`, `theta`, `points[{x, y, class, residual_vk, residual_hk}]`,
    /// `count_positive`.
    pub fn to_json(&self) -> String {
        let obj = serde_json::json!({
            "k": self.params.k(),
            "theta": self.params.theta(),
            "points": self.points,
            "count_positive": self.count_positive,
        });
        serde_json::to_string_pretty(&obj).expect("report serialization")
    }

    /// Positive-class points, the branches that carry Gibbs measures,
    /// ordered constant-one first and then by descending `y`.
    pub fn positive_points(&self) -> Vec<ClassifiedPoint> {
        let mut pos: Vec<ClassifiedPoint> = self
            .points
            .iter()
            .copied()
            .filter(|p| p.class.is_positive())
            .collect();
        pos.sort_by(|a, b| {
            let rank = |p: &ClassifiedPoint| if p.class == PointClass::ConstantOne { 0 } else { 1 };
            rank(a)
                .cmp(&rank(b))
                .then(b.y.partial_cmp(&a.y).unwrap())
                .then(b.x.partial_cmp(&a.x).unwrap())
        });
        pos
    }
}

/// Coefficient arrays of the polynomial map: `x' = sum_j a[j] x^(k-j) b^j`
/// and `y' = sum_j c[j] x^(k-j) b^j` with `b = y*theta*cbrt(2)`. Even
/// moments only survive in the x row, odd ones in the y row.
fn vk_coefficients(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; k + 1];
    let mut ys = vec![0.0; k + 1];
    let mut binom = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        // M_m = integral_{-1}^1 w^m dw.
        let m2 = j + 2;
        let m3 = j + 3;
        if m2 % 2 == 0 {
            xs[j] = 1.5 * binom * 2.0 / (m2 as f64 + 1.0);
        }
        if m3 % 2 == 0 {
            ys[j] = 1.5 / cbrt2() * binom * 2.0 / (m3 as f64 + 1.0);
        }
    }
    (xs, ys)
}

/// Evaluates `V_k` by the binomial/moment expansion. Polynomial in
/// `(x, y)`, regular at `y = 0`.
pub fn apply_vk(params: &ModelParams, p: &MomentPair) -> MomentPair {
    let (xs, ys) = vk_coefficients(params.k());
    let b = p.y * params.theta() * cbrt2();
    let k = params.k();
    let mut x_out = 0.0;
    let mut y_out = 0.0;
    for j in 0..=k {
        let term = p.x.powi((k - j) as i32) * b.powi(j as i32);
        x_out += xs[j] * term;
        y_out += ys[j] * term;
    }
    MomentPair::new(x_out, y_out)
}

/// `V_k` together with its Jacobian, for Newton iteration.
fn apply_vk_with_jacobian(params: &ModelParams, p: &MomentPair) -> (MomentPair, [[f64; 2]; 2]) {
    let (xs, ys) = vk_coefficients(params.k());
    let scale = params.theta() * cbrt2(); // db/dy
    let b = p.y * scale;
    let k = params.k();
    let mut x_out = 0.0;
    let mut y_out = 0.0;
    let mut dx_dx = 0.0;
    let mut dx_db = 0.0;
    let mut dy_dx = 0.0;
    let mut dy_db = 0.0;
    for j in 0..=k {
        let xp = p.x.powi((k - j) as i32);
        let bp = b.powi(j as i32);
        x_out += xs[j] * xp * bp;
        y_out += ys[j] * xp * bp;
        if k > j {
            let d = (k - j) as f64 * p.x.powi((k - j - 1) as i32) * bp;
            dx_dx += xs[j] * d;
            dy_dx += ys[j] * d;
        }
        if j > 0 {
            let d = j as f64 * xp * b.powi(j as i32 - 1);
            dx_db += xs[j] * d;
            dy_db += ys[j] * d;
        }
    }
    (
        MomentPair::new(x_out, y_out),
        [[dx_dx, dx_db * scale], [dy_dx, dy_db * scale]],
    )
}

/// Evaluates the literal closed-form expression for `V_k`: power sums of
/// `x +/- y*theta*cbrt(2)` divided by powers of `y*theta`.
///
/// The divisions make the expression singular at `y*theta = 0` (the
/// singularity of the underlying function is removable); inputs with
/// `|y*theta|` at or below [`SINGULAR_GUARD`] are rejected. Internally the
/// whole expression runs in double-double arithmetic: near the guard the
/// four terms cancel to many orders of magnitude, and plain f64 would not
/// hold the documented agreement with the regular path.
pub fn apply_vk_closedform(params: &ModelParams, p: &MomentPair) -> Result<MomentPair> {
    let c = p.y * params.theta();
    if c.abs() <= SINGULAR_GUARD {
        return Err(Error::ClosedFormSingular {
            value: c.abs(),
            guard: SINGULAR_GUARD,
        });
    }
    let k = params.k();
    let r2 = cbrt2_dd();
    let r4 = r2.mul(r2);
    let x = Dd::from_f64(p.x);
    let c_dd = Dd::from_f64(c);
    let b = c_dd.mul(r2);
    let a_base = x.add(b);
    let b_base = x.sub(b);
    let pow_sum = |m: usize| a_base.powi(m).add(b_base.powi(m));
    let pow_diff = |m: usize| a_base.powi(m).sub(b_base.powi(m));
    let kf = |n: usize| (k + n) as f64;

    // x' = 3 [ S_{k+1} / (2 cbrt2 (k+1) c)
    //        - P_{k+2} / (cbrt4 (k+1)(k+2) c^2)
    //        + S_{k+3} / (2 (k+1)(k+2)(k+3) c^3) ]
    let t1 = pow_diff(k + 1).div(r2.scale(2.0 * kf(1)).mul(c_dd));
    let t2 = pow_sum(k + 2).div(r4.scale(kf(1) * kf(2)).mul(c_dd.powi(2)));
    let t3 = pow_diff(k + 3).div(c_dd.powi(3).scale(2.0 * kf(1) * kf(2) * kf(3)));
    let x_out = t1.sub(t2).add(t3).scale(3.0);

    // y' = 3 [ P_{k+1} / (2 cbrt4 (k+1) c)
    //        - 3 S_{k+2} / (4 (k+1)(k+2) c^2)
    //        + 3 P_{k+3} / (2 cbrt2 (k+1)(k+2)(k+3) c^3)
    //        - 3 S_{k+4} / (2 cbrt4 (k+1)(k+2)(k+3)(k+4) c^4) ]
    let s1 = pow_sum(k + 1).div(r4.scale(2.0 * kf(1)).mul(c_dd));
    let s2 = pow_diff(k + 2)
        .scale(3.0)
        .div(c_dd.powi(2).scale(4.0 * kf(1) * kf(2)));
    let s3 = pow_sum(k + 3)
        .scale(3.0)
        .div(r2.scale(2.0 * kf(1) * kf(2) * kf(3)).mul(c_dd.powi(3)));
    let s4 = pow_diff(k + 4)
        .scale(3.0)
        .div(r4.scale(2.0 * kf(1) * kf(2) * kf(3) * kf(4)).mul(c_dd.powi(4)));
    let y_out = s1.sub(s2).add(s3).sub(s4).scale(3.0);

    Ok(MomentPair::new(x_out.to_f64(), y_out.to_f64()))
}

/// Evaluates the two moment integrals by direct quadrature of the density.
/// Independent of both algebraic routes; used as the oracle leg of the
/// three-way agreement check.
pub fn moment_integrals(
    params: &ModelParams,
    p: &MomentPair,
    rule: &QuadratureRule,
) -> Result<MomentPair> {
    let phi = ClosedFormDensity::new(p.x, p.y, *params);
    let k = params.k() as i32;
    let x_out = integrate_unit(|u| phi.eval(u).powi(k), rule)?;
    let y_out = integrate_unit(|u| real_cbrt(u - 0.5) * phi.eval(u).powi(k), rule)?;
    Ok(MomentPair::new(x_out, y_out))
}

/// Sup-norm fixed-point residual under the regular evaluation path.
pub fn residual_vk(params: &ModelParams, p: &MomentPair) -> f64 {
    apply_vk(params, p).sup_distance(p)
}

/// Classifies a plane point by the sign behaviour of its density
/// `phi(t) = x + y*theta*e(t)`; the extrema of `phi` sit at the endpoints,
/// so the exact criterion `x > |y|*theta*cbrt(2)` decides positivity.
pub fn classify(params: &ModelParams, p: &MomentPair) -> PointClass {
    let spread = p.y.abs() * params.theta() * cbrt2();
    if p.x.abs() <= CLASS_TOL && p.y.abs() <= CLASS_TOL {
        PointClass::TrivialZero
    } else if (p.x - 1.0).abs() <= CLASS_TOL && p.y.abs() <= CLASS_TOL {
        PointClass::ConstantOne
    } else if p.x - spread > CLASS_TOL {
        PointClass::PositiveNontrivial
    } else if p.x + spread < -CLASS_TOL {
        PointClass::Negative
    } else {
        PointClass::SignChanging
    }
}

/// The density behind a plane point: `phi(t) = x + y*theta*e(t)`.
pub fn to_density(p: &MomentPair, params: &ModelParams) -> ClosedFormDensity {
    ClosedFormDensity::new(p.x, p.y, *params)
}

fn classify_and_certify(params: &ModelParams, points: Vec<MomentPair>) -> Result<Vec<ClassifiedPoint>> {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let phi = to_density(&p, params);
        out.push(ClassifiedPoint {
            x: p.x,
            y: p.y,
            class: classify(params, &p),
            residual_vk: residual_vk(params, &p),
            residual_hk: hammerstein_residual(DensityRef::Closed(&phi), 129)?,
        });
    }
    // Deterministic order: descending x, then descending y.
    out.sort_by(|a, b| {
        b.x.partial_cmp(&a.x)
            .unwrap()
            .then(b.y.partial_cmp(&a.y).unwrap())
    });
    Ok(out)
}

fn assemble_report(
    params: &ModelParams,
    points: Vec<MomentPair>,
    complete: bool,
    non_converged_starts: usize,
) -> Result<FixedPointReport> {
    let points = classify_and_certify(params, points)?;
    let count_positive = points.iter().filter(|p| p.class.is_positive()).count();
    Ok(FixedPointReport {
        params: *params,
        points,
        count_positive,
        complete,
        non_converged_starts,
    })
}

/// The complete closed-form root set of `V_k` for `k = 2` or `k = 3`.
///
/// For k = 2: `(0,0)` and `(1,0)` always, plus the symmetry-broken pair
/// `(5/(6 theta), +/- y1)` exactly when `theta > 5/6`. For k = 3: `(0,0)`,
/// `(+/-1, 0)` and the axis pair `(0, +/- y_a)` always (the axis pair needs
/// `theta > 0`), plus four off-axis roots exactly when `theta > 5/9`.
pub fn analytic_fixed_points(params: &ModelParams) -> Result<FixedPointReport> {
    let theta = params.theta();
    let mut pts = vec![MomentPair::new(0.0, 0.0)];
    match params.k() {
        2 => {
            pts.push(MomentPair::new(1.0, 0.0));
            if theta > 5.0 / 6.0 {
                let x1 = 5.0 / (6.0 * theta);
                let y1 =
                    5.0 / (6.0 * theta * theta) / cbrt2() * ((6.0 * theta - 5.0) / 3.0).sqrt();
                pts.push(MomentPair::new(x1, y1));
                pts.push(MomentPair::new(x1, -y1));
            }
        }
        3 => {
            pts.push(MomentPair::new(1.0, 0.0));
            pts.push(MomentPair::new(-1.0, 0.0));
            if theta > 0.0 {
                let ya = 2.0_f64.powf(1.0 / 6.0) / theta * (7.0 / (6.0 * theta)).sqrt();
                pts.push(MomentPair::new(0.0, ya));
                pts.push(MomentPair::new(0.0, -ya));
            }
            if theta > 5.0 / 9.0 {
                let y2 = (105.0_f64 / 164.0).sqrt() / (theta * cbrt2())
                    * ((9.0 * theta - 5.0) / (9.0 * theta)).sqrt();
                let x1 = (1.0 - 21.0 / 164.0 * (9.0 * theta - 5.0) / theta).sqrt();
                for &(sx, sy) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    pts.push(MomentPair::new(sx * x1, sy * y2));
                }
            }
        }
        k => return Err(Error::UnsupportedBranchingOrder(k)),
    }
    assemble_report(params, pts, true, 0)
}

/// Damped Newton iteration on `G(p) = V_k(p) - p` from one start.
fn newton_from(params: &ModelParams, start: MomentPair) -> Option<MomentPair> {
    let mut p = start;
    let (mut image, mut jac) = apply_vk_with_jacobian(params, &p);
    let mut res = image.sup_distance(&p);
    for _ in 0..NEWTON_MAX_STEPS {
        if res < NEWTON_CONVERGED {
            return Some(p);
        }
        let g = (image.x - p.x, image.y - p.y);
        let j = [
            [jac[0][0] - 1.0, jac[0][1]],
            [jac[1][0], jac[1][1] - 1.0],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dx = (-g.0 * j[1][1] + g.1 * j[0][1]) / det;
        let dy = (-j[0][0] * g.1 + j[1][0] * g.0) / det;
        // Halve the step until the residual stops increasing.
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..25 {
            let trial = MomentPair::new(p.x + lambda * dx, p.y + lambda * dy);
            let (t_image, t_jac) = apply_vk_with_jacobian(params, &trial);
            let t_res = t_image.sup_distance(&trial);
            if t_res.is_finite() && t_res < res {
                p = trial;
                image = t_image;
                jac = t_jac;
                res = t_res;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    (res < NEWTON_CONVERGED).then_some(p)
}

/// The default multistart set: a `grid_density`-per-axis grid over the
/// box `[-2, 2]^2`, plus the two coordinate axes. The axes are invariant
/// under `V_k`, and roots on them (the k = 3 axis pair leaves the box at
/// small coupling) are found far more reliably from axis starts.
fn standard_starts(grid_density: usize) -> Vec<MomentPair> {
    let coords: Vec<f64> = (0..grid_density)
        .map(|i| -MULTISTART_BOX + 2.0 * MULTISTART_BOX * i as f64 / (grid_density - 1) as f64)
        .collect();
    let mut starts = Vec::with_capacity(grid_density * (grid_density + 2));
    for &x in &coords {
        for &y in &coords {
            starts.push(MomentPair::new(x, y));
        }
    }
    for &c in &coords {
        starts.push(MomentPair::new(0.0, c));
        starts.push(MomentPair::new(c, 0.0));
    }
    starts
}

/// Newton multistart enumeration of the fixed points of `V_k`.
///
/// Converged roots are deduplicated within `dedupe_tol` in the sup norm and
/// certified to residual below `1e-10`. For `k` outside `{2, 3}` the result
/// is "found these roots", never a completeness claim.
pub fn enumerate_fixed_points(
    params: &ModelParams,
    grid_density: usize,
    dedupe_tol: f64,
) -> Result<FixedPointReport> {
    enumerate_with_starts(params, &[], grid_density, dedupe_tol)
}

/// [`enumerate_fixed_points`] with extra warm starts tried before the
/// standard grid (used by sweep continuation).
pub fn enumerate_with_starts(
    params: &ModelParams,
    warm_starts: &[MomentPair],
    grid_density: usize,
    dedupe_tol: f64,
) -> Result<FixedPointReport> {
    if grid_density < 4 {
        return Err(Error::InvalidInput(format!(
            "grid_density = {grid_density}, need at least 4"
        )));
    }
    if !(dedupe_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dedupe_tol = {dedupe_tol}, need > 0"
        )));
    }
    let mut roots: Vec<MomentPair> = Vec::new();
    let mut non_converged = 0usize;
    let starts = warm_starts
        .iter()
        .copied()
        .chain(standard_starts(grid_density));
    for start in starts {
        match newton_from(params, start) {
            Some(root) => {
                if residual_vk(params, &root) < REPORT_RESIDUAL_TOL
                    && !roots.iter().any(|r| r.sup_distance(&root) < dedupe_tol)
                {
                    roots.push(root);
                }
            }
            None => non_converged += 1,
        }
    }
    assemble_report(params, roots, false, non_converged)
}
