//! Gauss-Legendre quadrature with a cube-root substitution.
//!
//! Integrals over `[0, 1]` in this crate routinely contain factors of
//! `e(u) = cbrt(4(u-1/2))`, whose derivative blows up at the midpoint. The
//! change of variable `u = 1/2 + w^3/2` maps `[-1, 1]` onto `[0, 1]`, sends
//! `e(u)` to `cbrt(2) * w`, and carries the Jacobian `(3/2) w^2`:
//!
//! ```text
//! integral_0^1 h(u) du  =  (3/2) integral_{-1}^{1} h(1/2 + w^3/2) w^2 dw
//! ```
//!
//! Any integrand polynomial in `e(u)` becomes polynomial in `w`, so a small
//! Gauss rule integrates it exactly. [`integrate_unit`] applies the
//! substitution to a function of `u`; [`integrate_cube_substituted`] takes
//! the integrand already expressed as a function of `w`.
//!
//! Nodes and weights are generated at first use by Newton iteration on the
//! Legendre recurrence and cached per order; no tables are bundled.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// A Gauss-Legendre rule on the reference interval `[-1, 1]`.
///
/// An `order`-point rule integrates polynomials of degree `2*order - 1`
/// exactly; the weights are positive and sum to 2.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Legendre `P_n` and `P_n'` at `x` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for m in 2..=n {
        let m_f = m as f64;
        let p_next = ((2.0 * m_f - 1.0) * x * p - (m_f - 1.0) * p_prev) / m_f;
        p_prev = p;
        p = p_next;
    }
    let dp = if n == 0 {
        0.0
    } else {
        n as f64 * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

impl QuadratureRule {
    /// Returns the cached `order`-point Gauss-Legendre rule.
    pub fn gauss_legendre(order: usize) -> Result<Arc<Self>> {
        if order < 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let mut cache = rule_cache().lock().expect("quadrature cache poisoned");
        if let Some(rule) = cache.get(&order) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::compute(order));
        cache.insert(order, Arc::clone(&rule));
        Ok(rule)
    }

    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Roots come in +/- pairs; solve for the positive half and mirror so
        // the rule is exactly symmetric.
        let half = n / 2;
        for i in 0..half {
            // Initial guess for the (i+1)-th largest root.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let dx = -p / dp;
                x += dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[n - 1 - i] = x;
            nodes[i] = -x;
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            let (_, dp) = legendre_with_derivative(n, 0.0);
            nodes[half] = 0.0;
            weights[half] = 2.0 / (dp * dp);
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes mapped to `[0, 1]` by `u = 1/2 + w^3/2`, paired with the
    /// substituted weights `(3/2) lambda w^2`. Summing `f(u_i) * w_i` over
    /// the returned pairs approximates `integral_0^1 f(u) du`; tensor
    /// products of these pairs drive the brute-force volume integrals.
    pub fn unit_nodes_weights(&self) -> Vec<(f64, f64)> {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&w, &lam)| (0.5 + 0.5 * w * w * w, 1.5 * lam * w * w))
            .collect()
    }
}

/// Approximates `integral_0^1 f(u) du` through the cube-root substitution.
///
/// Exact whenever `f` is a polynomial of degree `<= 2*order - 3` in
/// `e(u)`; rapidly convergent for `f` smooth in `u`.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = 0.0;
    for (&w, &lam) in rule.nodes.iter().zip(&rule.weights) {
        let u = 0.5 + 0.5 * w * w * w;
        let v = f(u);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation { node: u });
        }
        acc += lam * v * 1.5 * w * w;
    }
    Ok(acc)
}

/// Computes `(3/2) integral_{-1}^{1} g(w) w^2 dw`, i.e. the unit-interval
/// integral of `h` when `g(w) = h(1/2 + w^3/2)` has already been expressed
/// in the substituted variable.
pub fn integrate_cube_substituted<G: Fn(f64) -> f64>(
    g: G,
    rule: &QuadratureRule,
) -> Result<f64> {
    let mut acc = 0.0;
    for (&w, &lam) in rule.nodes.iter().zip(&rule.weights) {
        let v = g(w);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation { node: w });
        }
        acc += lam * v * 1.5 * w * w;
    }
    Ok(acc)
}
