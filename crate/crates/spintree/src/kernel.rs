//! Model parameters, the spin basis function `e(t)`, and the interaction
//! kernel `K(t, u)`.
//!
//! The kernel is `K(t,u) = 1 + theta * cbrt(4(t-1/2)(u-1/2))`. It factors
//! through the odd basis function `e(t) = cbrt(4(t-1/2))` as
//! `K(t,u) = 1 + theta * e(t) * e(u) / cbrt(4)`, takes values in
//! `[1-theta, 1+theta]`, and is strictly positive for `theta < 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `2^(1/3)`, the sup of `|e|` on `[0, 1]`.
pub(crate) fn cbrt2() -> f64 {
    2.0_f64.cbrt()
}

/// `4^(1/3)`.
pub(crate) fn cbrt4() -> f64 {
    4.0_f64.cbrt()
}

/// Branching order, coupling, and inverse temperature of the model.
///
/// `beta` is recorded for report headers only: the kernel carries a `1/beta`
/// prefactor inside the interaction that cancels on exponentiation, so no
/// numeric path depends on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    k: usize,
    theta: f64,
    beta: f64,
}

impl ModelParams {
    /// Validates `k >= 2`, `0 <= theta < 1`, `beta > 0`.
    ///
    /// `theta = 0` (constant kernel) is allowed; `theta = 1` is rejected
    /// because the kernel would touch zero at the corners of the square.
    pub fn new(k: usize, theta: f64, beta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("k = {k}, need k >= 2")));
        }
        if !theta.is_finite() || !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidParams(format!(
                "theta = {theta}, need 0 <= theta < 1"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParams(format!("beta = {beta}, need beta > 0")));
        }
        Ok(Self { k, theta, beta })
    }

    /// Convenience constructor with `beta = 1`.
    pub fn with_unit_beta(k: usize, theta: f64) -> Result<Self> {
        Self::new(k, theta, 1.0)
    }

    /// Same model at a different coupling.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.k, theta, self.beta)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Real cube root: odd, total on finite reals, `real_cbrt(x)^3 = x` to
/// machine precision. Generic powers are undefined for negative bases,
/// which is why the kernel goes through this instead of `powf`.
pub fn real_cbrt(x: f64) -> f64 {
    x.cbrt()
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain { name, value: v });
    }
    Ok(())
}

pub(crate) fn basis_unchecked(t: f64) -> f64 {
    real_cbrt(4.0 * (t - 0.5))
}

/// The spin basis function `e(t) = cbrt(4(t-1/2))` on `[0, 1]`.
///
/// Odd about `t = 1/2`, with range `[-cbrt(2), cbrt(2)]`.
pub fn basis(t: f64) -> Result<f64> {
    check_unit("t", t)?;
    Ok(basis_unchecked(t))
}

pub(crate) fn kernel_unchecked(theta: f64, t: f64, u: f64) -> f64 {
    1.0 + theta * real_cbrt(4.0 * (t - 0.5) * (u - 0.5))
}

/// The interaction kernel `K(t,u) = 1 + theta * cbrt(4(t-1/2)(u-1/2))`.
///
/// Values lie in `[1-theta, 1+theta]`.
pub fn kernel_eval(params: &ModelParams, t: f64, u: f64) -> Result<f64> {
    check_unit("t", t)?;
    check_unit("u", u)?;
    Ok(kernel_unchecked(params.theta(), t, u))
}
