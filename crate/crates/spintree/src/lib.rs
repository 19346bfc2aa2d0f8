//! Numerical toolkit for translation-invariant Gibbs measures of a
//! nearest-neighbor model with spins in `[0, 1]` on a Cayley tree of
//! branching order `k`.
//!
//! The interaction kernel is `K(t,u) = 1 + theta * cbrt(4(t-1/2)(u-1/2))`
//! with coupling `0 <= theta < 1`. Translation-invariant Gibbs measures of
//! the model correspond to fixed points of the Hammerstein operator
//! `(H_k f)(t) = integral K(t,u) f(u)^k du`, and every continuous fixed
//! point lies in the two-parameter family `phi(t) = x + y*theta*e(t)` with
//! `e(t) = cbrt(4(t-1/2))`. The coefficients `(x, y)` are fixed points of a
//! polynomial plane map, which this crate evaluates, enumerates, and sweeps
//! in the coupling to locate the phase-transition thresholds `5/6` (k = 2)
//! and `5/9` (k = 3).
//!
//! The crate is organized as one module per subsystem:
//!
//! * [`kernel`] — model parameters, the spin basis function, the kernel.
//! * [`quadrature`] — Gauss-Legendre rules with a cube-root substitution
//!   that makes every integral in the family polynomial.
//! * [`hammerstein`] — the operator `H_k`, the normalized consistency map,
//!   residual certificates, and Picard iteration.
//! * [`reduction`] — the plane map on `(x, y)`, analytic root sets for
//!   k = 2 and 3, and Newton multistart enumeration for general k.
//! * [`bifurcation`] — coupling sweeps, fixed-point counts, and threshold
//!   bisection.
//! * [`treesim`] — finite Cayley subtrees: tree-indexed Markov sampling,
//!   brute-force consistency checks, and Monte Carlo observables.
//! * [`verify`] — end-to-end certification of the Gibbs-measure count at
//!   a given `(k, theta)`.

pub mod bifurcation;
mod dd;
pub mod error;
pub mod hammerstein;
pub mod kernel;
pub mod quadrature;
pub mod reduction;
pub mod treesim;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::ModelParams;

/// Formats a float with 17 significant digits, enough for a bit-exact
/// round-trip through text.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
