//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("argument {name} = {value} outside [0, 1]")]
    Domain { name: &'static str, value: f64 },

    #[error("quadrature order {0} unsupported (need at least 2)")]
    UnsupportedOrder(usize),

    #[error("non-finite integrand value at node u = {node}")]
    NonFiniteEvaluation { node: f64 },

    #[error("consistency denominator {value:e} at or below tolerance {tol:e}")]
    DegenerateDenominator { value: f64, tol: f64 },

    #[error("density not strictly positive (minimum {min:e})")]
    NotPositive { min: f64 },

    #[error("iteration exceeded the overflow guard (sup {sup:e})")]
    Divergence { sup: f64 },

    #[error("closed-form map singular: |y*theta| = {value:e} at or below guard {guard:e}")]
    ClosedFormSingular { value: f64, guard: f64 },

    #[error("analytic enumeration supports k in {{2, 3}}, got k = {0}")]
    UnsupportedBranchingOrder(usize),

    #[error("invalid sweep range: {0}")]
    InvalidRange(String),

    #[error("invalid threshold bracket: {0}")]
    BracketInvalid(String),

    #[error("not a certified fixed point: {0}")]
    NotCertified(String),

    #[error("volume of {spins} spins exceeds the tensor-quadrature limit of {limit}")]
    DimensionLimit { spins: usize, limit: usize },

    #[error("no fixed-point branch {index} at k = {k}, theta = {theta} ({count} positive branches)")]
    NoSuchBranch {
        index: usize,
        k: usize,
        theta: f64,
        count: usize,
    },

    #[error("tree depth {depth} exceeds the desk-scale limit {limit}")]
    DepthLimit { depth: usize, limit: usize },

    #[error("{0}")]
    InvalidInput(String),
}
