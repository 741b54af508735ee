use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("r-grid mismatch between operands")]
    GridMismatch,

    #[error("x-grid mismatch: {0}")]
    XGridMismatch(String),

    #[error("invalid r-grid: {0}")]
    InvalidRGrid(String),

    #[error("invalid x-grid: {0}")]
    InvalidXGrid(String),

    #[error("non-uniform grid: spacing deviates by {deviation:e} (relative)")]
    NonUniformGrid { deviation: f64 },

    #[error("fuzzy number violates stacking conditions: {0}")]
    Stacking(String),

    #[error("fractional order {0} outside the open interval (0,1)")]
    InvalidOrder(f64),

    #[error("integral order {0} outside (0,1]")]
    InvalidIntegralOrder(f64),

    #[error("invalid gH case {0}, expected 1 or 2")]
    InvalidGhCase(i64),

    #[error("invalid triangular fuzzy number <{0}, {1}, {2}>")]
    InvalidTriangular(f64, f64, f64),

    #[error("non-finite Lagrangian value at node {node} (x = {x}, r = {r})")]
    NonFinite { node: usize, x: f64, r: f64 },

    #[error("analytic partial d{arg} of the {bound} integrand disagrees with finite differences: {analytic} vs {numeric}")]
    PartialMismatch {
        bound: &'static str,
        arg: &'static str,
        analytic: f64,
        numeric: f64,
    },

    #[error("non-finite curve value or derivative at x = {x} (r = {r})")]
    NonFiniteCurve { x: f64, r: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("inner-interval endpoint {0} is not a grid node")]
    GridAlignment(f64),

    #[error("no sign change of the transversality residual on [{lo}, {hi}]: f(lo) = {flo:e}, f(hi) = {fhi:e}")]
    NoSignChange { lo: f64, hi: f64, flo: f64, fhi: f64 },

    #[error("flat transversality residual on [{lo}, {hi}] (max |f| = {max_abs:e}); the terminal point is not isolated")]
    NonIsolatedRoot { lo: f64, hi: f64, max_abs: f64 },

    #[error("singular Jacobian (condition estimate {cond:e})")]
    SingularJacobian { cond: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
