//! Built-in problems with known solutions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frac_ops::XGrid;
use crate::fuzzy_core::{FuzzyNumber, RGrid};
use crate::transversality::{FnCurve, FreeEndpointProblem};
use crate::variational::{Arg, Boundary, Bound, Lagrangian, LagrangianPoint, Order, ProblemSpec};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["example2", "example3", "quadratic-crisp"];

/// Free-end quadratic with boundary penalties:
/// `L_lower = (dcl^2 + (3-r) yla^2 + 3 (ylb-1)^2) / 2`, `L_upper = (dcu^2 + (r+1) yua^2 + 3 (yub-1)^2) / 2`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Example2;

impl Lagrangian for Example2 {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        let r = p.r;
        match bound {
            Bound::Lower => {
                0.5 * (p[Arg::Dcl].powi(2) + (3.0 - r) * p[Arg::Yla].powi(2) + 3.0 * (p[Arg::Ylb] - 1.0).powi(2))
            }
            Bound::Upper => {
                0.5 * (p[Arg::Dcu].powi(2) + (r + 1.0) * p[Arg::Yua].powi(2) + 3.0 * (p[Arg::Yub] - 1.0).powi(2))
            }
        }
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        let r = p.r;
        Some(match (bound, arg) {
            (Bound::Lower, Arg::Dcl) => p[Arg::Dcl],
            (Bound::Lower, Arg::Yla) => (3.0 - r) * p[Arg::Yla],
            (Bound::Lower, Arg::Ylb) => 3.0 * (p[Arg::Ylb] - 1.0),
            (Bound::Upper, Arg::Dcu) => p[Arg::Dcu],
            (Bound::Upper, Arg::Yua) => (r + 1.0) * p[Arg::Yua],
            (Bound::Upper, Arg::Yub) => 3.0 * (p[Arg::Yub] - 1.0),
            _ => 0.0,
        })
    }
}

/// Classical minimiser of [`Example2`] on [0,1].
pub fn example2_closed_form(r: f64, x: f64) -> (f64, f64) {
    (
        ((9.0 - 3.0 * r) * x + 3.0) / (15.0 - 4.0 * r),
        ((3.0 * r + 3.0) * x + 3.0) / (4.0 * r + 7.0),
    )
}

/// Example 2 on [0,1] with free ends.
pub fn example2(alpha: Order, nodes: usize, rgrid: RGrid) -> Result<ProblemSpec> {
    ProblemSpec::builder(Arc::new(Example2))
        .name("example2")
        .xgrid(XGrid::new(0.0, 1.0, nodes)?)
        .rgrid(rgrid)
        .orders(alpha)
        .build()
}

/// `L = dc^2 x^3` on both bounds.
#[derive(Clone, Copy, Debug, Default)]
pub struct Example3;

impl Lagrangian for Example3 {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        let d = match bound {
            Bound::Lower => p[Arg::Dcl],
            Bound::Upper => p[Arg::Dcu],
        };
        d * d * p[Arg::X].powi(3)
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        let x3 = p[Arg::X].powi(3);
        Some(match (bound, arg) {
            (Bound::Lower, Arg::Dcl) => 2.0 * p[Arg::Dcl] * x3,
            (Bound::Upper, Arg::Dcu) => 2.0 * p[Arg::Dcu] * x3,
            (Bound::Lower, Arg::X) => 3.0 * p[Arg::Dcl].powi(2) * p[Arg::X].powi(2),
            (Bound::Upper, Arg::X) => 3.0 * p[Arg::Dcu].powi(2) * p[Arg::X].powi(2),
            _ => 0.0,
        })
    }
}

/// Left boundary value of Example 3, the triangular number <-1, 0, 1>.
pub fn example3_left(rgrid: &RGrid) -> FuzzyNumber {
    crate::fuzzy_core::TriangularFuzzyNumber::new(-1.0, 0.0, 1.0)
        .expect("valid triangle")
        .expand(rgrid)
}

/// Lower and upper terminal curves of Example 3.
pub fn example3_curve(r: f64, x: f64) -> (f64, f64) {
    ((r + 1.0) / (x * x) - 4.0 + r, (3.0 - r) / (x * x) - (2.0 + r))
}

/// x-derivative of [`example3_curve`].
pub fn example3_curve_derivative(r: f64, x: f64) -> (f64, f64) {
    (-2.0 * (r + 1.0) / x.powi(3), -2.0 * (3.0 - r) / x.powi(3))
}

/// Classical solution of Example 3 on [1, sqrt 2].
pub fn example3_closed_form(r: f64, x: f64) -> (f64, f64) {
    (
        2.0 * (r + 1.0) / (x * x) - r - 3.0,
        2.0 * (3.0 - r) / (x * x) + r - 5.0,
    )
}

/// Terminal point of Example 3's classical solution.
pub const EXAMPLE3_B_STAR: f64 = std::f64::consts::SQRT_2;

/// Example 3 as a free-endpoint problem: a = 1, y(1) = <-1, 0, 1>, terminal curve [`example3_curve`].
pub fn example3(alpha: Order, nodes: usize, rgrid: RGrid, bracket: (f64, f64)) -> Result<FreeEndpointProblem> {
    let curve = FnCurve::new(|r, x| example3_curve(r, x).0, |r, x| example3_curve(r, x).1)
        .with_slopes(example3_curve_derivative);
    let left = example3_left(&rgrid);
    FreeEndpointProblem::new(Arc::new(Example3), Arc::new(curve), 1.0, left, bracket)?
        .with_rgrid(rgrid)
        .map(|p| p.with_name("example3").with_alpha(alpha).with_nodes(nodes))
}

/// `L = (dc^2 + y^2)/2` on both bounds with crisp ends y(0)=0, y(1)=1.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticCrisp;

impl Lagrangian for QuadraticCrisp {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        match bound {
            Bound::Lower => 0.5 * (p[Arg::Dcl].powi(2) + p[Arg::Yl].powi(2)),
            Bound::Upper => 0.5 * (p[Arg::Dcu].powi(2) + p[Arg::Yu].powi(2)),
        }
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        Some(match (bound, arg) {
            (Bound::Lower, Arg::Dcl) => p[Arg::Dcl],
            (Bound::Lower, Arg::Yl) => p[Arg::Yl],
            (Bound::Upper, Arg::Dcu) => p[Arg::Dcu],
            (Bound::Upper, Arg::Yu) => p[Arg::Yu],
            _ => 0.0,
        })
    }
}

/// Classical solution `sinh x / sinh 1` of [`QuadraticCrisp`].
pub fn quadratic_crisp_closed_form(_r: f64, x: f64) -> (f64, f64) {
    let v = x.sinh() / 1f64.sinh();
    (v, v)
}

pub fn quadratic_crisp(alpha: Order, nodes: usize, rgrid: RGrid) -> Result<ProblemSpec> {
    let zero = FuzzyNumber::crisp(&rgrid, 0.0);
    let one = FuzzyNumber::crisp(&rgrid, 1.0);
    ProblemSpec::builder(Arc::new(QuadraticCrisp))
        .name("quadratic-crisp")
        .xgrid(XGrid::new(0.0, 1.0, nodes)?)
        .rgrid(rgrid)
        .orders(alpha)
        .left(Boundary::Fixed(zero))
        .right(Boundary::Fixed(one))
        .build()
}

/// Closed-form reference of a fixed-endpoint built-in.
pub fn closed_form(name: &str) -> Option<fn(f64, f64) -> (f64, f64)> {
    match name {
        "example2" => Some(example2_closed_form),
        "example3" => Some(example3_closed_form),
        "quadratic-crisp" => Some(quadratic_crisp_closed_form),
        _ => None,
    }
}

/// Fixed-endpoint built-ins by name. Example 3 is a free-endpoint problem; see the transversality module.
pub fn builtin(name: &str, alpha: Order, nodes: usize, rgrid: RGrid) -> Result<ProblemSpec> {
    match name {
        "example2" => example2(alpha, nodes, rgrid),
        "quadratic-crisp" => quadratic_crisp(alpha, nodes, rgrid),
        other => Err(Error::InvalidProblem(format!(
            "unknown built-in problem '{other}' (expected example2 or quadratic-crisp)"
        ))),
    }
}
