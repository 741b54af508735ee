//! Caputo and Riemann-Liouville operators on uniform grids.
//!
//! Left operators are anchored at `a`; the right ones are obtained by reflecting
//! `x -> a + b - x`, applying the left operator and reflecting back.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fuzzy_core::RGrid;

const UNIFORM_TOL: f64 = 1e-12;

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Uniform grid on [a,b] with `n >= 3` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct XGrid {
    a: f64,
    b: f64,
    n: usize,
}

impl XGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || !(a < b) {
            return Err(Error::InvalidXGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if n < 3 {
            return Err(Error::InvalidXGrid(format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { a, b, n })
    }

    /// Build from explicit nodes, which must be uniformly spaced.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidXGrid(format!("need at least 3 nodes, got {}", nodes.len())));
        }
        let g = Self::new(nodes[0], nodes[nodes.len() - 1], nodes.len())?;
        let h = g.h();
        let mut worst: f64 = 0.0;
        for w in nodes.windows(2) {
            worst = worst.max(((w[1] - w[0]) - h).abs() / h);
        }
        if worst > UNIFORM_TOL * 1e3 {
            return Err(Error::NonUniformGrid { deviation: worst });
        }
        Ok(g)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Index of the node equal to `x`, within a small fraction of the spacing.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.a) / self.h();
        let i = t.round();
        if i < 0.0 || i as usize >= self.n {
            return None;
        }
        if (t - i).abs() <= 1e-9 {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Grid made of nodes `i0..=i1`.
    pub fn sub(&self, i0: usize, i1: usize) -> Result<Self> {
        if i1 >= self.n || i1 < i0 + 2 {
            return Err(Error::InvalidXGrid(format!("sub-grid {i0}..={i1} needs at least 3 nodes")));
        }
        Self::new(self.node(i0), self.node(i1), i1 - i0 + 1)
    }
}

/// Real values sampled on an [`XGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: XGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: XGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::XGridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &XGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &XGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The function `x -> f(a + b - x)` on the same grid.
    pub fn reflect(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// CSV with header `x,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.grid.node(i), v);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        if header.split(',').map(str::trim).collect::<Vec<_>>() != ["x", "value"] {
            return Err(Error::Parse(format!("expected header x,value, found {header}")));
        }
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected 2 columns", i + 2)));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)));
            xs.push(p(f[0])?);
            vs.push(p(f[1])?);
        }
        let grid = XGrid::from_nodes(&xs)?;
        Self::new(grid, vs)
    }
}

/// Fractional order in the open interval (0,1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidOrder(alpha))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// gH-differentiability case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GhCase {
    #[default]
    One,
    Two,
}

impl GhCase {
    pub fn from_int(c: i64) -> Result<Self> {
        match c {
            1 => Ok(GhCase::One),
            2 => Ok(GhCase::Two),
            _ => Err(Error::InvalidGhCase(c)),
        }
    }

    pub fn as_int(&self) -> i64 {
        match self {
            GhCase::One => 1,
            GhCase::Two => 2,
        }
    }
}

/// `(m+1)^s - m^s` without cancellation for large m.
fn power_step(m: f64, s: f64) -> f64 {
    if m == 0.0 {
        1.0
    } else {
        m.powf(s) * (s * (1.0 / m).ln_1p()).exp_m1()
    }
}

/// Precomputed left Caputo weights (L1 on the first cell, L1-2 on the rest).
#[derive(Clone, Debug)]
pub struct CaputoStencil {
    h: f64,
    /// weight of the first difference on a cell at distance m
    a: Vec<f64>,
    /// weight of the second difference on a cell at distance m
    b: Vec<f64>,
}

impl CaputoStencil {
    pub fn new(n: usize, h: f64, alpha: f64) -> Self {
        let s = 1.0 - alpha;
        let ga = gamma(2.0 - alpha);
        let gb = gamma(3.0 - alpha);
        let hs = h.powf(s);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for m in 0..n {
            let mf = m as f64;
            let d1 = power_step(mf, s);
            let d2 = power_step(mf, 1.0 + s);
            a.push(hs * d1 / ga / h);
            let bm = (2.0 - alpha) * (mf + 0.5) * d1 - s * d2;
            b.push(hs * h * bm / gb / (h * h));
        }
        Self { h, a, b }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Left Caputo derivative of `f` at every node; 0 at the anchor.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let n = f.len();
        out[0] = 0.0;
        let d1: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { f[k] - f[k - 1] }).collect();
        let d2: Vec<f64> = (0..n)
            .map(|k| if k < 2 { 0.0 } else { f[k] - 2.0 * f[k - 1] + f[k - 2] })
            .collect();
        for j in 1..n {
            let mut s = 0.0;
            for k in 1..=j {
                s += self.a[j - k] * d1[k];
            }
            for k in 2..=j {
                s += self.b[j - k] * d2[k];
            }
            out[j] = s;
        }
    }

    pub fn apply_right(&self, f: &[f64], out: &mut [f64]) {
        let rev: Vec<f64> = f.iter().rev().copied().collect();
        self.apply(&rev, out);
        out.reverse();
    }

    /// Dense `n x n` matrix of the left operator.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for j in 1..n {
            for k in 1..=j {
                let w = self.a[j - k];
                m[(j, k)] += w;
                m[(j, k - 1)] -= w;
            }
            for k in 2..=j {
                let w = self.b[j - k];
                m[(j, k)] += w;
                m[(j, k - 1)] -= 2.0 * w;
                m[(j, k - 2)] += w;
            }
        }
        m
    }
}

/// Product-trapezoid weights for the left fractional integral of order `mu` in (0,1].
#[derive(Clone, Debug)]
pub struct IntegralStencil {
    /// weight on the anchor node for an integral ending at node n
    first: Vec<f64>,
    /// weight on an interior node at distance k from the evaluation node
    inner: Vec<f64>,
    /// weight on the evaluation node itself
    last: f64,
}

impl IntegralStencil {
    pub fn new(n: usize, h: f64, mu: f64) -> Self {
        let c = h.powf(mu) / gamma(mu + 2.0);
        let p = mu + 1.0;
        let mut first = vec![0.0; n];
        for (j, w) in first.iter_mut().enumerate().skip(1) {
            let nf = j as f64;
            *w = c * ((nf - 1.0).powf(p) - (nf - mu - 1.0) * nf.powf(mu));
        }
        let mut inner = vec![0.0; n];
        for (k, w) in inner.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            // (k+1)^p - 2k^p + (k-1)^p as a difference of steps
            *w = c * (power_step(kf, p) - power_step(kf - 1.0, p));
        }
        Self { first, inner, last: c }
    }

    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        let n = g.len();
        out[0] = 0.0;
        for j in 1..n {
            let mut s = self.first[j] * g[0] + self.last * g[j];
            for i in 1..j {
                s += self.inner[j - i] * g[i];
            }
            out[j] = s;
        }
    }

    pub fn apply_right(&self, g: &[f64], out: &mut [f64]) {
        let rev: Vec<f64> = g.iter().rev().copied().collect();
        self.apply(&rev, out);
        out.reverse();
    }

    /// Dense `n x n` matrix of the left integral.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for j in 1..n {
            m[(j, 0)] += self.first[j];
            m[(j, j)] += self.last;
            for i in 1..j {
                m[(j, i)] += self.inner[j - i];
            }
        }
        m
    }
}

/// Conjugate a left-anchored operator matrix by the reversal `x -> a + b - x`.
pub fn reflect_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| m[(n - 1 - i, n - 1 - j)])
}

/// Second-order first derivative: central inside, one-sided at the two ends.
pub fn grid_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d
}

pub fn caputo_left(f: &GridFunction, alpha: FractionalOrder) -> GridFunction {
    let g = f.grid();
    let st = CaputoStencil::new(g.len(), g.h(), alpha.value());
    let mut out = vec![0.0; g.len()];
    st.apply(f.values(), &mut out);
    GridFunction { grid: g.clone(), values: out }
}

pub fn caputo_right(f: &GridFunction, beta: FractionalOrder) -> GridFunction {
    caputo_left(&f.reflect(), beta).reflect()
}

fn check_integral_order(order: f64) -> Result<()> {
    if order > 0.0 && order <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidIntegralOrder(order))
    }
}

pub fn frac_integral_left(g: &GridFunction, order: f64) -> Result<GridFunction> {
    check_integral_order(order)?;
    let grid = g.grid();
    let st = IntegralStencil::new(grid.len(), grid.h(), order);
    let mut out = vec![0.0; grid.len()];
    st.apply(g.values(), &mut out);
    Ok(GridFunction {
        grid: grid.clone(),
        values: out,
    })
}

pub fn frac_integral_right(g: &GridFunction, order: f64) -> Result<GridFunction> {
    Ok(frac_integral_left(&g.reflect(), order)?.reflect())
}

/// Left Riemann-Liouville derivative: grid derivative of the order `1-beta` left integral.
pub fn rl_left_deriv(g: &GridFunction, beta: FractionalOrder) -> GridFunction {
    let i = frac_integral_left(g, 1.0 - beta.value()).expect("1-beta lies in (0,1)");
    let d = grid_derivative(i.values(), g.grid().h());
    GridFunction {
        grid: g.grid().clone(),
        values: d,
    }
}

/// Right Riemann-Liouville derivative: minus the grid derivative of the order `1-alpha` right integral.
pub fn rl_right_deriv(g: &GridFunction, alpha: FractionalOrder) -> GridFunction {
    rl_left_deriv(&g.reflect(), alpha).reflect()
}

/// Per-level fuzzy Caputo derivative and the points where its endpoints cross.
#[derive(Clone, Debug)]
pub struct FuzzyCaputo {
    pub lower: Vec<GridFunction>,
    pub upper: Vec<GridFunction>,
    /// (level index, node index) pairs where lower > upper
    pub violations: Vec<(usize, usize)>,
}

impl FuzzyCaputo {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Left Caputo derivative of a fuzzy trajectory, one pair of grid functions per r-level.
///
/// Case 1 keeps the endpoint order, case 2 swaps it. Crossed endpoints are collected, not rejected.
pub fn fuzzy_caputo_left(
    lower: &[GridFunction],
    upper: &[GridFunction],
    alpha: FractionalOrder,
    case: GhCase,
    tol: f64,
) -> Result<FuzzyCaputo> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::XGridMismatch("lower/upper level counts differ".into()));
    }
    let grid = lower[0].grid();
    if lower.iter().chain(upper).any(|f| f.grid() != grid) {
        return Err(Error::XGridMismatch("level functions use different grids".into()));
    }
    let st = CaputoStencil::new(grid.len(), grid.h(), alpha.value());
    let mut lo_out = Vec::with_capacity(lower.len());
    let mut up_out = Vec::with_capacity(lower.len());
    let mut violations = Vec::new();
    for (k, (l, u)) in lower.iter().zip(upper).enumerate() {
        let mut dl = vec![0.0; grid.len()];
        let mut du = vec![0.0; grid.len()];
        st.apply(l.values(), &mut dl);
        st.apply(u.values(), &mut du);
        if case == GhCase::Two {
            std::mem::swap(&mut dl, &mut du);
        }
        for i in 0..grid.len() {
            if dl[i] > du[i] + tol {
                violations.push((k, i));
            }
        }
        lo_out.push(GridFunction {
            grid: grid.clone(),
            values: dl,
        });
        up_out.push(GridFunction {
            grid: grid.clone(),
            values: du,
        });
    }
    Ok(FuzzyCaputo {
        lower: lo_out,
        upper: up_out,
        violations,
    })
}

/// Convenience: sample `(lower, upper)` level functions of `(r, x)` on the given grids.
pub fn sample_levels(
    grid: &XGrid,
    rgrid: &RGrid,
    f: impl Fn(f64, f64) -> (f64, f64),
) -> (Vec<GridFunction>, Vec<GridFunction>) {
    let mut lo = Vec::new();
    let mut up = Vec::new();
    for &r in rgrid.values() {
        lo.push(GridFunction::from_fn(grid, |x| f(r, x).0));
        up.push(GridFunction::from_fn(grid, |x| f(r, x).1));
    }
    (lo, up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(n: usize) -> XGrid {
        XGrid::new(0.0, 1.0, n).unwrap()
    }

    fn ord(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn gamma_reference_values() {
        let cases = [
            (0.5, PI.sqrt()),
            (1.0, 1.0),
            (1.5, PI.sqrt() / 2.0),
            (2.5, 0.75 * PI.sqrt()),
            (5.0, 24.0),
            (0.1, 9.513_507_698_668_732),
            (0.001, 999.423_772_484_595_5),
            (3.3, 2.683_437_381_955_765_8),
        ];
        for (x, g) in cases {
            assert!(((gamma(x) - g) / g).abs() < 1e-12, "gamma({x})");
        }
    }

    #[test]
    fn grid_basics() {
        let g = XGrid::new(1.0, 2.0, 11).unwrap();
        assert!((g.h() - 0.1).abs() < 1e-15);
        assert_eq!(g.node(10), 2.0);
        assert_eq!(g.index_of(1.3), Some(3));
        assert_eq!(g.index_of(1.35), None);
        assert!(XGrid::new(1.0, 1.0, 5).is_err());
        assert!(XGrid::new(0.0, 1.0, 2).is_err());
        assert!(matches!(
            XGrid::from_nodes(&[0.0, 0.1, 0.3]),
            Err(Error::NonUniformGrid { .. })
        ));
        assert!(XGrid::from_nodes(&[0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn order_bounds() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.0).is_err());
        assert!(FractionalOrder::new(0.5).is_ok());
        assert!(GhCase::from_int(3).is_err());
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let f = GridFunction::from_fn(&unit(51), |_| 3.7);
        let d = caputo_left(&f, ord(0.4));
        assert!(d.values().iter().all(|v| v.abs() < 1e-13));
        let d = caputo_right(&f, ord(0.4));
        assert!(d.values().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn caputo_power_rule_examples() {
        let g = unit(1001);
        let d = caputo_left(&GridFunction::from_fn(&g, |x| x), ord(0.5));
        assert!((d.values()[1000] - 2.0 / PI.sqrt()).abs() < 1e-10);
        let d = caputo_left(&GridFunction::from_fn(&g, |x| x * x), ord(0.5));
        assert!((d.values()[1000] - 8.0 / (3.0 * PI.sqrt())).abs() < 1e-6);
        assert_eq!(d.values()[0], 0.0);
    }

    #[test]
    fn caputo_right_examples() {
        let g = unit(1001);
        let d = caputo_right(&GridFunction::from_fn(&g, |x| 1.0 - x), ord(0.5));
        assert!((d.values()[0] - 2.0 / PI.sqrt()).abs() < 1e-10);
        assert_eq!(d.values()[1000], 0.0);
        // near order one the right derivative tends to -f'
        let d = caputo_right(&GridFunction::from_fn(&g, |x| 1.0 - x), ord(1.0 - 1e-6));
        for v in &d.values()[1..999] {
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn integral_examples() {
        let g = unit(201);
        let one = GridFunction::from_fn(&g, |_| 1.0);
        let i = frac_integral_left(&one, 1.0).unwrap();
        for (k, x) in g.nodes().iter().enumerate() {
            assert!((i.values()[k] - x).abs() < 1e-12);
        }
        let mu = 0.3;
        let i = frac_integral_left(&one, mu).unwrap();
        for (k, x) in g.nodes().iter().enumerate() {
            assert!((i.values()[k] - x.powf(mu) / gamma(mu + 1.0)).abs() < 1e-12);
        }
        let lin = GridFunction::from_fn(&g, |x| x);
        let i = frac_integral_left(&lin, 0.5).unwrap();
        assert!((i.values()[200] - 4.0 / (3.0 * PI.sqrt())).abs() < 1e-12);
        assert!(frac_integral_left(&lin, 0.0).is_err());
        assert!(frac_integral_left(&lin, 1.5).is_err());
    }

    #[test]
    fn running_integral_then_derivative_recovers_integrand() {
        let mut errs = Vec::new();
        for n in [51, 101, 201] {
            let g = unit(n);
            let f = GridFunction::from_fn(&g, |x| (3.0 * x).sin());
            let i = frac_integral_left(&f, 1.0).unwrap();
            let d = grid_derivative(i.values(), g.h());
            let e = (2..n - 2)
                .map(|k| (d[k] - f.values()[k]).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn rl_examples() {
        let g = unit(1001);
        let z = GridFunction::from_fn(&g, |_| 0.0);
        assert!(rl_right_deriv(&z, ord(0.5)).values().iter().all(|v| *v == 0.0));
        let a = 0.6;
        let f = GridFunction::from_fn(&g, |x| (1.0 - x).powf(a));
        let d = rl_right_deriv(&f, ord(a));
        for k in (100..=900).step_by(100) {
            assert!((d.values()[k] - gamma(a + 1.0)).abs() < 1e-3, "{}", d.values()[k]);
        }
        let f = GridFunction::from_fn(&g, |x| x.powf(a));
        let d = rl_left_deriv(&f, ord(a));
        for k in (100..=900).step_by(100) {
            assert!((d.values()[k] - gamma(a + 1.0)).abs() < 1e-3);
        }
        // order close to one: right derivative is -g'
        let f = GridFunction::from_fn(&g, |x| x * x);
        let d = rl_right_deriv(&f, ord(1.0 - 1e-6));
        for k in (100..=900).step_by(100) {
            let x = g.node(k);
            assert!((d.values()[k] + 2.0 * x).abs() < 1e-3);
        }
    }

    #[test]
    fn classical_limit_of_caputo() {
        let g = unit(501);
        let f = GridFunction::from_fn(&g, |x| 1.0 + x + 2.0 * x * x - x * x * x);
        let d = caputo_left(&f, ord(1.0 - 1e-3));
        let fd = grid_derivative(f.values(), g.h());
        for k in 1..500 {
            assert!(((d.values()[k] - fd[k]) / fd[k]).abs() < 0.02, "node {k}");
        }
    }

    #[test]
    fn linearity() {
        let g = unit(301);
        let f = GridFunction::from_fn(&g, |x| x.powf(2.5));
        let h = GridFunction::from_fn(&g, |x| (2.0 * x).cos());
        let c = GridFunction::from_fn(&g, |x| 2.0 * x.powf(2.5) - 3.0 * (2.0 * x).cos());
        let al = ord(0.35);
        let (df, dh, dc) = (caputo_left(&f, al), caputo_left(&h, al), caputo_left(&c, al));
        for k in 0..301 {
            let lhs = dc.values()[k];
            let rhs = 2.0 * df.values()[k] - 3.0 * dh.values()[k];
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_symmetry() {
        let g = XGrid::new(-0.5, 2.0, 257).unwrap();
        let f = GridFunction::from_fn(&g, |x| (x + 0.7).powi(3) - x.exp());
        let mirrored = GridFunction::from_fn(&g, |x| {
            let y = g.a() + g.b() - x;
            (y + 0.7).powi(3) - y.exp()
        });
        let be = ord(0.45);
        let r = caputo_right(&f, be);
        let l = caputo_left(&mirrored, be).reflect();
        for k in 0..257 {
            assert!((r.values()[k] - l.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn fuzzy_caputo_cases() {
        let g = unit(401);
        let rg = RGrid::default();
        let (lo, up) = sample_levels(&g, &rg, |r, x| (r * x, (2.0 - r) * x));
        let res = fuzzy_caputo_left(&lo, &up, ord(0.5), GhCase::One, 1e-12).unwrap();
        assert!(res.is_consistent());
        let c = 2.0 / PI.sqrt();
        for (k, &r) in rg.values().iter().enumerate() {
            for i in [100, 250, 400] {
                let x = g.node(i);
                assert!((res.lower[k].values()[i] - r * c * x.sqrt()).abs() < 1e-9);
                assert!((res.upper[k].values()[i] - (2.0 - r) * c * x.sqrt()).abs() < 1e-9);
            }
        }
        let res2 = fuzzy_caputo_left(&lo, &up, ord(0.5), GhCase::Two, 1e-12).unwrap();
        for k in 0..10 {
            for i in 1..401 {
                assert!(res2.violations.contains(&(k, i)), "level {k} node {i}");
            }
        }
        assert!(!res2.violations.iter().any(|&(k, _)| k == 10));
        // crisp trajectory: both cases agree
        let (cl, cu) = sample_levels(&g, &rg, |_, x| (x * x, x * x));
        let a = fuzzy_caputo_left(&cl, &cu, ord(0.3), GhCase::One, 1e-12).unwrap();
        let b = fuzzy_caputo_left(&cl, &cu, ord(0.3), GhCase::Two, 1e-12).unwrap();
        assert_eq!(a.lower, b.lower);
        assert!(b.is_consistent());
    }

    #[test]
    fn csv_round_trip() {
        let g = XGrid::new(0.0, 2.0, 5).unwrap();
        let f = GridFunction::from_fn(&g, |x| x * x);
        let back = GridFunction::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back.values(), f.values());
        assert!(GridFunction::from_csv("x,value\n0,1\n0.1,2\n0.3,3\n").is_err());
    }
}
