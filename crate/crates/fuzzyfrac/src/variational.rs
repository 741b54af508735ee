//! Fuzzy fractional variational problems: Lagrangians, problem specs, trajectories
//! and the Euler-Lagrange / natural boundary residuals.

use std::fmt;
use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frac_ops::{
    frac_integral_left, frac_integral_right, grid_derivative, rl_left_deriv, rl_right_deriv,
    CaputoStencil, FractionalOrder, GhCase, GridFunction, XGrid,
};
use crate::fuzzy_core::{validate_stacking, FuzzyNumber, RGrid, StackingReport, DEFAULT_TOL};

/// Number of Lagrangian arguments.
pub const NARGS: usize = 15;

/// Lagrangian argument slots.
///
/// `Yla`/`Yua` and `Ylb`/`Yub` are the boundary values at a and b;
/// `YlA`..`YuB` are the values at the inner endpoints of a subinterval problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    X,
    Yl,
    Yu,
    Dcl,
    Dcu,
    Drl,
    Dru,
    Yla,
    Yua,
    Ylb,
    Yub,
    YlA,
    YuA,
    YlB,
    YuB,
}

impl Arg {
    pub const ALL: [Arg; NARGS] = [
        Arg::X,
        Arg::Yl,
        Arg::Yu,
        Arg::Dcl,
        Arg::Dcu,
        Arg::Drl,
        Arg::Dru,
        Arg::Yla,
        Arg::Yua,
        Arg::Ylb,
        Arg::Yub,
        Arg::YlA,
        Arg::YuA,
        Arg::YlB,
        Arg::YuB,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }

    /// Variable name used by expression Lagrangians.
    pub fn name(self) -> &'static str {
        match self {
            Arg::X => "x",
            Arg::Yl => "yl",
            Arg::Yu => "yu",
            Arg::Dcl => "dcl",
            Arg::Dcu => "dcu",
            Arg::Drl => "drl",
            Arg::Dru => "dru",
            Arg::Yla => "yla",
            Arg::Yua => "yua",
            Arg::Ylb => "ylb",
            Arg::Yub => "yub",
            Arg::YlA => "ylA",
            Arg::YuA => "yuA",
            Arg::YlB => "ylB",
            Arg::YuB => "yuB",
        }
    }

    pub fn from_name(s: &str) -> Option<Arg> {
        Arg::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which endpoint function of the level interval an integrand belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bound {
    Lower,
    Upper,
}

impl Bound {
    pub fn name(self) -> &'static str {
        match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
        }
    }

    fn idx(self) -> usize {
        match self {
            Bound::Lower => 0,
            Bound::Upper => 1,
        }
    }
}

/// Argument values at one point, together with the level r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangianPoint {
    pub r: f64,
    pub args: [f64; NARGS],
}

impl LagrangianPoint {
    pub fn new(r: f64) -> Self {
        Self { r, args: [0.0; NARGS] }
    }

    pub fn with(mut self, arg: Arg, v: f64) -> Self {
        self.args[arg.slot()] = v;
        self
    }
}

impl Index<Arg> for LagrangianPoint {
    type Output = f64;
    fn index(&self, a: Arg) -> &f64 {
        &self.args[a.slot()]
    }
}

impl IndexMut<Arg> for LagrangianPoint {
    fn index_mut(&mut self, a: Arg) -> &mut f64 {
        &mut self.args[a.slot()]
    }
}

/// A pair of level integrands `(L_lower, L_upper)`.
///
/// `partial` may return analytic derivatives; `None` falls back to central differences.
pub trait Lagrangian: Send + Sync {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64;

    fn partial(&self, _bound: Bound, _arg: Arg, _p: &LagrangianPoint) -> Option<f64> {
        None
    }
}

/// Relative central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Central difference of `L` in one argument with step `1e-6 * max(1, |arg|)`.
pub fn fd_partial(l: &dyn Lagrangian, bound: Bound, arg: Arg, p: &LagrangianPoint) -> f64 {
    let v = p[arg];
    let s = FD_STEP * v.abs().max(1.0);
    let mut q = *p;
    q[arg] = v + s;
    let fp = l.value(bound, &q);
    q[arg] = v - s;
    let fm = l.value(bound, &q);
    (fp - fm) / (2.0 * s)
}

/// Analytic partial when available, otherwise [`fd_partial`].
pub fn partial(l: &dyn Lagrangian, bound: Bound, arg: Arg, p: &LagrangianPoint) -> f64 {
    l.partial(bound, arg, p).unwrap_or_else(|| fd_partial(l, bound, arg, p))
}

/// Second derivative `d/d(wrt) dL/d(arg)` by a central difference of the first partial.
pub fn fd_second(l: &dyn Lagrangian, bound: Bound, arg: Arg, wrt: Arg, p: &LagrangianPoint, step: f64) -> f64 {
    let v = p[wrt];
    let s = step * v.abs().max(1.0);
    let mut q = *p;
    q[wrt] = v + s;
    let fp = partial(l, bound, arg, &q);
    q[wrt] = v - s;
    let fm = partial(l, bound, arg, &q);
    (fp - fm) / (2.0 * s)
}

/// Deterministic probe points used for structural checks.
fn probe_points(a: f64, b: f64) -> Vec<LagrangianPoint> {
    const PHI: f64 = 0.618_033_988_749_894_9;
    let mut t = 0.137;
    let mut next = move || {
        t = (t + PHI).fract();
        t
    };
    (0..8)
        .map(|_| {
            let mut p = LagrangianPoint::new(next());
            p[Arg::X] = a + (b - a) * (0.05 + 0.9 * next());
            for arg in &Arg::ALL[1..] {
                p[*arg] = 0.3 + 1.4 * next();
            }
            p
        })
        .collect()
}

/// Which arguments each integrand actually depends on, detected at probe points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Signature {
    uses: [[bool; NARGS]; 2],
}

impl Signature {
    pub fn probe(l: &dyn Lagrangian, a: f64, b: f64) -> Self {
        let mut uses = [[false; NARGS]; 2];
        for p in probe_points(a, b) {
            for bound in [Bound::Lower, Bound::Upper] {
                for arg in Arg::ALL {
                    let d = partial(l, bound, arg, &p);
                    if d != 0.0 {
                        uses[bound.idx()][arg.slot()] = true;
                    }
                }
            }
        }
        Self { uses }
    }

    pub fn uses(&self, bound: Bound, arg: Arg) -> bool {
        self.uses[bound.idx()][arg.slot()]
    }

    pub fn uses_any(&self, arg: Arg) -> bool {
        self.uses(Bound::Lower, arg) || self.uses(Bound::Upper, arg)
    }

    /// Arguments (other than x) that `bound`'s integrand depends on.
    pub fn args_of(&self, bound: Bound) -> Vec<Arg> {
        Arg::ALL[1..].iter().copied().filter(|a| self.uses(bound, *a)).collect()
    }
}

/// Compare analytic partials with central differences at the probe points.
pub fn check_partials(l: &dyn Lagrangian, a: f64, b: f64) -> Result<()> {
    for p in probe_points(a, b) {
        for bound in [Bound::Lower, Bound::Upper] {
            for arg in Arg::ALL {
                let Some(an) = l.partial(bound, arg, &p) else { continue };
                let num = fd_partial(l, bound, arg, &p);
                if !an.is_finite() || !num.is_finite() {
                    continue;
                }
                if (an - num).abs() > 1e-5 * an.abs().max(num.abs()).max(1.0) {
                    return Err(Error::PartialMismatch {
                        bound: bound.name(),
                        arg: arg.name(),
                        analytic: an,
                        numeric: num,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Order of a derivative term: a fractional order in (0,1), or the classical first derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order {
    Fractional(FractionalOrder),
    Classical,
}

impl Order {
    /// `1.0` maps to [`Order::Classical`]; anything else must lie in (0,1).
    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Order::Classical)
        } else {
            Ok(Order::Fractional(FractionalOrder::new(v)?))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Order::Fractional(a) => a.value(),
            Order::Classical => 1.0,
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Order::Classical)
    }
}

/// Endpoint condition: a prescribed fuzzy value or a free (natural) end.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    Fixed(FuzzyNumber),
    Free,
}

impl Boundary {
    pub fn is_free(&self) -> bool {
        matches!(self, Boundary::Free)
    }
}

/// Inner integration interval `[A,B]` of a subinterval problem. Both ends lie on the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerInterval {
    pub a: f64,
    pub b: f64,
    pub ia: usize,
    pub ib: usize,
}

/// A fuzzy fractional variational problem.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    lagrangian: Arc<dyn Lagrangian>,
    xgrid: XGrid,
    rgrid: RGrid,
    alpha: Order,
    beta: Order,
    gh_case: GhCase,
    left: Boundary,
    right: Boundary,
    inner: Option<InnerInterval>,
    signature: Signature,
    residual_tol: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("xgrid", &self.xgrid)
            .field("rgrid", &self.rgrid)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gh_case", &self.gh_case)
            .field("left", &self.left)
            .field("right", &self.right)
            .field("inner", &self.inner)
            .finish_non_exhaustive()
    }
}

/// Builder for [`ProblemSpec`].
pub struct ProblemBuilder {
    name: String,
    lagrangian: Arc<dyn Lagrangian>,
    xgrid: Option<XGrid>,
    rgrid: RGrid,
    alpha: Order,
    beta: Order,
    gh_case: GhCase,
    left: Boundary,
    right: Boundary,
    inner: Option<(f64, f64)>,
    residual_tol: f64,
}

impl ProblemBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn xgrid(mut self, g: XGrid) -> Self {
        self.xgrid = Some(g);
        self
    }

    pub fn rgrid(mut self, g: RGrid) -> Self {
        self.rgrid = g;
        self
    }

    pub fn alpha(mut self, o: Order) -> Self {
        self.alpha = o;
        self
    }

    pub fn beta(mut self, o: Order) -> Self {
        self.beta = o;
        self
    }

    /// Same order for both derivative kinds.
    pub fn orders(self, o: Order) -> Self {
        self.alpha(o).beta(o)
    }

    pub fn gh_case(mut self, c: GhCase) -> Self {
        self.gh_case = c;
        self
    }

    pub fn left(mut self, b: Boundary) -> Self {
        self.left = b;
        self
    }

    pub fn right(mut self, b: Boundary) -> Self {
        self.right = b;
        self
    }

    /// Integrate over `[a_inner, b_inner]` only; both must be grid nodes.
    pub fn inner(mut self, a_inner: f64, b_inner: f64) -> Self {
        self.inner = Some((a_inner, b_inner));
        self
    }

    /// Pass/fail threshold of residual reports.
    pub fn residual_tolerance(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let xgrid = self
            .xgrid
            .ok_or_else(|| Error::InvalidProblem("no x-grid given".into()))?;
        let (a, b) = (xgrid.a(), xgrid.b());
        check_partials(self.lagrangian.as_ref(), a, b)?;
        let signature = Signature::probe(self.lagrangian.as_ref(), a, b);
        let uses_c = signature.uses_any(Arg::Dcl) || signature.uses_any(Arg::Dcu);
        let uses_r = signature.uses_any(Arg::Drl) || signature.uses_any(Arg::Dru);
        if uses_c && uses_r && self.alpha.is_classical() != self.beta.is_classical() {
            return Err(Error::InvalidProblem(
                "mixing a classical and a fractional derivative order is not supported".into(),
            ));
        }
        if !uses_c && uses_r && self.alpha.is_classical() != self.beta.is_classical() {
            return Err(Error::InvalidProblem(
                "alpha and beta must both be classical or both fractional".into(),
            ));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidProblem("residual tolerance must be positive".into()));
        }
        let fix = |bd: Boundary| match bd {
            Boundary::Fixed(v) if v.rgrid() != &self.rgrid => Boundary::Fixed(v.resample(&self.rgrid)),
            other => other,
        };
        let left = fix(self.left);
        let right = fix(self.right);
        let inner = match self.inner {
            None => None,
            Some((ia_x, ib_x)) => {
                if !(a <= ia_x && ia_x < ib_x && ib_x <= b) {
                    return Err(Error::InvalidProblem(format!(
                        "inner interval [{ia_x}, {ib_x}] must satisfy a <= A < B <= b"
                    )));
                }
                let ia = xgrid.index_of(ia_x).ok_or(Error::GridAlignment(ia_x))?;
                let ib = xgrid.index_of(ib_x).ok_or(Error::GridAlignment(ib_x))?;
                Some(InnerInterval { a: ia_x, b: ib_x, ia, ib })
            }
        };
        Ok(ProblemSpec {
            name: self.name,
            lagrangian: self.lagrangian,
            xgrid,
            rgrid: self.rgrid,
            alpha: self.alpha,
            beta: self.beta,
            gh_case: self.gh_case,
            left,
            right,
            inner,
            signature,
            residual_tol: self.residual_tol,
        })
    }
}

impl ProblemSpec {
    pub fn builder(lagrangian: Arc<dyn Lagrangian>) -> ProblemBuilder {
        ProblemBuilder {
            name: "problem".into(),
            lagrangian,
            xgrid: None,
            rgrid: RGrid::default(),
            alpha: Order::Classical,
            beta: Order::Classical,
            gh_case: GhCase::One,
            left: Boundary::Free,
            right: Boundary::Free,
            inner: None,
            residual_tol: 1e-6,
        }
    }

    fn to_builder(&self) -> ProblemBuilder {
        ProblemBuilder {
            name: self.name.clone(),
            lagrangian: self.lagrangian.clone(),
            xgrid: Some(self.xgrid.clone()),
            rgrid: self.rgrid.clone(),
            alpha: self.alpha,
            beta: self.beta,
            gh_case: self.gh_case,
            left: self.left.clone(),
            right: self.right.clone(),
            inner: self.inner.map(|i| (i.a, i.b)),
            residual_tol: self.residual_tol,
        }
    }

    /// Copy with both orders replaced.
    pub fn with_orders(&self, alpha: Order, beta: Order) -> Result<Self> {
        self.to_builder().alpha(alpha).beta(beta).build()
    }

    pub fn with_xgrid(&self, g: XGrid) -> Result<Self> {
        self.to_builder().xgrid(g).build()
    }

    pub fn with_rgrid(&self, g: RGrid) -> Result<Self> {
        self.to_builder().rgrid(g).build()
    }

    pub fn with_residual_tolerance(&self, tol: f64) -> Result<Self> {
        self.to_builder().residual_tolerance(tol).build()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lagrangian(&self) -> &dyn Lagrangian {
        self.lagrangian.as_ref()
    }

    pub fn lagrangian_arc(&self) -> Arc<dyn Lagrangian> {
        self.lagrangian.clone()
    }

    pub fn xgrid(&self) -> &XGrid {
        &self.xgrid
    }

    pub fn rgrid(&self) -> &RGrid {
        &self.rgrid
    }

    pub fn alpha(&self) -> Order {
        self.alpha
    }

    pub fn beta(&self) -> Order {
        self.beta
    }

    pub fn gh_case(&self) -> GhCase {
        self.gh_case
    }

    pub fn left(&self) -> &Boundary {
        &self.left
    }

    pub fn right(&self) -> &Boundary {
        &self.right
    }

    pub fn inner(&self) -> Option<InnerInterval> {
        self.inner
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn residual_tolerance(&self) -> f64 {
        self.residual_tol
    }

    /// True when the derivative terms the integrand uses are classical.
    pub fn is_classical(&self) -> bool {
        let s = &self.signature;
        if s.uses_any(Arg::Dcl) || s.uses_any(Arg::Dcu) {
            self.alpha.is_classical()
        } else if s.uses_any(Arg::Drl) || s.uses_any(Arg::Dru) {
            self.beta.is_classical()
        } else {
            self.alpha.is_classical()
        }
    }
}

/// Level-wise fuzzy trajectory `[y]^r(x) = [lower, upper]` sampled on an x-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyTrajectory {
    xgrid: XGrid,
    rgrid: RGrid,
    lower: Vec<Vec<f64>>,
    upper: Vec<Vec<f64>>,
}

/// Stacking diagnostics of a trajectory: one report per node plus order checks per level.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryStacking {
    /// (node, report) for nodes whose level intervals are not nested
    pub nodes: Vec<(usize, StackingReport)>,
    /// (level index, node) with lower > upper
    pub crossings: Vec<(usize, usize)>,
}

impl TrajectoryStacking {
    pub fn is_valid(&self) -> bool {
        self.nodes.is_empty() && self.crossings.is_empty()
    }
}

impl FuzzyTrajectory {
    pub fn new(xgrid: XGrid, rgrid: RGrid, lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>) -> Result<Self> {
        if lower.len() != rgrid.len() || upper.len() != rgrid.len() {
            return Err(Error::GridMismatch);
        }
        if lower.iter().chain(&upper).any(|v| v.len() != xgrid.len()) {
            return Err(Error::XGridMismatch("level arrays do not match the x-grid".into()));
        }
        Ok(Self { xgrid, rgrid, lower, upper })
    }

    /// Sample `f(r, x) -> (lower, upper)`.
    pub fn from_fn(xgrid: &XGrid, rgrid: &RGrid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let xs = xgrid.nodes();
        let mut lower = Vec::with_capacity(rgrid.len());
        let mut upper = Vec::with_capacity(rgrid.len());
        for &r in rgrid.values() {
            let (l, u): (Vec<f64>, Vec<f64>) = xs.iter().map(|&x| f(r, x)).unzip();
            lower.push(l);
            upper.push(u);
        }
        Self {
            xgrid: xgrid.clone(),
            rgrid: rgrid.clone(),
            lower,
            upper,
        }
    }

    pub fn xgrid(&self) -> &XGrid {
        &self.xgrid
    }

    pub fn rgrid(&self) -> &RGrid {
        &self.rgrid
    }

    pub fn lower(&self, level: usize) -> &[f64] {
        &self.lower[level]
    }

    pub fn upper(&self, level: usize) -> &[f64] {
        &self.upper[level]
    }

    pub fn set_level(&mut self, level: usize, lower: Vec<f64>, upper: Vec<f64>) {
        assert!(lower.len() == self.xgrid.len() && upper.len() == self.xgrid.len());
        self.lower[level] = lower;
        self.upper[level] = upper;
    }

    /// Fuzzy value at node `i`, without a stacking check.
    pub fn at_node(&self, i: usize) -> FuzzyNumber {
        FuzzyNumber::new_unchecked(
            self.rgrid.clone(),
            self.lower.iter().map(|v| v[i]).collect(),
            self.upper.iter().map(|v| v[i]).collect(),
        )
    }

    pub fn stacking(&self, tol: f64) -> TrajectoryStacking {
        let mut out = TrajectoryStacking::default();
        for i in 0..self.xgrid.len() {
            let lo: Vec<f64> = self.lower.iter().map(|v| v[i]).collect();
            let up: Vec<f64> = self.upper.iter().map(|v| v[i]).collect();
            let rep = validate_stacking(&lo, &up, tol);
            if !rep.is_valid() {
                out.nodes.push((i, rep));
            }
            for k in 0..lo.len() {
                if lo[k] > up[k] + tol {
                    out.crossings.push((k, i));
                }
            }
        }
        out
    }

    /// Largest absolute difference over all levels, nodes and both bounds.
    pub fn sup_distance(&self, other: &FuzzyTrajectory) -> Result<f64> {
        if self.rgrid != other.rgrid {
            return Err(Error::GridMismatch);
        }
        if self.xgrid != other.xgrid {
            return Err(Error::XGridMismatch("trajectories use different x-grids".into()));
        }
        let mut d: f64 = 0.0;
        for k in 0..self.rgrid.len() {
            for i in 0..self.xgrid.len() {
                d = d.max((self.lower[k][i] - other.lower[k][i]).abs());
                d = d.max((self.upper[k][i] - other.upper[k][i]).abs());
            }
        }
        Ok(d)
    }

    /// CSV with header `r,x,lower,upper`, preceded by `# key=value` lines.
    pub fn to_csv(&self, meta: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str("r,x,lower,upper\n");
        let xs = self.xgrid.nodes();
        for (k, &r) in self.rgrid.values().iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{}", r, x, self.lower[k][i], self.upper[k][i]);
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rs: Vec<f64> = Vec::new();
        let mut xs_per: Vec<Vec<f64>> = Vec::new();
        let mut lower: Vec<Vec<f64>> = Vec::new();
        let mut upper: Vec<Vec<f64>> = Vec::new();
        let mut header = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header {
                if line.replace(' ', "") != "r,x,lower,upper" {
                    return Err(Error::Parse(format!("line {}: expected header r,x,lower,upper", ln + 1)));
                }
                header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 columns", ln + 1)));
            }
            let mut v = [0.0; 4];
            for (j, c) in cols.iter().enumerate() {
                v[j] = c
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad number '{c}'", ln + 1)))?;
            }
            if rs.last() != Some(&v[0]) {
                rs.push(v[0]);
                xs_per.push(Vec::new());
                lower.push(Vec::new());
                upper.push(Vec::new());
            }
            let k = rs.len() - 1;
            xs_per[k].push(v[1]);
            lower[k].push(v[2]);
            upper[k].push(v[3]);
        }
        if rs.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        if xs_per.iter().any(|x| x != &xs_per[0]) {
            return Err(Error::Parse("levels use different x values".into()));
        }
        let xgrid = XGrid::from_nodes(&xs_per[0])?;
        Self::new(xgrid, RGrid::new(rs)?, lower, upper)
    }
}

/// One row of a residual report.
#[derive(Clone, Debug, PartialEq)]
pub struct EquationResidual {
    pub id: String,
    pub r: f64,
    pub max_abs: f64,
    pub l2: f64,
    pub pass: bool,
    /// node index of `values[0]`
    pub first_node: usize,
    /// signed residual at consecutive nodes (a single value for boundary rows)
    pub values: Vec<f64>,
}

/// Residuals per equation and level.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub entries: Vec<EquationResidual>,
    /// Nodes left out of interior equations.
    pub excluded_nodes: Vec<usize>,
    pub tolerance: f64,
}

impl ResidualReport {
    fn new(tolerance: f64, excluded_nodes: Vec<usize>) -> Self {
        Self {
            entries: Vec::new(),
            excluded_nodes,
            tolerance,
        }
    }

    /// Interior row over nodes `first_node..first_node + values.len()`.
    fn push(&mut self, id: impl Into<String>, r: f64, first_node: usize, values: Vec<f64>, h: f64) {
        let (max_abs, l2) = norms(&values, h);
        self.entries.push(EquationResidual {
            id: id.into(),
            r,
            max_abs,
            l2,
            pass: max_abs <= self.tolerance,
            first_node,
            values,
        });
    }

    fn push_scalar(&mut self, id: impl Into<String>, r: f64, node: usize, v: f64) {
        self.entries.push(EquationResidual {
            id: id.into(),
            r,
            max_abs: v.abs(),
            l2: v.abs(),
            pass: v.abs() <= self.tolerance,
            first_node: node,
            values: vec![v],
        });
    }

    /// Largest `max_abs` over all entries.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.max_abs).fold(0.0, f64::max)
    }

    /// Largest `max_abs` over entries whose id starts with `prefix`.
    pub fn max_abs_of(&self, prefix: &str) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.id.starts_with(prefix))
            .map(|e| e.max_abs)
            .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn get(&self, id: &str, r: f64) -> Option<&EquationResidual> {
        self.entries.iter().find(|e| e.id == id && (e.r - r).abs() < 1e-12)
    }

    /// Re-evaluate pass flags against another threshold.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        for e in &mut self.entries {
            e.pass = e.max_abs <= tol;
        }
        self
    }

    pub fn extend(&mut self, other: ResidualReport) {
        self.entries.extend(other.entries);
    }

    /// CSV with header `equation_id,r,max_abs,l2,pass`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("equation_id,r,max_abs,l2,pass\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{:e},{:e},{}", e.id, e.r, e.max_abs, e.l2, e.pass);
        }
        s
    }
}

/// One E-L family: the integrand it comes from and the argument slots it varies.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Family {
    pub bound: Bound,
    pub upper_state: bool,
    pub y: Arg,
    pub dc: Arg,
    pub dr: Arg,
    pub at_a: Arg,
    pub at_b: Arg,
    pub at_ia: Arg,
    pub at_ib: Arg,
}

const fn family(bound: Bound, upper_state: bool) -> Family {
    if upper_state {
        Family {
            bound,
            upper_state,
            y: Arg::Yu,
            dc: Arg::Dcu,
            dr: Arg::Dru,
            at_a: Arg::Yua,
            at_b: Arg::Yub,
            at_ia: Arg::YuA,
            at_ib: Arg::YuB,
        }
    } else {
        Family {
            bound,
            upper_state,
            y: Arg::Yl,
            dc: Arg::Dcl,
            dr: Arg::Drl,
            at_a: Arg::Yla,
            at_b: Arg::Ylb,
            at_ia: Arg::YlA,
            at_ib: Arg::YlB,
        }
    }
}

/// Variations of y-lower in L-lower and L-upper, then of y-upper in both.
pub(crate) const FAMILIES: [Family; 4] = [
    family(Bound::Lower, false),
    family(Bound::Upper, false),
    family(Bound::Lower, true),
    family(Bound::Upper, true),
];

/// Argument values at every node of a level. Derivatives not used by the integrand are left at 0.
pub(crate) fn nodal_points(spec: &ProblemSpec, r: f64, yl: &[f64], yu: &[f64]) -> Vec<LagrangianPoint> {
    let g = spec.xgrid();
    let n = g.len();
    let h = g.h();
    let sig = spec.signature();
    let classical = spec.is_classical();
    let deriv = |o: Order, y: &[f64], right: bool| -> Vec<f64> {
        if classical {
            let d = grid_derivative(y, h);
            if right {
                d.into_iter().map(|v| -v).collect()
            } else {
                d
            }
        } else {
            let mut out = vec![0.0; n];
            let st = CaputoStencil::new(n, h, o.value());
            if right {
                st.apply_right(y, &mut out);
            } else {
                st.apply(y, &mut out);
            }
            out
        }
    };
    let zeros = || vec![0.0; n];
    let dcl = if sig.uses_any(Arg::Dcl) { deriv(spec.alpha(), yl, false) } else { zeros() };
    let dcu = if sig.uses_any(Arg::Dcu) { deriv(spec.alpha(), yu, false) } else { zeros() };
    let drl = if sig.uses_any(Arg::Drl) { deriv(spec.beta(), yl, true) } else { zeros() };
    let dru = if sig.uses_any(Arg::Dru) { deriv(spec.beta(), yu, true) } else { zeros() };
    let (ia, ib) = spec.inner().map(|i| (i.ia, i.ib)).unwrap_or((0, n - 1));
    (0..n)
        .map(|i| {
            let mut p = LagrangianPoint::new(r);
            p[Arg::X] = g.node(i);
            p[Arg::Yl] = yl[i];
            p[Arg::Yu] = yu[i];
            p[Arg::Dcl] = dcl[i];
            p[Arg::Dcu] = dcu[i];
            p[Arg::Drl] = drl[i];
            p[Arg::Dru] = dru[i];
            set_boundary_args(&mut p, yl, yu, ia, ib);
            p
        })
        .collect()
}

pub(crate) fn set_boundary_args(p: &mut LagrangianPoint, yl: &[f64], yu: &[f64], ia: usize, ib: usize) {
    let n = yl.len();
    p[Arg::Yla] = yl[0];
    p[Arg::Yua] = yu[0];
    p[Arg::Ylb] = yl[n - 1];
    p[Arg::Yub] = yu[n - 1];
    p[Arg::YlA] = yl[ia];
    p[Arg::YuA] = yu[ia];
    p[Arg::YlB] = yl[ib];
    p[Arg::YuB] = yu[ib];
}

/// Classical mode: arguments at the cell midpoints `x_{i+1/2}`.
pub(crate) fn midpoint_points(spec: &ProblemSpec, r: f64, yl: &[f64], yu: &[f64]) -> Vec<LagrangianPoint> {
    let g = spec.xgrid();
    let n = g.len();
    let h = g.h();
    let (ia, ib) = spec.inner().map(|i| (i.ia, i.ib)).unwrap_or((0, n - 1));
    (0..n - 1)
        .map(|i| {
            let mut p = LagrangianPoint::new(r);
            p[Arg::X] = g.node(i) + 0.5 * h;
            p[Arg::Yl] = 0.5 * (yl[i] + yl[i + 1]);
            p[Arg::Yu] = 0.5 * (yu[i] + yu[i + 1]);
            let dl = (yl[i + 1] - yl[i]) / h;
            let du = (yu[i + 1] - yu[i]) / h;
            p[Arg::Dcl] = dl;
            p[Arg::Dcu] = du;
            p[Arg::Drl] = -dl;
            p[Arg::Dru] = -du;
            set_boundary_args(&mut p, yl, yu, ia, ib);
            p
        })
        .collect()
}

/// `d L_bound / d arg` at each point; zero without evaluation when the integrand ignores `arg`.
pub(crate) fn eval_field(spec: &ProblemSpec, bound: Bound, arg: Arg, pts: &[LagrangianPoint]) -> Result<Vec<f64>> {
    if !spec.signature().uses(bound, arg) {
        return Ok(vec![0.0; pts.len()]);
    }
    let l = spec.lagrangian();
    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let v = partial(l, bound, arg, p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { node: i, x: p[Arg::X], r: p.r })
            }
        })
        .collect()
}

pub(crate) fn eval_values(spec: &ProblemSpec, bound: Bound, pts: &[LagrangianPoint]) -> Result<Vec<f64>> {
    let l = spec.lagrangian();
    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let v = l.value(bound, p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { node: i, x: p[Arg::X], r: p.r })
            }
        })
        .collect()
}

pub(crate) fn trapz(v: &[f64], h: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    h * (inner + 0.5 * (v[0] + v[v.len() - 1]))
}

/// Linear extrapolation to node `i0` from `i0+d` and `i0+2d` (d = +-1).
pub(crate) fn extrap2(v: &[f64], i0: usize, forward: bool) -> f64 {
    if forward {
        2.0 * v[i0 + 1] - v[i0 + 2]
    } else {
        2.0 * v[i0 - 1] - v[i0 - 2]
    }
}

fn frac(o: Order) -> FractionalOrder {
    match o {
        Order::Fractional(f) => f,
        Order::Classical => unreachable!("fractional branch with a classical order"),
    }
}

fn check_traj(p: &ProblemSpec, y: &FuzzyTrajectory) -> Result<()> {
    if y.xgrid() != p.xgrid() {
        return Err(Error::XGridMismatch("trajectory and problem use different x-grids".into()));
    }
    if y.rgrid() != p.rgrid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn norms(v: &[f64], h: f64) -> (f64, f64) {
    let m = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let l2 = (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    (m, l2)
}

/// Per-level fields shared by the residual routines.
struct LevelFields {
    /// E-L residual of each family at every node (garbage at excluded nodes)
    el: [Vec<f64>; 4],
    /// right integral (or classical field) of d/d(dc) per family, used at the ends
    f_int: [Vec<f64>; 4],
    g_int: [Vec<f64>; 4],
}

fn fractional_level(spec: &ProblemSpec, pts: &[LagrangianPoint]) -> Result<LevelFields> {
    let g = spec.xgrid();
    let alpha = frac(spec.alpha());
    let beta = spec.beta();
    let mut el: [Vec<f64>; 4] = Default::default();
    let mut f_int: [Vec<f64>; 4] = Default::default();
    let mut g_int: [Vec<f64>; 4] = Default::default();
    for (k, fam) in FAMILIES.iter().enumerate() {
        let y = eval_field(spec, fam.bound, fam.y, pts)?;
        let pf = GridFunction::new(g.clone(), eval_field(spec, fam.bound, fam.dc, pts)?)?;
        let qf = GridFunction::new(g.clone(), eval_field(spec, fam.bound, fam.dr, pts)?)?;
        let dp = rl_right_deriv(&pf, alpha);
        f_int[k] = frac_integral_right(&pf, 1.0 - alpha.value())?.into_values();
        let (dq, gi) = if spec.signature().uses(fam.bound, fam.dr) {
            let b = frac(beta);
            (
                rl_left_deriv(&qf, b).into_values(),
                frac_integral_left(&qf, 1.0 - b.value())?.into_values(),
            )
        } else {
            (vec![0.0; g.len()], vec![0.0; g.len()])
        };
        g_int[k] = gi;
        el[k] = (0..g.len()).map(|i| y[i] + dp.values()[i] + dq[i]).collect();
    }
    Ok(LevelFields { el, f_int, g_int })
}

/// Classical staggered residuals. `f_int`/`g_int` hold midpoint values of d/d(dc), d/d(dr).
fn classical_level(spec: &ProblemSpec, r: f64, yl: &[f64], yu: &[f64]) -> Result<LevelFields> {
    let n = spec.xgrid().len();
    let h = spec.xgrid().h();
    let mid = midpoint_points(spec, r, yl, yu);
    let mut el: [Vec<f64>; 4] = Default::default();
    let mut f_int: [Vec<f64>; 4] = Default::default();
    let mut g_int: [Vec<f64>; 4] = Default::default();
    for (k, fam) in FAMILIES.iter().enumerate() {
        let y = eval_field(spec, fam.bound, fam.y, &mid)?;
        let p = eval_field(spec, fam.bound, fam.dc, &mid)?;
        let q = eval_field(spec, fam.bound, fam.dr, &mid)?;
        let mut e = vec![0.0; n];
        for i in 1..n - 1 {
            e[i] = 0.5 * (y[i - 1] + y[i]) - (p[i] - p[i - 1]) / h + (q[i] - q[i - 1]) / h;
        }
        el[k] = e;
        f_int[k] = p;
        g_int[k] = q;
    }
    Ok(LevelFields { el, f_int, g_int })
}

/// Midpoint-to-endpoint linear extrapolation in classical mode.
pub(crate) fn mid_extrap(m: &[f64], at_b: bool) -> f64 {
    let k = m.len();
    if at_b {
        1.5 * m[k - 1] - 0.5 * m[k - 2]
    } else {
        1.5 * m[0] - 0.5 * m[1]
    }
}

/// Interior E-L residuals `el1..el4` per level.
///
/// Fractional mode reports nodes `2..=N-3`; classical mode reports `1..=N-2`.
pub fn el_residuals(p: &ProblemSpec, y: &FuzzyTrajectory) -> Result<ResidualReport> {
    check_traj(p, y)?;
    let n = p.xgrid().len();
    let h = p.xgrid().h();
    let classical = p.is_classical();
    let (lo, hi) = if classical { (1, n - 2) } else { (2, n - 3) };
    let excluded: Vec<usize> = (0..n).filter(|&i| i < lo || i > hi).collect();
    let mut rep = ResidualReport::new(p.residual_tolerance(), excluded);
    for (k, &r) in p.rgrid().values().iter().enumerate() {
        let (yl, yu) = (y.lower(k), y.upper(k));
        let lf = if classical {
            classical_level(p, r, yl, yu)?
        } else {
            fractional_level(p, &nodal_points(p, r, yl, yu))?
        };
        for (j, e) in lf.el.iter().enumerate() {
            rep.push(format!("el{}", j + 1), r, lo, e[lo..=hi].to_vec(), h);
        }
    }
    Ok(rep)
}

/// Natural boundary residuals `bc_a1..4` / `bc_b1..4` at each free endpoint.
pub fn natural_bc_residuals(p: &ProblemSpec, y: &FuzzyTrajectory) -> Result<ResidualReport> {
    check_traj(p, y)?;
    let n = p.xgrid().len();
    let h = p.xgrid().h();
    let classical = p.is_classical();
    let mut rep = ResidualReport::new(p.residual_tolerance(), Vec::new());
    for (k, &r) in p.rgrid().values().iter().enumerate() {
        let (yl, yu) = (y.lower(k), y.upper(k));
        let pts = nodal_points(p, r, yl, yu);
        let lf = if classical {
            classical_level(p, r, yl, yu)?
        } else {
            fractional_level(p, &pts)?
        };
        for (j, fam) in FAMILIES.iter().enumerate() {
            let ends = [(p.left().is_free(), false), (p.right().is_free(), true)];
            for (free, at_b) in ends {
                if !free {
                    continue;
                }
                let arg = if at_b { fam.at_b } else { fam.at_a };
                let integral = trapz(&eval_field(p, fam.bound, arg, &pts)?, h);
                let (fv, gv) = if classical {
                    (mid_extrap(&lf.f_int[j], at_b), mid_extrap(&lf.g_int[j], at_b))
                } else if at_b {
                    (extrap2(&lf.f_int[j], n - 1, false), extrap2(&lf.g_int[j], n - 1, false))
                } else {
                    (extrap2(&lf.f_int[j], 0, true), extrap2(&lf.g_int[j], 0, true))
                };
                let v = if at_b { integral + (fv - gv) } else { integral - (fv - gv) };
                let id = format!("bc_{}{}", if at_b { 'b' } else { 'a' }, j + 1);
                rep.push_scalar(id, r, if at_b { n - 1 } else { 0 }, v);
            }
        }
    }
    Ok(rep)
}

/// Endpoint value of `v` by linear extrapolation from its two neighbours; 0 below 3 nodes.
fn end_extrap(v: &[f64], at_end: bool) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    if at_end {
        extrap2(v, v.len() - 1, false)
    } else {
        extrap2(v, 0, true)
    }
}

fn sub_fn(g: &XGrid, v: &[f64], i0: usize, i1: usize) -> Result<Option<GridFunction>> {
    if i1 < i0 + 2 {
        return Ok(None);
    }
    Ok(Some(GridFunction::new(g.sub(i0, i1)?, v[i0..=i1].to_vec())?))
}

/// Residuals of the problem whose integrand lives on the inner interval `[A,B]`.
///
/// Ids are prefixed by region: `aA:` on [a,A], `AB:` on [A,B], `Bb:` on [B,b];
/// boundary rows are `bc_a*`, `bc_A*`, `bc_B*`, `bc_b*`. Each region reports
/// its nodes at least two steps away from both of its ends.
pub fn subinterval_residuals(p: &ProblemSpec, y: &FuzzyTrajectory) -> Result<ResidualReport> {
    check_traj(p, y)?;
    let inner = p
        .inner()
        .ok_or_else(|| Error::InvalidProblem("no inner interval configured".into()))?;
    if p.is_classical() {
        return Err(Error::InvalidProblem(
            "subinterval residuals need fractional orders".into(),
        ));
    }
    let g = p.xgrid();
    let n = g.len();
    let h = g.h();
    let (ia, ib) = (inner.ia, inner.ib);
    let alpha = frac(p.alpha());
    let beta_o = p.beta();
    let mut rep = ResidualReport::new(p.residual_tolerance(), Vec::new());
    let region = |lo: usize, hi: usize| -> Option<(usize, usize)> {
        if hi >= lo + 4 {
            Some((lo + 2, hi - 2))
        } else {
            None
        }
    };
    for (k, &r) in p.rgrid().values().iter().enumerate() {
        let pts = nodal_points(p, r, y.lower(k), y.upper(k));
        for (j, fam) in FAMILIES.iter().enumerate() {
            let bnd = fam.bound;
            let pv = eval_field(p, bnd, fam.dc, &pts)?;
            let qv = eval_field(p, bnd, fam.dr, &pts)?;
            let uses_q = p.signature().uses(bnd, fam.dr);
            let mu_a = 1.0 - alpha.value();
            // right RL derivative / integral of p on [a, end], left of q on [start, b]
            let right_on = |end: usize| -> Result<(Vec<f64>, Vec<f64>)> {
                match sub_fn(g, &pv, 0, end)? {
                    None => Ok((vec![0.0; end + 1], vec![0.0; end + 1])),
                    Some(f) => Ok((
                        rl_right_deriv(&f, alpha).into_values(),
                        frac_integral_right(&f, mu_a)?.into_values(),
                    )),
                }
            };
            let left_on = |start: usize| -> Result<(Vec<f64>, Vec<f64>)> {
                let m = n - start;
                if !uses_q {
                    return Ok((vec![0.0; m], vec![0.0; m]));
                }
                let b = frac(beta_o);
                match sub_fn(g, &qv, start, n - 1)? {
                    None => Ok((vec![0.0; m], vec![0.0; m])),
                    Some(f) => Ok((
                        rl_left_deriv(&f, b).into_values(),
                        frac_integral_left(&f, 1.0 - b.value())?.into_values(),
                    )),
                }
            };
            let (d_rb, i_rb) = right_on(ib)?;
            let (d_ra, i_ra) = right_on(ia)?;
            let (d_la, i_la) = left_on(ia)?;
            let (d_lb, i_lb) = left_on(ib)?;

            if let Some((lo, hi)) = region(0, ia) {
                let v: Vec<f64> = (lo..=hi).map(|i| d_rb[i] - d_ra[i]).collect();
                rep.push(format!("aA:el{}", j + 1), r, lo, v, h);
            }
            if let Some((lo, hi)) = region(ia, ib) {
                // [A,B]: right operators anchored at B, left operators anchored at A
                let yv = eval_field(p, bnd, fam.y, &pts)?;
                let (d_mid_r, d_mid_l) = {
                    let f = sub_fn(g, &pv, ia, ib)?.expect("region has at least 5 nodes");
                    let dr = rl_right_deriv(&f, alpha).into_values();
                    let dl = if uses_q {
                        let qf = sub_fn(g, &qv, ia, ib)?.expect("region has at least 5 nodes");
                        rl_left_deriv(&qf, frac(beta_o)).into_values()
                    } else {
                        vec![0.0; ib - ia + 1]
                    };
                    (dr, dl)
                };
                let v: Vec<f64> = (lo..=hi)
                    .map(|i| yv[i] + d_mid_r[i - ia] + d_mid_l[i - ia])
                    .collect();
                rep.push(format!("AB:el{}", j + 1), r, lo, v, h);
            }
            if let Some((lo, hi)) = region(ib, n - 1) {
                let v: Vec<f64> = (lo..=hi).map(|i| d_la[i - ia] - d_lb[i - ib]).collect();
                rep.push(format!("Bb:el{}", j + 1), r, lo, v, h);
            }

            let int_ab = |arg: Arg| -> Result<f64> {
                let f = eval_field(p, bnd, arg, &pts)?;
                Ok(trapz(&f[ia..=ib], h))
            };
            let mut bc = |end: char, arg: Arg, boundary: f64| -> Result<()> {
                let v = int_ab(arg)? - boundary;
                let node = match end {
                    'a' => 0,
                    'A' => ia,
                    'B' => ib,
                    _ => n - 1,
                };
                rep.push_scalar(format!("bc_{end}{}", j + 1), r, node, v);
                Ok(())
            };
            // value at x=a of the right integrals on [a,B] and [a,A]
            let ia_rb = end_extrap(&i_rb, false);
            let ia_ra = if ia == 0 { 0.0 } else { end_extrap(&i_ra, false) };
            if p.left().is_free() {
                bc('a', fam.at_a, ia_rb - ia_ra)?;
            }
            // at A: right integral on [a,A] (anchor at its end), left integral on [A,b] (anchor at its start)
            let at_a_r = end_extrap(&i_ra, true);
            let at_a_l = end_extrap(&i_la, false);
            bc('A', fam.at_ia, at_a_r - at_a_l)?;
            let at_b_l = end_extrap(&i_lb, false);
            let at_b_r = end_extrap(&i_rb, true);
            bc('B', fam.at_ib, at_b_l - at_b_r)?;
            if p.right().is_free() {
                let end_la = end_extrap(&i_la, true);
                let end_lb = if ib == n - 1 { 0.0 } else { end_extrap(&i_lb, true) };
                bc('b', fam.at_b, end_la - end_lb)?;
            }
        }
    }
    Ok(rep)
}

/// Level-wise value of the functional, possibly not a valid fuzzy number.
#[derive(Clone, Debug)]
pub struct FunctionalValue {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub stacking: StackingReport,
    rgrid: RGrid,
}

impl FunctionalValue {
    pub fn is_fuzzy_number(&self) -> bool {
        self.stacking.is_valid()
    }

    /// The value as a fuzzy number; unchecked when the stacking report has violations.
    pub fn to_fuzzy(&self) -> FuzzyNumber {
        FuzzyNumber::new_unchecked(self.rgrid.clone(), self.lower.clone(), self.upper.clone())
    }
}

/// Trapezoidal value of the functional per level, over [A,B] when an inner interval is set.
pub fn functional_value(p: &ProblemSpec, y: &FuzzyTrajectory) -> Result<FunctionalValue> {
    check_traj(p, y)?;
    let n = p.xgrid().len();
    let h = p.xgrid().h();
    let (i0, i1) = p.inner().map(|i| (i.ia, i.ib)).unwrap_or((0, n - 1));
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (k, &r) in p.rgrid().values().iter().enumerate() {
        let pts = nodal_points(p, r, y.lower(k), y.upper(k));
        let lv = eval_values(p, Bound::Lower, &pts)?;
        let uv = eval_values(p, Bound::Upper, &pts)?;
        lower.push(trapz(&lv[i0..=i1], h));
        upper.push(trapz(&uv[i0..=i1], h));
    }
    let stacking = validate_stacking(&lower, &upper, DEFAULT_TOL);
    Ok(FunctionalValue {
        lower,
        upper,
        stacking,
        rgrid: p.rgrid().clone(),
    })
}
