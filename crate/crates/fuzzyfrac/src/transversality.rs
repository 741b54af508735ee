//! Free terminal point on a fuzzy curve: transversality residuals and the search for b*.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frac_ops::{reflect_matrix, IntegralStencil, XGrid};
use crate::fuzzy_core::{validate_stacking, FuzzyNumber, RGrid};
use crate::linalg::{fd_jacobian_banded, fd_jacobian_dense, newton, Jacobian, NewtonOutcome, NonlinearSystem};
use crate::solver::{active, FracLevel, FracSystem, SolverConfig};
use crate::variational::{
    check_partials, el_residuals, eval_field, midpoint_points, nodal_points, partial, set_boundary_args, Arg,
    Boundary, Bound, Family, FuzzyTrajectory, Lagrangian, LagrangianPoint, Order, ProblemSpec, ResidualReport,
    Signature, FAMILIES,
};

/// Terminal curve `z = C(x)` given level-wise.
pub trait FuzzyCurve: Send + Sync {
    fn lower(&self, r: f64, x: f64) -> f64;
    fn upper(&self, r: f64, x: f64) -> f64;

    fn d_lower(&self, _r: f64, _x: f64) -> Option<f64> {
        None
    }

    fn d_upper(&self, _r: f64, _x: f64) -> Option<f64> {
        None
    }
}

/// Curve slopes `(DC_lower, DC_upper)`; central differences with step 1e-6 when not supplied.
pub fn curve_slopes(c: &dyn FuzzyCurve, r: f64, x: f64) -> (f64, f64) {
    let s = 1e-6 * x.abs().max(1.0);
    let dl = c
        .d_lower(r, x)
        .unwrap_or_else(|| (c.lower(r, x + s) - c.lower(r, x - s)) / (2.0 * s));
    let du = c
        .d_upper(r, x)
        .unwrap_or_else(|| (c.upper(r, x + s) - c.upper(r, x - s)) / (2.0 * s));
    (dl, du)
}

/// Curve from closures.
pub struct FnCurve {
    lower: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    upper: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    slopes: Option<Box<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>>,
}

impl FnCurve {
    pub fn new(
        lower: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        upper: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            lower: Box::new(lower),
            upper: Box::new(upper),
            slopes: None,
        }
    }

    /// Analytic slopes `(r, x) -> (DC_lower, DC_upper)`.
    pub fn with_slopes(mut self, d: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        self.slopes = Some(Box::new(d));
        self
    }
}

impl FuzzyCurve for FnCurve {
    fn lower(&self, r: f64, x: f64) -> f64 {
        (self.lower)(r, x)
    }

    fn upper(&self, r: f64, x: f64) -> f64 {
        (self.upper)(r, x)
    }

    fn d_lower(&self, r: f64, x: f64) -> Option<f64> {
        self.slopes.as_ref().map(|d| d(r, x).0)
    }

    fn d_upper(&self, r: f64, x: f64) -> Option<f64> {
        self.slopes.as_ref().map(|d| d(r, x).1)
    }
}

/// Check lower <= upper and stacking across r at 9 abscissae of [lo, hi].
pub fn validate_curve(c: &dyn FuzzyCurve, rgrid: &RGrid, lo: f64, hi: f64) -> Result<()> {
    for k in 0..9 {
        let x = lo + (hi - lo) * k as f64 / 8.0;
        let lower: Vec<f64> = rgrid.values().iter().map(|&r| c.lower(r, x)).collect();
        let upper: Vec<f64> = rgrid.values().iter().map(|&r| c.upper(r, x)).collect();
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCurve { x, r: f64::NAN });
        }
        let rep = validate_stacking(&lower, &upper, 1e-9);
        if !rep.is_valid() {
            return Err(Error::InvalidProblem(format!("curve is not a fuzzy number at x = {x}: {rep}")));
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i] + 1e-9) {
            return Err(Error::InvalidProblem(format!(
                "curve lower exceeds upper at x = {x}, r = {}",
                rgrid.values()[i]
            )));
        }
    }
    Ok(())
}

/// Variational problem with fixed `y(a)` and terminal point on a curve.
#[derive(Clone)]
pub struct FreeEndpointProblem {
    name: String,
    alpha: Order,
    a: f64,
    ya: FuzzyNumber,
    lagrangian: Arc<dyn Lagrangian>,
    curve: Arc<dyn FuzzyCurve>,
    bracket: (f64, f64),
    rgrid: RGrid,
    nodes: usize,
}

impl std::fmt::Debug for FreeEndpointProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FreeEndpointProblem")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("a", &self.a)
            .field("bracket", &self.bracket)
            .field("nodes", &self.nodes)
            .finish_non_exhaustive()
    }
}

const ALLOWED: [Arg; 5] = [Arg::X, Arg::Yl, Arg::Yu, Arg::Dcl, Arg::Dcu];

impl FreeEndpointProblem {
    /// Defaults: classical order, 201 nodes, the default r-grid.
    pub fn new(
        lagrangian: Arc<dyn Lagrangian>,
        curve: Arc<dyn FuzzyCurve>,
        a: f64,
        ya: FuzzyNumber,
        bracket: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = bracket;
        if !(a < lo && lo < hi) {
            return Err(Error::InvalidProblem(format!(
                "bracket [{lo}, {hi}] must satisfy a < b_min < b_max (a = {a})"
            )));
        }
        check_partials(lagrangian.as_ref(), a, hi)?;
        let sig = Signature::probe(lagrangian.as_ref(), a, hi);
        for bound in [Bound::Lower, Bound::Upper] {
            if let Some(arg) = sig.args_of(bound).into_iter().find(|x| !ALLOWED.contains(x)) {
                return Err(Error::InvalidProblem(format!(
                    "free-endpoint integrands may only use x, yl, yu, dcl, dcu; the {} integrand uses {arg}",
                    bound.name()
                )));
            }
        }
        let rgrid = RGrid::default();
        validate_curve(curve.as_ref(), &rgrid, lo, hi)?;
        Ok(Self {
            name: "free-endpoint".into(),
            alpha: Order::Classical,
            a,
            ya: ya.resample(&rgrid),
            lagrangian,
            curve,
            bracket,
            rgrid,
            nodes: 201,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_alpha(mut self, alpha: Order) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_rgrid(mut self, rgrid: RGrid) -> Result<Self> {
        validate_curve(self.curve.as_ref(), &rgrid, self.bracket.0, self.bracket.1)?;
        self.ya = self.ya.resample(&rgrid);
        self.rgrid = rgrid;
        Ok(self)
    }

    pub fn with_bracket(self, lo: f64, hi: f64) -> Result<Self> {
        let p = Self::new(self.lagrangian.clone(), self.curve.clone(), self.a, self.ya.clone(), (lo, hi))?;
        p.with_rgrid(self.rgrid.clone())
            .map(|p| p.with_name(self.name.clone()).with_alpha(self.alpha).with_nodes(self.nodes))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self) -> Order {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn ya(&self) -> &FuzzyNumber {
        &self.ya
    }

    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    pub fn rgrid(&self) -> &RGrid {
        &self.rgrid
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn curve(&self) -> &dyn FuzzyCurve {
        self.curve.as_ref()
    }

    /// Curve levels at `x` as a fuzzy number (not stacking-checked).
    pub fn curve_at(&self, x: f64) -> FuzzyNumber {
        let lower = self.rgrid.values().iter().map(|&r| self.curve.lower(r, x)).collect();
        let upper = self.rgrid.values().iter().map(|&r| self.curve.upper(r, x)).collect();
        FuzzyNumber::new_unchecked(self.rgrid.clone(), lower, upper)
    }

    fn spec_with(&self, grid: XGrid, right: Boundary) -> Result<ProblemSpec> {
        ProblemSpec::builder(self.lagrangian.clone())
            .name(self.name.clone())
            .xgrid(grid)
            .rgrid(self.rgrid.clone())
            .orders(self.alpha)
            .left(Boundary::Fixed(self.ya.clone()))
            .right(right)
            .build()
    }

    /// Fixed-left, free-right problem on `[a, b]` with the configured node count.
    pub fn spec_on(&self, b: f64) -> Result<ProblemSpec> {
        self.spec_with(XGrid::new(self.a, b, self.nodes)?, Boundary::Free)
    }

    fn pinned_spec(&self, b: f64) -> Result<ProblemSpec> {
        self.spec_with(XGrid::new(self.a, b, self.nodes)?, Boundary::Fixed(self.curve_at(b)))
    }
}

/// Evaluates the two transversality residuals of one level on a fixed grid.
struct TransversalityEval {
    /// fractional mode: weights giving the quadratic extrapolation of the right integral to b
    v: Option<Vec<f64>>,
}

impl TransversalityEval {
    fn new(spec: &ProblemSpec) -> Self {
        if spec.is_classical() {
            return Self { v: None };
        }
        let n = spec.xgrid().len();
        let ir = reflect_matrix(
            &IntegralStencil::new(n, spec.xgrid().h(), 1.0 - spec.alpha().value()).matrix(n),
        );
        let v = (0..n)
            .map(|j| 3.0 * ir[(n - 2, j)] - 3.0 * ir[(n - 3, j)] + ir[(n - 4, j)])
            .collect();
        Self { v: Some(v) }
    }

    fn eval(&self, spec: &ProblemSpec, curve: &dyn FuzzyCurve, r: f64, yl: &[f64], yu: &[f64]) -> Result<(f64, f64)> {
        let g = spec.xgrid();
        let n = g.len();
        let h = g.h();
        let b = g.b();
        let d = |y: &[f64]| (11.0 * y[n - 1] - 18.0 * y[n - 2] + 9.0 * y[n - 3] - 2.0 * y[n - 4]) / (6.0 * h);
        let (dyl, dyu) = (d(yl), d(yu));
        let (dcl, dcu) = curve_slopes(curve, r, b);
        if !dcl.is_finite() || !dcu.is_finite() {
            return Err(Error::NonFiniteCurve { x: b, r });
        }
        let l = spec.lagrangian();
        let (fhat, pb): ([[f64; 2]; 2], LagrangianPoint) = match &self.v {
            None => {
                let mid = midpoint_points(spec, r, yl, yu);
                let m = mid.len();
                let mut fh = [[0.0; 2]; 2];
                for (bi, bound) in [Bound::Lower, Bound::Upper].into_iter().enumerate() {
                    for (ai, arg) in [Arg::Dcl, Arg::Dcu].into_iter().enumerate() {
                        if !spec.signature().uses(bound, arg) {
                            continue;
                        }
                        let p1 = partial(l, bound, arg, &mid[m - 1]);
                        let p2 = partial(l, bound, arg, &mid[m - 2]);
                        let p3 = partial(l, bound, arg, &mid[m - 3]);
                        fh[bi][ai] = (15.0 * p1 - 10.0 * p2 + 3.0 * p3) / 8.0;
                    }
                }
                let mut p = LagrangianPoint::new(r);
                p[Arg::X] = b;
                p[Arg::Yl] = yl[n - 1];
                p[Arg::Yu] = yu[n - 1];
                p[Arg::Dcl] = dyl;
                p[Arg::Dcu] = dyu;
                p[Arg::Drl] = -dyl;
                p[Arg::Dru] = -dyu;
                set_boundary_args(&mut p, yl, yu, 0, n - 1);
                (fh, p)
            }
            Some(v) => {
                let pts = nodal_points(spec, r, yl, yu);
                let mut fh = [[0.0; 2]; 2];
                for (bi, bound) in [Bound::Lower, Bound::Upper].into_iter().enumerate() {
                    for (ai, arg) in [Arg::Dcl, Arg::Dcu].into_iter().enumerate() {
                        if !spec.signature().uses(bound, arg) {
                            continue;
                        }
                        let f = eval_field(spec, bound, arg, &pts)?;
                        fh[bi][ai] = v.iter().zip(&f).map(|(w, x)| w * x).sum();
                    }
                }
                (fh, pts[n - 1])
            }
        };
        let lv = l.value(Bound::Lower, &pb);
        let uv = l.value(Bound::Upper, &pb);
        if !lv.is_finite() || !uv.is_finite() {
            return Err(Error::NonFinite { node: n - 1, x: b, r });
        }
        let t_lower = fhat[0][0] * (dcl - dyl) + fhat[0][1] * (dcu - dyu) + lv;
        let t_upper = fhat[1][0] * (dcl - dyl) + fhat[1][1] * (dcu - dyu) + uv;
        Ok((t_lower, t_upper))
    }
}

fn check_endpoint(y: &FuzzyTrajectory, b: f64) -> Result<()> {
    let yb = y.xgrid().b();
    if (yb - b).abs() > 1e-12 * b.abs().max(1.0) {
        return Err(Error::XGridMismatch(format!(
            "trajectory ends at {yb}, expected the candidate endpoint {b}"
        )));
    }
    Ok(())
}

/// Lower and upper transversality residuals of level `r` at `x = b`.
///
/// Endpoint values of the right fractional integrals use quadratic extrapolation from the
/// three nearest interior nodes; `Dy(b)` is a third-order one-sided difference.
pub fn transversality_residual(prob: &FreeEndpointProblem, y: &FuzzyTrajectory, b: f64, r: f64) -> Result<(f64, f64)> {
    check_endpoint(y, b)?;
    let k = y
        .rgrid()
        .index_of(r, 1e-12)
        .ok_or_else(|| Error::InvalidRGrid(format!("level {r} is not on the trajectory's r-grid")))?;
    let spec = prob.spec_with(y.xgrid().clone(), Boundary::Free)?;
    if y.xgrid().len() < 5 {
        return Err(Error::InvalidXGrid("transversality needs at least 5 nodes".into()));
    }
    TransversalityEval::new(&spec).eval(&spec, prob.curve(), r, y.lower(k), y.upper(k))
}

/// Interior E-L residuals on `[a, b]` with right operators anchored at `b`.
pub fn el_residuals_free(prob: &FreeEndpointProblem, y: &FuzzyTrajectory, b: f64) -> Result<ResidualReport> {
    check_endpoint(y, b)?;
    let spec = prob.spec_with(y.xgrid().clone(), Boundary::Free)?.with_rgrid(y.rgrid().clone())?;
    el_residuals(&spec, y)
}

#[derive(Clone, Copy, PartialEq)]
enum EndRows {
    Pin,
    Transversal,
}

/// Classical staggered system with node-major rows and interleaved unknowns `[yl0, yu0, yl1, ...]`.
struct ClassicalFreeLevel<'a> {
    spec: &'a ProblemSpec,
    curve: &'a dyn FuzzyCurve,
    teval: &'a TransversalityEval,
    families: Vec<Family>,
    level: usize,
    r: f64,
    mode: EndRows,
    fd_step: f64,
}

fn split(z: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = z.len() / 2;
    ((0..n).map(|i| z[2 * i]).collect(), (0..n).map(|i| z[2 * i + 1]).collect())
}

fn interleave(yl: &[f64], yu: &[f64]) -> DVector<f64> {
    DVector::from_fn(2 * yl.len(), |i, _| if i % 2 == 0 { yl[i / 2] } else { yu[i / 2] })
}

impl ClassicalFreeLevel<'_> {
    fn eval(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let spec = self.spec;
        let n = spec.xgrid().len();
        let h = spec.xgrid().h();
        let b = spec.xgrid().b();
        let (yl, yu) = split(z);
        let mid = midpoint_points(spec, self.r, &yl, &yu);
        let mut fields = Vec::with_capacity(self.families.len());
        for fam in &self.families {
            fields.push((
                eval_field(spec, fam.bound, fam.y, &mid)?,
                eval_field(spec, fam.bound, fam.dc, &mid)?,
                eval_field(spec, fam.bound, fam.dr, &mid)?,
            ));
        }
        let Boundary::Fixed(ya) = spec.left() else {
            unreachable!("free-endpoint specs fix y(a)")
        };
        let mut out = Vec::with_capacity(2 * n);
        out.push(yl[0] - ya.lower()[self.level]);
        out.push(yu[0] - ya.upper()[self.level]);
        for i in 1..n - 1 {
            for (y, p, q) in &fields {
                out.push(0.5 * (y[i - 1] + y[i]) - (p[i] - p[i - 1]) / h + (q[i] - q[i - 1]) / h);
            }
        }
        match self.mode {
            EndRows::Pin => {
                out.push(yl[n - 1] - self.curve.lower(self.r, b));
                out.push(yu[n - 1] - self.curve.upper(self.r, b));
            }
            EndRows::Transversal => {
                let (tl, tu) = self.teval.eval(spec, self.curve, self.r, &yl, &yu)?;
                out.push(tl);
                out.push(tu);
            }
        }
        Ok(DVector::from_vec(out))
    }
}

impl NonlinearSystem for ClassicalFreeLevel<'_> {
    fn dim(&self) -> usize {
        2 * self.spec.xgrid().len()
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.eval(z)
    }

    fn jacobian(&self, z: &DVector<f64>, _r: &DVector<f64>) -> Result<Jacobian> {
        let f = |v: &DVector<f64>| self.eval(v);
        if self.families.len() == 2 {
            Ok(Jacobian::Banded(fd_jacobian_banded(&f, z, 7, 3, self.fd_step)?))
        } else {
            Ok(Jacobian::Dense(fd_jacobian_dense(&f, z, self.fd_step)?))
        }
    }
}

/// Fractional system without natural rows at b, closed by the two transversality rows.
struct FracFreeLevel<'a, 'b> {
    inner: FracLevel<'a, 'b>,
    curve: &'b dyn FuzzyCurve,
    teval: &'b TransversalityEval,
    fd_step: f64,
}

impl FracFreeLevel<'_, '_> {
    fn t(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let n = z.len() / 2;
        let spec = self.inner.sys.spec;
        let (tl, tu) = self
            .teval
            .eval(spec, self.curve, self.inner.r, &z.as_slice()[..n], &z.as_slice()[n..])?;
        Ok(DVector::from_vec(vec![tl, tu]))
    }
}

impl NonlinearSystem for FracFreeLevel<'_, '_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let a = self.inner.residual(z)?;
        let t = self.t(z)?;
        let mut out = DVector::zeros(a.len() + 2);
        out.rows_mut(0, a.len()).copy_from(&a);
        out.rows_mut(a.len(), 2).copy_from(&t);
        Ok(out)
    }

    fn jacobian(&self, z: &DVector<f64>, r: &DVector<f64>) -> Result<Jacobian> {
        let m = r.len() - 2;
        let Jacobian::Dense(ja) = self.inner.jacobian(z, &r.rows(0, m).into_owned())? else {
            unreachable!("fractional Jacobians are dense")
        };
        let f = |v: &DVector<f64>| self.t(v);
        let jt = fd_jacobian_dense(&f, z, self.fd_step)?;
        let mut j = DMatrix::zeros(m + 2, z.len());
        j.rows_mut(0, m).copy_from(&ja);
        j.rows_mut(m, 2).copy_from(&jt);
        Ok(Jacobian::Dense(j))
    }
}

fn solve_level(
    spec: &ProblemSpec,
    prob: &FreeEndpointProblem,
    teval: &TransversalityEval,
    frac: Option<&FracSystem<'_>>,
    level: usize,
    mode: EndRows,
    guess: (Vec<f64>, Vec<f64>),
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    let r = spec.rgrid().values()[level];
    let params = cfg.newton();
    match frac {
        None => {
            let families: Vec<Family> = FAMILIES.iter().copied().filter(|f| active(spec, f)).collect();
            let sys = ClassicalFreeLevel {
                spec,
                curve: prob.curve(),
                teval,
                families,
                level,
                r,
                mode,
                fd_step: cfg.fd_step,
            };
            let mut o = newton(&sys, interleave(&guess.0, &guess.1), &params)?;
            let (l, u) = split(&o.z);
            o.z = DVector::from_iterator(2 * l.len(), l.into_iter().chain(u));
            Ok(o)
        }
        Some(sys) => {
            let z0 = DVector::from_iterator(2 * guess.0.len(), guess.0.into_iter().chain(guess.1));
            let inner = FracLevel { sys, level, r };
            match mode {
                EndRows::Pin => newton(&inner, z0, &params),
                EndRows::Transversal => {
                    let s = FracFreeLevel {
                        inner,
                        curve: prob.curve(),
                        teval,
                        fd_step: cfg.fd_step,
                    };
                    newton(&s, z0, &params)
                }
            }
        }
    }
}

/// Solve the pinned r=1 level on [a,b] and return its lower transversality residual.
fn pinned_top(prob: &FreeEndpointProblem, b: f64, cfg: &SolverConfig) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let spec = prob.pinned_spec(b)?;
    let n = spec.xgrid().len();
    let top = spec.rgrid().len() - 1;
    let guess = straight(prob, &spec, top, b);
    let teval = TransversalityEval::new(&spec);
    let frac = if spec.is_classical() {
        None
    } else {
        Some(FracSystem::new(&spec, cfg.fd_step, true)?)
    };
    let o = solve_level(&spec, prob, &teval, frac.as_ref(), top, EndRows::Pin, guess, cfg)?;
    if !o.converged {
        return Err(Error::NotConverged {
            iterations: o.iterations,
            residual: o.residual,
        });
    }
    let yl = o.z.as_slice()[..n].to_vec();
    let yu = o.z.as_slice()[n..].to_vec();
    let (t, _) = teval.eval(&spec, prob.curve(), 1.0, &yl, &yu)?;
    Ok((t, yl, yu))
}

/// The function bisected by [`solve_free_endpoint`]: lower transversality residual at r=1 of
/// the solution on `[a, b]` pinned to the curve.
pub fn top_transversality(prob: &FreeEndpointProblem, b: f64, cfg: &SolverConfig) -> Result<f64> {
    Ok(pinned_top(prob, b, cfg)?.0)
}

fn straight(prob: &FreeEndpointProblem, spec: &ProblemSpec, level: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    let n = spec.xgrid().len();
    let r = spec.rgrid().values()[level];
    let (l0, u0) = (prob.ya().lower()[level], prob.ya().upper()[level]);
    let (l1, u1) = (prob.curve().lower(r, b), prob.curve().upper(r, b));
    let t = |i: usize| i as f64 / (n - 1) as f64;
    (
        (0..n).map(|i| l0 + t(i) * (l1 - l0)).collect(),
        (0..n).map(|i| u0 + t(i) * (u1 - u0)).collect(),
    )
}

/// Result of [`solve_free_endpoint`].
#[derive(Clone, Debug)]
pub struct FreeEndpointSolution {
    pub b_star: f64,
    pub trajectory: FuzzyTrajectory,
    /// (lower, upper) transversality residual per level
    pub transversality: Vec<(f64, f64)>,
    /// (lower, upper) of y(b*) - C(b*) per level
    pub curve_mismatch: Vec<(f64, f64)>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
    pub errors: Vec<Option<String>>,
    pub bisection_steps: usize,
    pub el: ResidualReport,
    pub alpha: f64,
}

impl FreeEndpointSolution {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    pub fn meta(&self, prob: &FreeEndpointProblem) -> Vec<(String, String)> {
        vec![
            ("problem".into(), prob.name().to_string()),
            ("alpha".into(), format!("{}", self.alpha)),
            ("a".into(), format!("{}", prob.a())),
            ("b_star".into(), format!("{}", self.b_star)),
            ("nodes".into(), format!("{}", self.trajectory.xgrid().len())),
            ("levels".into(), format!("{}", self.trajectory.rgrid().len())),
            ("bisection_steps".into(), format!("{}", self.bisection_steps)),
            ("converged".into(), format!("{}", self.all_converged())),
        ]
    }

    pub fn to_csv(&self, prob: &FreeEndpointProblem) -> String {
        self.trajectory.to_csv(&self.meta(prob))
    }

    /// `b_star,<value>` followed by per-level transversality and curve-mismatch rows.
    pub fn summary_csv(&self) -> String {
        let mut s = format!("b_star,{}\n", self.b_star);
        s.push_str("r,transversality_lower,transversality_upper,mismatch_lower,mismatch_upper,converged\n");
        for (k, &r) in self.trajectory.rgrid().values().iter().enumerate() {
            let (tl, tu) = self.transversality[k];
            let (ml, mu) = self.curve_mismatch[k];
            let _ = writeln!(s, "{r},{tl:e},{tu:e},{ml:e},{mu:e},{}", self.converged[k]);
        }
        s
    }
}

/// Tolerance on b of the bisection.
pub const B_TOL: f64 = 1e-8;

/// Locate b* and solve every level on `[a, b*]`.
///
/// The r=1 level is pinned to the curve and b* is the bisection root of its lower
/// transversality residual, finished by one secant step in the last bracket. Levels r<1 keep y(a) fixed and close the system with their own
/// two transversality conditions, starting from the r=1 solution; their curve mismatch is reported.
pub fn solve_free_endpoint(prob: &FreeEndpointProblem, cfg: &SolverConfig) -> Result<FreeEndpointSolution> {
    if prob.nodes() < 7 {
        return Err(Error::InvalidXGrid("free-endpoint solves need at least 7 nodes".into()));
    }
    let (mut lo, mut hi) = prob.bracket();
    let (flo, _, _) = pinned_top(prob, lo, cfg)?;
    let (fhi, _, _) = pinned_top(prob, hi, cfg)?;
    let flat = 1e-9;
    if flo.abs() <= flat && fhi.abs() <= flat {
        let mut max_abs = flo.abs().max(fhi.abs());
        for k in 1..8 {
            let b = lo + (hi - lo) * k as f64 / 8.0;
            max_abs = max_abs.max(pinned_top(prob, b, cfg)?.0.abs());
        }
        if max_abs <= flat {
            return Err(Error::NonIsolatedRoot { lo, hi, max_abs });
        }
    }
    if flo * fhi > 0.0 {
        return Err(Error::NoSignChange {
            lo,
            hi,
            flo,
            fhi,
        });
    }
    let (mut f_lo, mut f_hi) = (flo, fhi);
    let mut steps = 0;
    let b_star = if flo == 0.0 {
        lo
    } else if fhi == 0.0 {
        hi
    } else {
        let mut exact = None;
        while hi - lo > B_TOL {
            let mid = 0.5 * (lo + hi);
            let (fm, _, _) = pinned_top(prob, mid, cfg)?;
            steps += 1;
            if fm == 0.0 {
                exact = Some(mid);
                break;
            }
            if (fm > 0.0) == (f_lo > 0.0) {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
                f_hi = fm;
            }
        }
        // secant step inside the final bracket
        exact.unwrap_or_else(|| (lo - f_lo * (hi - lo) / (f_hi - f_lo)).clamp(lo, hi))
    };

    let spec = prob.spec_on(b_star)?;
    let n = spec.xgrid().len();
    let top = spec.rgrid().len() - 1;
    let (_, tyl, tyu) = pinned_top(prob, b_star, cfg)?;
    let teval = TransversalityEval::new(&spec);
    let frac = if spec.is_classical() {
        None
    } else {
        Some(FracSystem::new(&spec, cfg.fd_step, false)?)
    };
    let levels: Vec<usize> = (0..spec.rgrid().len()).collect();
    let outs: Vec<(Vec<f64>, Vec<f64>, bool, usize, Option<String>)> = levels
        .par_iter()
        .map(|&k| {
            if k == top {
                return (tyl.clone(), tyu.clone(), true, 0, None);
            }
            match solve_level(
                &spec,
                prob,
                &teval,
                frac.as_ref(),
                k,
                EndRows::Transversal,
                (tyl.clone(), tyu.clone()),
                cfg,
            ) {
                Ok(o) => {
                    let err = (!o.converged).then(|| {
                        Error::NotConverged {
                            iterations: o.iterations,
                            residual: o.residual,
                        }
                        .to_string()
                    });
                    (o.z.as_slice()[..n].to_vec(), o.z.as_slice()[n..].to_vec(), o.converged, o.iterations, err)
                }
                Err(e) => (tyl.clone(), tyu.clone(), false, 0, Some(e.to_string())),
            }
        })
        .collect();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut converged = Vec::new();
    let mut iterations = Vec::new();
    let mut errors = Vec::new();
    for (l, u, c, it, e) in outs {
        lower.push(l);
        upper.push(u);
        converged.push(c);
        iterations.push(it);
        errors.push(e);
    }
    let trajectory = FuzzyTrajectory::new(spec.xgrid().clone(), spec.rgrid().clone(), lower, upper)?;
    let mut transversality = Vec::new();
    let mut curve_mismatch = Vec::new();
    for (k, &r) in spec.rgrid().values().iter().enumerate() {
        let (yl, yu) = (trajectory.lower(k), trajectory.upper(k));
        transversality.push(teval.eval(&spec, prob.curve(), r, yl, yu)?);
        curve_mismatch.push((
            yl[n - 1] - prob.curve().lower(r, b_star),
            yu[n - 1] - prob.curve().upper(r, b_star),
        ));
    }
    let el = el_residuals(&spec, &trajectory)?;
    Ok(FreeEndpointSolution {
        b_star,
        trajectory,
        transversality,
        curve_mismatch,
        converged,
        iterations,
        errors,
        bisection_steps: steps,
        el,
        alpha: prob.alpha().value(),
    })
}

