//! Level-wise damped Newton solver for fuzzy fractional variational problems.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frac_ops::{reflect_matrix, CaputoStencil, IntegralStencil};
use crate::linalg::{fd_jacobian_dense, newton, Jacobian, NewtonParams, NonlinearSystem};
use crate::variational::{
    el_residuals, eval_field, fd_second, mid_extrap, midpoint_points, natural_bc_residuals, nodal_points,
    set_boundary_args, trapz, Arg, Boundary, Bound, Family, FuzzyTrajectory, LagrangianPoint, Order,
    ProblemSpec, ResidualReport, TrajectoryStacking, FAMILIES,
};

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// grid size used by drivers that build the grid themselves
    pub nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// initial Newton step length
    pub damping: f64,
    /// relative finite-difference step of the Jacobian
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nodes: 201,
            tol: 1e-9,
            max_iter: 200,
            damping: 1.0,
            fd_step: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn newton(&self) -> NewtonParams {
        NewtonParams {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
        }
    }
}

/// Outcome of [`solve_ffvp`].
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub trajectory: FuzzyTrajectory,
    /// convergence flag per level
    pub converged: Vec<bool>,
    /// failure message per level (non-convergence, singular Jacobian, ...)
    pub errors: Vec<Option<String>>,
    /// Newton iterations per level
    pub iterations: Vec<usize>,
    /// final max-abs discrete residual per level
    pub residuals: Vec<f64>,
    pub el: ResidualReport,
    pub bc: ResidualReport,
    pub stacking: TrajectoryStacking,
    pub alpha: f64,
    pub beta: f64,
}

impl SolveResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    /// Human-readable warnings (currently: stacking violations of the computed trajectory).
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if !self.stacking.nodes.is_empty() {
            w.push(format!(
                "level intervals are not nested at {} node(s), first at node {}",
                self.stacking.nodes.len(),
                self.stacking.nodes[0].0
            ));
        }
        for (k, e) in self.errors.iter().enumerate() {
            if let Some(e) = e {
                w.push(format!("level {k}: {e}"));
            }
        }
        if !self.stacking.crossings.is_empty() {
            let (k, i) = self.stacking.crossings[0];
            w.push(format!(
                "lower exceeds upper at {} point(s), first at level {k}, node {i}",
                self.stacking.crossings.len()
            ));
        }
        w
    }

    pub fn meta(&self, spec: &ProblemSpec) -> Vec<(String, String)> {
        vec![
            ("problem".into(), spec.name().to_string()),
            ("alpha".into(), format!("{}", self.alpha)),
            ("beta".into(), format!("{}", self.beta)),
            ("nodes".into(), format!("{}", spec.xgrid().len())),
            ("levels".into(), format!("{}", spec.rgrid().len())),
            ("iterations".into(), format!("{}", self.total_iterations())),
            ("max_residual".into(), format!("{:e}", self.max_residual())),
            ("converged".into(), format!("{}", self.all_converged())),
        ]
    }

    pub fn to_csv(&self, spec: &ProblemSpec) -> String {
        self.trajectory.to_csv(&self.meta(spec))
    }
}

/// Field key: (bound, argument) of a first partial `dL_bound/d arg`.
type FieldKey = (Bound, Arg);

fn key_ord(k: &FieldKey) -> (usize, usize) {
    (if k.0 == Bound::Lower { 0 } else { 1 }, k.1.slot())
}

/// Row weights against the fields, the unknowns, and a per-level constant.
struct LinearRows {
    rows: usize,
    fields: Vec<(FieldKey, DMatrix<f64>)>,
    z: DMatrix<f64>,
    /// (row, end, upper_state): constant `-value` of a Dirichlet row
    fixed: Vec<(usize, bool, bool)>,
}

impl LinearRows {
    fn field_mut(&mut self, key: FieldKey, n: usize) -> &mut DMatrix<f64> {
        let pos = match self.fields.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                self.fields.push((key, DMatrix::zeros(self.rows, n)));
                self.fields.len() - 1
            }
        };
        &mut self.fields[pos].1
    }
}

#[derive(Clone, Copy)]
enum Stencil {
    Central,
    Forward,
    Backward,
}

fn stencil_weights(s: Stencil, i: usize, h: f64) -> Vec<(usize, f64)> {
    let c = 1.0 / (2.0 * h);
    match s {
        Stencil::Central => vec![(i - 1, -c), (i + 1, c)],
        Stencil::Forward => vec![(i, -3.0 * c), (i + 1, 4.0 * c), (i + 2, -c)],
        Stencil::Backward => vec![(i, 3.0 * c), (i - 1, -4.0 * c), (i - 2, c)],
    }
}

/// Discrete fractional system of one problem; rows are shared by all levels.
pub(crate) struct FracSystem<'a> {
    pub(crate) spec: &'a ProblemSpec,
    n: usize,
    cap_a: Option<CaputoStencil>,
    cap_b: Option<CaputoStencil>,
    c_left: Option<DMatrix<f64>>,
    c_right: Option<DMatrix<f64>>,
    lin: LinearRows,
    fd_step: f64,
}

pub(crate) fn active(spec: &ProblemSpec, f: &Family) -> bool {
    let s = spec.signature();
    s.uses(f.bound, f.y) || s.uses(f.bound, f.dc) || s.uses(f.bound, f.dr)
}

impl<'a> FracSystem<'a> {
    /// `natural_right = false` leaves out the natural rows at b (the caller supplies its own).
    pub(crate) fn new(spec: &'a ProblemSpec, fd_step: f64, natural_right: bool) -> Result<Self> {
        let g = spec.xgrid();
        let n = g.len();
        let h = g.h();
        if n < 7 {
            return Err(Error::InvalidXGrid("the fractional solver needs at least 7 nodes".into()));
        }
        let sig = spec.signature();
        let uses_c = sig.uses_any(Arg::Dcl) || sig.uses_any(Arg::Dcu);
        let uses_r = sig.uses_any(Arg::Drl) || sig.uses_any(Arg::Dru);
        let (alpha, beta) = (spec.alpha().value(), spec.beta().value());
        let cap_a = uses_c.then(|| CaputoStencil::new(n, h, alpha));
        let cap_b = uses_r.then(|| CaputoStencil::new(n, h, beta));
        let c_left = cap_a.as_ref().map(|c| c.matrix(n));
        let c_right = cap_b.as_ref().map(|c| reflect_matrix(&c.matrix(n)));
        let i_right = reflect_matrix(&IntegralStencil::new(n, h, 1.0 - alpha).matrix(n));
        let i_left = if uses_r {
            IntegralStencil::new(n, h, 1.0 - beta).matrix(n)
        } else {
            DMatrix::zeros(n, n)
        };

        // row plan
        enum Row {
            El(usize, usize, Stencil),
            Cont(bool, bool),
            Bc(usize, bool),
            Fix(bool, bool),
        }
        let mut plan = Vec::new();
        for (e, fam) in FAMILIES.iter().enumerate() {
            if !active(spec, fam) {
                continue;
            }
            let has_c = sig.uses(fam.bound, fam.dc);
            let has_r = sig.uses(fam.bound, fam.dr);
            if has_r && !has_c {
                plan.push(Row::Cont(false, fam.upper_state));
            } else {
                plan.push(Row::El(e, 1, Stencil::Forward));
            }
            for i in 2..=n - 3 {
                plan.push(Row::El(e, i, Stencil::Central));
            }
            if has_c && !has_r {
                plan.push(Row::Cont(true, fam.upper_state));
            } else {
                plan.push(Row::El(e, n - 2, Stencil::Backward));
            }
            if spec.left().is_free() {
                plan.push(Row::Bc(e, false));
            }
            if spec.right().is_free() && natural_right {
                plan.push(Row::Bc(e, true));
            }
        }
        for (end, bd) in [(false, spec.left()), (true, spec.right())] {
            if let Boundary::Fixed(_) = bd {
                plan.push(Row::Fix(end, false));
                plan.push(Row::Fix(end, true));
            }
        }
        if plan.is_empty() {
            return Err(Error::InvalidProblem("the integrand does not depend on the trajectory".into()));
        }
        let rows = plan.len();
        let mut lin = LinearRows {
            rows,
            fields: Vec::new(),
            z: DMatrix::zeros(rows, 2 * n),
            fixed: Vec::new(),
        };
        let tw: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
        for (row, item) in plan.iter().enumerate() {
            match *item {
                Row::El(e, i, st) => {
                    let fam = &FAMILIES[e];
                    if sig.uses(fam.bound, fam.y) {
                        lin.field_mut((fam.bound, fam.y), n)[(row, i)] += 1.0;
                    }
                    let w = stencil_weights(st, i, h);
                    if sig.uses(fam.bound, fam.dc) {
                        let m = lin.field_mut((fam.bound, fam.dc), n);
                        for &(k, c) in &w {
                            for j in 0..n {
                                m[(row, j)] -= c * i_right[(k, j)];
                            }
                        }
                    }
                    if sig.uses(fam.bound, fam.dr) {
                        let m = lin.field_mut((fam.bound, fam.dr), n);
                        for &(k, c) in &w {
                            for j in 0..n {
                                m[(row, j)] += c * i_left[(k, j)];
                            }
                        }
                    }
                }
                Row::Cont(at_b, up) => {
                    let off = if up { n } else { 0 };
                    let idx = if at_b { [n - 1, n - 2, n - 3, n - 4] } else { [0, 1, 2, 3] };
                    for (k, c) in idx.iter().zip([1.0, -3.0, 3.0, -1.0]) {
                        lin.z[(row, off + k)] = c;
                    }
                }
                Row::Bc(e, at_b) => {
                    let fam = &FAMILIES[e];
                    let arg = if at_b { fam.at_b } else { fam.at_a };
                    if sig.uses(fam.bound, arg) {
                        let m = lin.field_mut((fam.bound, arg), n);
                        for j in 0..n {
                            m[(row, j)] += tw[j];
                        }
                    }
                    // endpoint extrapolation 2 v[1] - v[2] (at a) or 2 v[n-2] - v[n-3] (at b)
                    let (k1, k2) = if at_b { (n - 2, n - 3) } else { (1, 2) };
                    let sgn = if at_b { 1.0 } else { -1.0 };
                    if sig.uses(fam.bound, fam.dc) {
                        let m = lin.field_mut((fam.bound, fam.dc), n);
                        for j in 0..n {
                            m[(row, j)] += sgn * (2.0 * i_right[(k1, j)] - i_right[(k2, j)]);
                        }
                    }
                    if sig.uses(fam.bound, fam.dr) {
                        let m = lin.field_mut((fam.bound, fam.dr), n);
                        for j in 0..n {
                            m[(row, j)] -= sgn * (2.0 * i_left[(k1, j)] - i_left[(k2, j)]);
                        }
                    }
                }
                Row::Fix(at_b, up) => {
                    let off = if up { n } else { 0 };
                    lin.z[(row, off + if at_b { n - 1 } else { 0 })] = 1.0;
                    lin.fixed.push((row, at_b, up));
                }
            }
        }
        lin.fields.sort_by_key(|(k, _)| key_ord(k));
        Ok(Self {
            spec,
            n,
            cap_a,
            cap_b,
            c_left,
            c_right,
            lin,
            fd_step,
        })
    }

    pub(crate) fn points(&self, r: f64, z: &DVector<f64>) -> Vec<LagrangianPoint> {
        let n = self.n;
        let yl = &z.as_slice()[..n];
        let yu = &z.as_slice()[n..];
        let sig = self.spec.signature();
        let apply = |st: &Option<CaputoStencil>, y: &[f64], right: bool, used: bool| -> Vec<f64> {
            let mut out = vec![0.0; n];
            if let (Some(st), true) = (st, used) {
                if right {
                    st.apply_right(y, &mut out);
                } else {
                    st.apply(y, &mut out);
                }
            }
            out
        };
        let dcl = apply(&self.cap_a, yl, false, sig.uses_any(Arg::Dcl));
        let dcu = apply(&self.cap_a, yu, false, sig.uses_any(Arg::Dcu));
        let drl = apply(&self.cap_b, yl, true, sig.uses_any(Arg::Drl));
        let dru = apply(&self.cap_b, yu, true, sig.uses_any(Arg::Dru));
        let (ia, ib) = self.spec.inner().map(|i| (i.ia, i.ib)).unwrap_or((0, n - 1));
        let g = self.spec.xgrid();
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

    fn fixed_value(&self, level: usize, at_b: bool, up: bool) -> f64 {
        let bd = if at_b { self.spec.right() } else { self.spec.left() };
        match bd {
            Boundary::Fixed(v) => {
                if up {
                    v.upper()[level]
                } else {
                    v.lower()[level]
                }
            }
            Boundary::Free => 0.0,
        }
    }
}

pub(crate) struct FracLevel<'a, 'b> {
    pub sys: &'b FracSystem<'a>,
    pub level: usize,
    pub r: f64,
}

impl NonlinearSystem for FracLevel<'_, '_> {
    fn dim(&self) -> usize {
        2 * self.sys.n
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let s = self.sys;
        let pts = s.points(self.r, z);
        let mut out = &s.lin.z * z;
        for (row, at_b, up) in &s.lin.fixed {
            out[*row] -= s.fixed_value(self.level, *at_b, *up);
        }
        for ((bound, arg), v) in &s.lin.fields {
            let f = DVector::from_vec(eval_field(s.spec, *bound, *arg, &pts)?);
            out.gemv(1.0, v, &f, 1.0);
        }
        Ok(out)
    }

    fn jacobian(&self, z: &DVector<f64>, _r: &DVector<f64>) -> Result<Jacobian> {
        let s = self.sys;
        let n = s.n;
        let pts = s.points(self.r, z);
        let l = s.spec.lagrangian();
        let sig = s.spec.signature();
        let mut j = s.lin.z.clone();
        let (ia, ib) = s.spec.inner().map(|i| (i.ia, i.ib)).unwrap_or((0, n - 1));
        for ((bound, arg), v) in &s.lin.fields {
            for w in sig.args_of(*bound) {
                let hv: Vec<f64> = pts.iter().map(|p| fd_second(l, *bound, *arg, w, p, s.fd_step)).collect();
                if hv.iter().all(|x| *x == 0.0) {
                    continue;
                }
                if let Some(i) = hv.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { node: i, x: pts[i][Arg::X], r: self.r });
                }
                let mut scaled = v.clone();
                for (c, hc) in hv.iter().enumerate() {
                    scaled.column_mut(c).scale_mut(*hc);
                }
                fn dense(m: &Option<DMatrix<f64>>) -> &DMatrix<f64> {
                    m.as_ref().expect("operator built for used args")
                }
                match w {
                    Arg::X => {}
                    Arg::Yl => j.columns_mut(0, n).add_assign(&scaled),
                    Arg::Yu => j.columns_mut(n, n).add_assign(&scaled),
                    Arg::Dcl => j.columns_mut(0, n).gemm(1.0, &scaled, dense(&s.c_left), 1.0),
                    Arg::Dcu => j.columns_mut(n, n).gemm(1.0, &scaled, dense(&s.c_left), 1.0),
                    Arg::Drl => j.columns_mut(0, n).gemm(1.0, &scaled, dense(&s.c_right), 1.0),
                    Arg::Dru => j.columns_mut(n, n).gemm(1.0, &scaled, dense(&s.c_right), 1.0),
                    other => {
                        let col = match other {
                            Arg::Yla => 0,
                            Arg::Yua => n,
                            Arg::Ylb => n - 1,
                            Arg::Yub => 2 * n - 1,
                            Arg::YlA => ia,
                            Arg::YuA => n + ia,
                            Arg::YlB => ib,
                            Arg::YuB => n + ib,
                            _ => unreachable!(),
                        };
                        let sum = scaled.column_sum();
                        let mut c = j.column_mut(col);
                        c += sum;
                    }
                }
            }
        }
        Ok(Jacobian::Dense(j))
    }
}

trait AddAssignView {
    fn add_assign(self, m: &DMatrix<f64>);
}

impl AddAssignView for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign(mut self, m: &DMatrix<f64>) {
        self += m;
    }
}

/// Classical staggered system of one level; Jacobian by dense finite differences.
struct ClassicalLevel<'a> {
    spec: &'a ProblemSpec,
    level: usize,
    r: f64,
    fd_step: f64,
}

impl ClassicalLevel<'_> {
    fn eval(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let spec = self.spec;
        let sig = spec.signature();
        let n = spec.xgrid().len();
        let h = spec.xgrid().h();
        let yl = &z.as_slice()[..n];
        let yu = &z.as_slice()[n..];
        let mid = midpoint_points(spec, self.r, yl, yu);
        let any_free = spec.left().is_free() || spec.right().is_free();
        let nodal = if any_free { nodal_points(spec, self.r, yl, yu) } else { Vec::new() };
        let mut out = Vec::with_capacity(2 * n);
        for fam in FAMILIES.iter().filter(|f| active(spec, f)) {
            let y = eval_field(spec, fam.bound, fam.y, &mid)?;
            let p = eval_field(spec, fam.bound, fam.dc, &mid)?;
            let q = eval_field(spec, fam.bound, fam.dr, &mid)?;
            for i in 1..n - 1 {
                out.push(0.5 * (y[i - 1] + y[i]) - (p[i] - p[i - 1]) / h + (q[i] - q[i - 1]) / h);
            }
            for (free, at_b) in [(spec.left().is_free(), false), (spec.right().is_free(), true)] {
                if !free {
                    continue;
                }
                let arg = if at_b { fam.at_b } else { fam.at_a };
                let integral = if sig.uses(fam.bound, arg) {
                    trapz(&eval_field(spec, fam.bound, arg, &nodal)?, h)
                } else {
                    0.0
                };
                let e = mid_extrap(&p, at_b) - mid_extrap(&q, at_b);
                out.push(if at_b { integral + e } else { integral - e });
            }
        }
        for (at_b, bd) in [(false, spec.left()), (true, spec.right())] {
            if let Boundary::Fixed(v) = bd {
                let i = if at_b { n - 1 } else { 0 };
                out.push(yl[i] - v.lower()[self.level]);
                out.push(yu[i] - v.upper()[self.level]);
            }
        }
        Ok(DVector::from_vec(out))
    }
}

impl NonlinearSystem for ClassicalLevel<'_> {
    fn dim(&self) -> usize {
        2 * self.spec.xgrid().len()
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.eval(z)
    }

    fn jacobian(&self, z: &DVector<f64>, _r: &DVector<f64>) -> Result<Jacobian> {
        let f = |v: &DVector<f64>| self.eval(v);
        Ok(Jacobian::Dense(fd_jacobian_dense(&f, z, self.fd_step)?))
    }
}

/// Straight line between fixed end values; constant when only one end is fixed.
pub(crate) fn initial_guess(spec: &ProblemSpec, level: usize) -> DVector<f64> {
    let n = spec.xgrid().len();
    let end = |b: &Boundary| match b {
        Boundary::Fixed(v) => Some((v.lower()[level], v.upper()[level])),
        Boundary::Free => None,
    };
    let (l, r) = match (end(spec.left()), end(spec.right())) {
        (Some(l), Some(r)) => (l, r),
        (Some(l), None) => (l, l),
        (None, Some(r)) => (r, r),
        (None, None) => ((0.0, 0.0), (0.0, 0.0)),
    };
    let mut z = DVector::zeros(2 * n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        z[i] = l.0 + t * (r.0 - l.0);
        z[n + i] = l.1 + t * (r.1 - l.1);
    }
    z
}

struct LevelOutcome {
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
    error: Option<String>,
}

fn run_levels(
    spec: &ProblemSpec,
    solve: &(dyn Fn(usize, f64) -> Result<crate::linalg::NewtonOutcome> + Sync),
) -> Vec<LevelOutcome> {
    let n = spec.xgrid().len();
    let rs: Vec<(usize, f64)> = spec.rgrid().values().iter().cloned().enumerate().collect();
    rs.par_iter()
        .map(|&(k, r)| match solve(k, r) {
            Ok(o) => LevelOutcome {
                lower: o.z.as_slice()[..n].to_vec(),
                upper: o.z.as_slice()[n..].to_vec(),
                iterations: o.iterations,
                residual: o.residual,
                converged: o.converged,
                error: (!o.converged).then(|| {
                    Error::NotConverged {
                        iterations: o.iterations,
                        residual: o.residual,
                    }
                    .to_string()
                }),
            },
            Err(e) => {
                let z = initial_guess(spec, k);
                LevelOutcome {
                    lower: z.as_slice()[..n].to_vec(),
                    upper: z.as_slice()[n..].to_vec(),
                    iterations: 0,
                    residual: f64::NAN,
                    converged: false,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect()
}

fn finish(spec: &ProblemSpec, outs: Vec<LevelOutcome>) -> Result<SolveResult> {
    let mut lower = vec![];
    let mut upper = vec![];
    let mut iterations = vec![];
    let mut residuals = vec![];
    let mut converged = vec![];
    let mut errors = vec![];
    for o in outs {
        lower.push(o.lower);
        upper.push(o.upper);
        iterations.push(o.iterations);
        residuals.push(o.residual);
        converged.push(o.converged);
        errors.push(o.error);
    }
    let trajectory = FuzzyTrajectory::new(spec.xgrid().clone(), spec.rgrid().clone(), lower, upper)?;
    let el = el_residuals(spec, &trajectory)?;
    let bc = natural_bc_residuals(spec, &trajectory)?;
    let stacking = trajectory.stacking(1e-9);
    Ok(SolveResult {
        trajectory,
        converged,
        errors,
        iterations,
        residuals,
        el,
        bc,
        stacking,
        alpha: spec.alpha().value(),
        beta: spec.beta().value(),
    })
}

/// Solve every r-level of the problem by damped Newton.
///
/// Fractional mode imposes the E-L equations on nodes `2..N-3` with central differences.
/// Node 1 and node N-2 get one-sided E-L rows, or a third-difference regularity row on the
/// side where the family has no operator anchored there.
pub fn solve_ffvp(p: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    if p.inner().is_some() {
        return Err(Error::InvalidProblem(
            "solving subinterval problems is not supported; use subinterval_residuals".into(),
        ));
    }
    let params = cfg.newton();
    let outs = if p.is_classical() {
        if p.xgrid().len() < 4 {
            return Err(Error::InvalidXGrid("the classical solver needs at least 4 nodes".into()));
        }
        run_levels(p, &|k, r| {
            let sys = ClassicalLevel {
                spec: p,
                level: k,
                r,
                fd_step: cfg.fd_step,
            };
            newton(&sys, initial_guess(p, k), &params)
        })
    } else {
        let sys = FracSystem::new(p, cfg.fd_step, true)?;
        run_levels(p, &|k, r| {
            let lvl = FracLevel { sys: &sys, level: k, r };
            newton(&lvl, initial_guess(p, k), &params)
        })
    };
    finish(p, outs)
}

/// Solve the same problem with both orders set to 1.
pub fn solve_classical_limit(p: &ProblemSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_ffvp(&p.with_orders(Order::Classical, Order::Classical)?, cfg)
}

/// One entry of [`alpha_sweep`].
#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub alpha: f64,
    pub result: SolveResult,
    /// sup distance to the reference trajectory, when one is given
    pub distance: Option<f64>,
}

/// Solve for each order (alpha = beta) and measure the distance to `reference(r, x)`.
pub fn alpha_sweep(
    p: &ProblemSpec,
    alphas: &[f64],
    reference: Option<&dyn Fn(f64, f64) -> (f64, f64)>,
    cfg: &SolverConfig,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let o = Order::from_value(a)?;
        let spec = p.with_orders(o, o)?;
        let result = solve_ffvp(&spec, cfg)?;
        let distance = match reference {
            Some(f) => {
                let exact = FuzzyTrajectory::from_fn(spec.xgrid(), spec.rgrid(), f);
                Some(result.trajectory.sup_distance(&exact)?)
            }
            None => None,
        };
        out.push(SweepEntry {
            alpha: a,
            result,
            distance,
        });
    }
    Ok(out)
}

/// CSV `alpha,iterations,max_residual,distance` of a sweep.
pub fn sweep_summary_csv(entries: &[SweepEntry]) -> String {
    let mut s = String::from("alpha,iterations,max_residual,distance\n");
    for e in entries {
        let d = e.distance.map(|d| format!("{d:e}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{:e},{}",
            e.alpha,
            e.result.total_iterations(),
            e.result.max_residual(),
            d
        );
    }
    s
}

/// Key/value metadata of a problem, for output headers.
pub fn problem_meta(p: &ProblemSpec) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("problem".into(), p.name().to_string());
    m.insert("a".into(), format!("{}", p.xgrid().a()));
    m.insert("b".into(), format!("{}", p.xgrid().b()));
    m.insert("nodes".into(), format!("{}", p.xgrid().len()));
    m.insert("alpha".into(), format!("{}", p.alpha().value()));
    m.insert("beta".into(), format!("{}", p.beta().value()));
    m
}
