//! TOML problem configuration.
//!
//! ```toml
//! [problem]
//! builtin = "example2"      # or lower = "...", upper = "..." with a, b
//! alpha = 0.9
//!
//! [grid]
//! nodes = 201
//! rlevels = 11
//! ```
//!
//! See the repository README for the full schema.

use std::path::Path;
use std::sync::Arc;

use fuzzyfrac::frac_ops::{GhCase, XGrid};
use fuzzyfrac::fuzzy_core::{FuzzyNumber, RGrid, TriangularFuzzyNumber};
use fuzzyfrac::problems::{builtin, closed_form, example3, BUILTIN_NAMES};
use fuzzyfrac::solver::SolverConfig;
use fuzzyfrac::transversality::{FreeEndpointProblem, FuzzyCurve};
use fuzzyfrac::variational::{Arg, Bound, Boundary, Lagrangian, LagrangianPoint, Order, ProblemSpec, NARGS};
use serde::Deserialize;

use crate::error::CliError;
use crate::expr::Expr;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub solver: SolverSection,
    pub curve: Option<CurveSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub builtin: Option<String>,
    /// integrand of the lower level function
    pub lower: Option<String>,
    pub upper: Option<String>,
    pub alpha: f64,
    /// defaults to alpha
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// inner interval [A, B] of a subinterval problem
    pub inner: Option<[f64; 2]>,
    pub gh_case: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nodes: Option<usize>,
    pub rlevels: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndMode {
    Fixed,
    Free,
}

/// Crisp value, triangle `[l, m, u]`, or a level table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FuzzyValue {
    Crisp(f64),
    Triangle([f64; 3]),
    Table(LevelTable),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelTable {
    pub r: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub left: Option<EndMode>,
    pub left_value: Option<FuzzyValue>,
    pub right: Option<EndMode>,
    pub right_value: Option<FuzzyValue>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub fd_step: Option<f64>,
    /// pass threshold of residual checks
    pub residual_tolerance: Option<f64>,
}

/// Terminal curve for free-endpoint runs; expressions in `r` and `x`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub lower: Option<String>,
    pub upper: Option<String>,
    pub bracket: [f64; 2],
}

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub nodes: Option<usize>,
    pub rlevels: Option<usize>,
    /// sets both orders
    pub alpha: Option<f64>,
    /// Newton tolerance and residual pass threshold
    pub tolerance: Option<f64>,
}

#[derive(Debug)]
pub enum Problem {
    Fixed(ProblemSpec),
    Free(FreeEndpointProblem),
}

#[derive(Debug)]
pub struct Resolved {
    pub problem: Problem,
    pub solver: SolverConfig,
    /// pass threshold of residual checks
    pub check_tol: f64,
    pub closed_form: Option<fn(f64, f64) -> (f64, f64)>,
}

impl Resolved {
    pub fn name(&self) -> &str {
        match &self.problem {
            Problem::Fixed(p) => p.name(),
            Problem::Free(p) => p.name(),
        }
    }
}

pub const DEFAULT_CHECK_TOL: f64 = 1e-6;

/// Variable table of Lagrangian expressions: the argument names, then `r`.
pub fn lagrangian_vars() -> Vec<&'static str> {
    let mut v: Vec<&str> = Arg::ALL.iter().map(|a| a.name()).collect();
    v.push("r");
    v
}

pub const CURVE_VARS: [&str; 2] = ["r", "x"];

/// Lagrangian given by two expressions, with symbolic partials where every function has a rule.
pub struct ExprLagrangian {
    exprs: [Expr; 2],
    partials: [Vec<Option<Expr>>; 2],
}

impl ExprLagrangian {
    pub fn parse(lower: &str, upper: &str) -> Result<Self, CliError> {
        let vars = lagrangian_vars();
        let l = Expr::parse(lower, &vars)?;
        let u = Expr::parse(upper, &vars)?;
        let d = |e: &Expr| (0..NARGS).map(|i| e.derivative(i)).collect::<Vec<_>>();
        Ok(Self {
            partials: [d(&l), d(&u)],
            exprs: [l, u],
        })
    }

    fn idx(bound: Bound) -> usize {
        match bound {
            Bound::Lower => 0,
            Bound::Upper => 1,
        }
    }

    fn vars(p: &LagrangianPoint) -> [f64; NARGS + 1] {
        let mut v = [0.0; NARGS + 1];
        v[..NARGS].copy_from_slice(&p.args);
        v[NARGS] = p.r;
        v
    }
}

impl Lagrangian for ExprLagrangian {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        self.exprs[Self::idx(bound)].eval(&Self::vars(p))
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        self.partials[Self::idx(bound)][arg.slot()]
            .as_ref()
            .map(|d| d.eval(&Self::vars(p)))
    }
}

pub struct ExprCurve {
    lower: Expr,
    upper: Expr,
    d_lower: Option<Expr>,
    d_upper: Option<Expr>,
}

impl ExprCurve {
    pub fn parse(lower: &str, upper: &str) -> Result<Self, CliError> {
        let l = Expr::parse(lower, &CURVE_VARS)?;
        let u = Expr::parse(upper, &CURVE_VARS)?;
        Ok(Self {
            d_lower: l.derivative(1),
            d_upper: u.derivative(1),
            lower: l,
            upper: u,
        })
    }
}

impl FuzzyCurve for ExprCurve {
    fn lower(&self, r: f64, x: f64) -> f64 {
        self.lower.eval(&[r, x])
    }

    fn upper(&self, r: f64, x: f64) -> f64 {
        self.upper.eval(&[r, x])
    }

    fn d_lower(&self, r: f64, x: f64) -> Option<f64> {
        self.d_lower.as_ref().map(|d| d.eval(&[r, x]))
    }

    fn d_upper(&self, r: f64, x: f64) -> Option<f64> {
        self.d_upper.as_ref().map(|d| d.eval(&[r, x]))
    }
}

impl FuzzyValue {
    pub fn expand(&self, rgrid: &RGrid) -> Result<FuzzyNumber, CliError> {
        Ok(match self {
            FuzzyValue::Crisp(c) => FuzzyNumber::crisp(rgrid, *c),
            FuzzyValue::Triangle([l, m, u]) => TriangularFuzzyNumber::new(*l, *m, *u)?.expand(rgrid),
            FuzzyValue::Table(t) => FuzzyNumber::new(RGrid::new(t.r.clone())?, t.lower.clone(), t.upper.clone())?
                .resample(rgrid),
        })
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    toml::from_str(text).map_err(|e| bad(e.to_string()))
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => bad(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn end(mode: Option<EndMode>, value: &Option<FuzzyValue>, side: &str, rgrid: &RGrid) -> Result<Boundary, CliError> {
    match (mode, value) {
        (Some(EndMode::Free), Some(_)) => Err(bad(format!("boundary.{side} is free but boundary.{side}_value is set"))),
        (Some(EndMode::Fixed), None) => Err(bad(format!("boundary.{side} is fixed but boundary.{side}_value is missing"))),
        (_, Some(v)) => Ok(Boundary::Fixed(v.expand(rgrid)?)),
        (_, None) => Ok(Boundary::Free),
    }
}

impl Config {
    fn uses_boundary(&self) -> bool {
        let b = &self.boundary;
        b.left.is_some() || b.left_value.is_some() || b.right.is_some() || b.right_value.is_some()
    }

    /// Build the problem and solver settings, applying command-line overrides.
    pub fn resolve(&self, o: &Overrides) -> Result<Resolved, CliError> {
        let p = &self.problem;
        let nodes = o.nodes.or(self.grid.nodes).unwrap_or(SolverConfig::default().nodes);
        let rlevels = o.rlevels.or(self.grid.rlevels).unwrap_or(RGrid::default().len());
        let rgrid = RGrid::uniform(rlevels)?;
        let (alpha, beta) = match o.alpha {
            Some(a) => (a, a),
            None => (p.alpha, p.beta.unwrap_or(p.alpha)),
        };
        let (alpha, beta) = (Order::from_value(alpha)?, Order::from_value(beta)?);
        let mut solver = SolverConfig {
            nodes,
            ..SolverConfig::default()
        };
        let s = &self.solver;
        if let Some(v) = s.tol {
            solver.tol = v;
        }
        if let Some(v) = s.max_iter {
            solver.max_iter = v;
        }
        if let Some(v) = s.damping {
            solver.damping = v;
        }
        if let Some(v) = s.fd_step {
            solver.fd_step = v;
        }
        if let Some(v) = o.tolerance {
            solver.tol = v;
        }
        if !(solver.tol > 0.0 && solver.tol < 1.0) {
            return Err(bad(format!("solver tolerance {} must lie in (0, 1)", solver.tol)));
        }
        if !(solver.damping > 0.0 && solver.damping <= 1.0) {
            return Err(bad(format!("solver.damping {} must lie in (0, 1]", solver.damping)));
        }
        if solver.max_iter == 0 || !(solver.fd_step > 0.0) {
            return Err(bad("solver.max_iter and solver.fd_step must be positive"));
        }
        let check_tol = o.tolerance.or(s.residual_tolerance).unwrap_or(DEFAULT_CHECK_TOL);
        if !(check_tol > 0.0) {
            return Err(bad("residual tolerance must be positive"));
        }
        let gh = p.gh_case.map(GhCase::from_int).transpose()?;

        if let Some(name) = &p.builtin {
            for (key, set) in [
                ("problem.lower", p.lower.is_some()),
                ("problem.upper", p.upper.is_some()),
                ("problem.a", p.a.is_some()),
                ("problem.b", p.b.is_some()),
                ("problem.inner", p.inner.is_some()),
                ("boundary", self.uses_boundary()),
            ] {
                if set {
                    return Err(bad(format!("{key} cannot be combined with builtin = \"{name}\"")));
                }
            }
            let cf = closed_form(name);
            if name == "example3" {
                let Some(c) = &self.curve else {
                    return Err(bad("builtin example3 needs a [curve] section with a bracket"));
                };
                if c.lower.is_some() || c.upper.is_some() {
                    return Err(bad("builtin example3 fixes the curve; give only curve.bracket"));
                }
                if alpha != beta {
                    return Err(bad("example3 uses a single order; beta must equal alpha"));
                }
                let mut prob = example3(alpha, nodes, rgrid, (c.bracket[0], c.bracket[1]))?;
                if let Some(n) = &p.name {
                    prob = prob.with_name(n.clone());
                }
                return Ok(Resolved {
                    problem: Problem::Free(prob),
                    solver,
                    check_tol,
                    closed_form: cf,
                });
            }
            if !BUILTIN_NAMES.contains(&name.as_str()) {
                return Err(bad(format!(
                    "unknown builtin \"{name}\" (expected one of {})",
                    BUILTIN_NAMES.join(", ")
                )));
            }
            if self.curve.is_some() {
                return Err(bad(format!("builtin \"{name}\" is a fixed-endpoint problem; remove [curve]")));
            }
            let mut spec = builtin(name, alpha, nodes, rgrid)?
                .with_orders(alpha, beta)?
                .with_residual_tolerance(check_tol)?;
            if let Some(g) = gh {
                spec = rebuild(&spec, |b| b.gh_case(g))?;
            }
            if let Some(n) = &p.name {
                let n = n.clone();
                spec = rebuild(&spec, move |b| b.name(n))?;
            }
            return Ok(Resolved {
                problem: Problem::Fixed(spec),
                solver,
                check_tol,
                closed_form: cf,
            });
        }

        let (Some(lower), Some(upper)) = (&p.lower, &p.upper) else {
            return Err(bad("missing integrand: set problem.builtin or both problem.lower and problem.upper"));
        };
        let lag: Arc<dyn Lagrangian> = Arc::new(ExprLagrangian::parse(lower, upper)?);
        let name = p.name.clone().unwrap_or_else(|| "expression".into());
        let a = p.a.ok_or_else(|| bad("missing key `a` in [problem]"))?;

        if let Some(c) = &self.curve {
            let (Some(cl), Some(cu)) = (&c.lower, &c.upper) else {
                return Err(bad("[curve] needs both lower and upper expressions"));
            };
            for (key, set) in [
                ("problem.b", p.b.is_some()),
                ("problem.inner", p.inner.is_some()),
                ("boundary.right", self.boundary.right.is_some() || self.boundary.right_value.is_some()),
            ] {
                if set {
                    return Err(bad(format!("{key} has no meaning for a free-endpoint problem on a curve")));
                }
            }
            if alpha != beta {
                return Err(bad("free-endpoint problems use a single order; beta must equal alpha"));
            }
            let Boundary::Fixed(ya) = end(self.boundary.left, &self.boundary.left_value, "left", &rgrid)? else {
                return Err(bad("free-endpoint problems need boundary.left_value"));
            };
            let curve = Arc::new(ExprCurve::parse(cl, cu)?);
            let prob = FreeEndpointProblem::new(lag, curve, a, ya, (c.bracket[0], c.bracket[1]))?
                .with_rgrid(rgrid)?
                .with_name(name)
                .with_alpha(alpha)
                .with_nodes(nodes);
            return Ok(Resolved {
                problem: Problem::Free(prob),
                solver,
                check_tol,
                closed_form: None,
            });
        }

        let b = p.b.ok_or_else(|| bad("missing key `b` in [problem]"))?;
        let mut builder = ProblemSpec::builder(lag)
            .name(name)
            .xgrid(XGrid::new(a, b, nodes)?)
            .rgrid(rgrid.clone())
            .alpha(alpha)
            .beta(beta)
            .left(end(self.boundary.left, &self.boundary.left_value, "left", &rgrid)?)
            .right(end(self.boundary.right, &self.boundary.right_value, "right", &rgrid)?)
            .residual_tolerance(check_tol);
        if let Some(g) = gh {
            builder = builder.gh_case(g);
        }
        if let Some([ia, ib]) = p.inner {
            builder = builder.inner(ia, ib);
        }
        Ok(Resolved {
            problem: Problem::Fixed(builder.build()?),
            solver,
            check_tol,
            closed_form: None,
        })
    }
}

/// Rebuild a spec with one builder setting changed.
fn rebuild(
    s: &ProblemSpec,
    f: impl FnOnce(fuzzyfrac::variational::ProblemBuilder) -> fuzzyfrac::variational::ProblemBuilder,
) -> Result<ProblemSpec, CliError> {
    let mut b = ProblemSpec::builder(s.lagrangian_arc())
        .name(s.name())
        .xgrid(s.xgrid().clone())
        .rgrid(s.rgrid().clone())
        .alpha(s.alpha())
        .beta(s.beta())
        .gh_case(s.gh_case())
        .left(s.left().clone())
        .right(s.right().clone())
        .residual_tolerance(s.residual_tolerance());
    if let Some(i) = s.inner() {
        b = b.inner(i.a, i.b);
    }
    Ok(f(b).build()?)
}
