//! Subcommand implementations. Each returns the process exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fuzzyfrac::fuzzy_core::{parse_level_csv, validate_stacking, DEFAULT_TOL};
use fuzzyfrac::solver::{alpha_sweep, problem_meta, solve_ffvp, sweep_summary_csv, SolveResult};
use fuzzyfrac::transversality::{
    el_residuals_free, solve_free_endpoint, transversality_residual, FreeEndpointProblem, FreeEndpointSolution,
};
use fuzzyfrac::variational::{
    el_residuals, natural_bc_residuals, subinterval_residuals, EquationResidual, FuzzyTrajectory, Order, ProblemSpec,
    ResidualReport,
};
use fuzzyfrac::Error;

use crate::config::{self, Overrides, Problem, Resolved};
use crate::{Cli, CliError, Command, EXIT_OK, EXIT_PARTIAL};

pub fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Solve => solve(cli),
        Command::Check { trajectory } => check(cli, trajectory),
        Command::Transversality => transversality(cli),
        Command::Sweep { alphas } => sweep(cli, alphas),
        Command::ValidateFuzzy { csv } => validate_fuzzy(cli, csv),
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        nodes: cli.nodes,
        rlevels: cli.rlevels,
        alpha: cli.alpha,
        tolerance: cli.tolerance,
    }
}

fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required for this command".into()))?;
    config::load(path)?.resolve(&overrides(cli))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let io = |p: &Path| {
        let p = p.display().to_string();
        move |source| CliError::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(io(&path))
}

fn meta_text(meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}

fn fixed_spec(r: &Resolved, cmd: &str) -> Result<ProblemSpec, CliError> {
    match &r.problem {
        Problem::Fixed(p) => Ok(p.clone()),
        Problem::Free(p) => Err(CliError::Usage(format!(
            "'{}' is a free-endpoint problem; use the transversality command instead of {cmd}",
            p.name()
        ))),
    }
}

fn exit_for(converged: &[bool]) -> i32 {
    if converged.iter().all(|c| *c) {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

/// solution.csv, residuals.csv and meta.txt of a fixed-endpoint solve.
fn write_solve(dir: &Path, spec: &ProblemSpec, res: &SolveResult, check_tol: f64) -> Result<(), CliError> {
    write(dir, "solution.csv", &res.to_csv(spec))?;
    let mut rep = res.el.clone();
    rep.extend(res.bc.clone());
    write(dir, "residuals.csv", &rep.with_tolerance(check_tol).to_csv())?;
    let mut meta = res.meta(spec);
    let pm = problem_meta(spec);
    meta.push(("a".into(), pm["a"].clone()));
    meta.push(("b".into(), pm["b"].clone()));
    meta.push(("tolerance".into(), format!("{check_tol:e}")));
    for (k, &r) in spec.rgrid().values().iter().enumerate() {
        meta.push((
            format!("level.{k}"),
            format!(
                "r={r} converged={} iterations={} residual={:e}",
                res.converged[k], res.iterations[k], res.residuals[k]
            ),
        ));
    }
    for w in res.warnings() {
        meta.push(("warning".into(), w));
    }
    write(dir, "meta.txt", &meta_text(&meta))
}

fn report_solve(spec: &ProblemSpec, res: &SolveResult, reference: Option<fn(f64, f64) -> (f64, f64)>) {
    let ok = res.converged.iter().filter(|c| **c).count();
    println!(
        "{} (alpha = {}): {ok}/{} levels converged, {} Newton iterations, max residual {:e}",
        spec.name(),
        res.alpha,
        res.converged.len(),
        res.total_iterations(),
        res.max_residual()
    );
    if let Some(f) = reference {
        let exact = FuzzyTrajectory::from_fn(spec.xgrid(), spec.rgrid(), f);
        if let Ok(d) = res.trajectory.sup_distance(&exact) {
            println!("sup distance to the classical closed form: {d:e}");
        }
    }
    for w in res.warnings() {
        eprintln!("warning: {w}");
    }
}

fn solve(cli: &Cli) -> Result<i32, CliError> {
    let r = resolve(cli)?;
    let spec = fixed_spec(&r, "solve")?;
    let res = solve_ffvp(&spec, &r.solver)?;
    let dir = out_dir(cli);
    write_solve(&dir, &spec, &res, r.check_tol)?;
    report_solve(&spec, &res, r.closed_form);
    Ok(exit_for(&res.converged))
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()))
}

fn check_rgrid(y: &FuzzyTrajectory, expected: &[f64]) -> Result<(), CliError> {
    if !same_grid(y.rgrid().values(), expected) {
        return Err(Error::InvalidRGrid(format!(
            "trajectory has {} r-levels {:?}, the config expects {} levels",
            y.rgrid().len(),
            y.rgrid().values(),
            expected.len()
        ))
        .into());
    }
    Ok(())
}

fn scalar_entry(id: &str, r: f64, node: usize, v: f64, tol: f64) -> EquationResidual {
    EquationResidual {
        id: id.into(),
        r,
        max_abs: v.abs(),
        l2: v.abs(),
        pass: v.abs() <= tol,
        first_node: node,
        values: vec![v],
    }
}

/// E-L, transversality and curve rows of a trajectory ending at its last node.
fn free_report(prob: &FreeEndpointProblem, y: &FuzzyTrajectory, tol: f64) -> Result<ResidualReport, CliError> {
    let b = y.xgrid().b();
    let n = y.xgrid().len();
    let mut rep = el_residuals_free(prob, y, b)?.with_tolerance(tol);
    for (k, &r) in y.rgrid().values().iter().enumerate() {
        let (tl, tu) = transversality_residual(prob, y, b, r)?;
        rep.entries.push(scalar_entry("transversality_lower", r, n - 1, tl, tol));
        rep.entries.push(scalar_entry("transversality_upper", r, n - 1, tu, tol));
        if k + 1 == y.rgrid().len() {
            let c = prob.curve();
            rep.entries
                .push(scalar_entry("curve_lower", r, n - 1, y.lower(k)[n - 1] - c.lower(r, b), tol));
            rep.entries
                .push(scalar_entry("curve_upper", r, n - 1, y.upper(k)[n - 1] - c.upper(r, b), tol));
        }
    }
    Ok(rep)
}

fn check(cli: &Cli, path: &Path) -> Result<i32, CliError> {
    let r = resolve(cli)?;
    let y = FuzzyTrajectory::from_csv(&read(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let rep = match &r.problem {
        Problem::Fixed(spec) => {
            let g = spec.xgrid();
            if !same_grid(&y.xgrid().nodes(), &g.nodes()) {
                return Err(Error::XGridMismatch(format!(
                    "trajectory has {} nodes on [{}, {}], the config expects {} nodes on [{}, {}]",
                    y.xgrid().len(),
                    y.xgrid().a(),
                    y.xgrid().b(),
                    g.len(),
                    g.a(),
                    g.b()
                ))
                .into());
            }
            check_rgrid(&y, spec.rgrid().values())?;
            let spec = spec.with_xgrid(y.xgrid().clone())?.with_rgrid(y.rgrid().clone())?;
            let mut rep = if spec.inner().is_some() {
                subinterval_residuals(&spec, &y)?
            } else {
                el_residuals(&spec, &y)?
            };
            rep.extend(natural_bc_residuals(&spec, &y)?);
            rep.with_tolerance(r.check_tol)
        }
        Problem::Free(prob) => {
            if (y.xgrid().a() - prob.a()).abs() > 1e-9 * (1.0 + prob.a().abs()) || y.xgrid().len() != prob.nodes() {
                return Err(Error::XGridMismatch(format!(
                    "trajectory has {} nodes starting at {}, the config expects {} nodes starting at {}",
                    y.xgrid().len(),
                    y.xgrid().a(),
                    prob.nodes(),
                    prob.a()
                ))
                .into());
            }
            check_rgrid(&y, prob.rgrid().values())?;
            free_report(prob, &y, r.check_tol)?
        }
    };
    println!("{:<22} {:>8} {:>14} {:>14}  pass", "equation", "r", "max_abs", "l2");
    for e in &rep.entries {
        println!("{:<22} {:>8} {:>14.6e} {:>14.6e}  {}", e.id, e.r, e.max_abs, e.l2, e.pass);
    }
    let failed = rep.entries.iter().filter(|e| !e.pass).count();
    println!(
        "{}/{} equations pass (tolerance {:e})",
        rep.entries.len() - failed,
        rep.entries.len(),
        r.check_tol
    );
    if let Some(dir) = &cli.out {
        write(dir, "residuals.csv", &rep.to_csv())?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PARTIAL })
}

fn write_free(dir: &Path, prob: &FreeEndpointProblem, s: &FreeEndpointSolution, tol: f64) -> Result<(), CliError> {
    write(dir, "solution.csv", &s.to_csv(prob))?;
    write(dir, "summary.csv", &s.summary_csv())?;
    write(dir, "residuals.csv", &free_report(prob, &s.trajectory, tol)?.to_csv())?;
    let mut meta = s.meta(prob);
    meta.push(("bracket".into(), format!("{},{}", prob.bracket().0, prob.bracket().1)));
    for (k, &r) in s.trajectory.rgrid().values().iter().enumerate() {
        let (tl, tu) = s.transversality[k];
        meta.push((
            format!("level.{k}"),
            format!(
                "r={r} converged={} iterations={} transversality={tl:e},{tu:e}",
                s.converged[k], s.iterations[k]
            ),
        ));
        if let Some(e) = &s.errors[k] {
            meta.push(("warning".into(), format!("level {k}: {e}")));
        }
    }
    write(dir, "meta.txt", &meta_text(&meta))
}

fn transversality(cli: &Cli) -> Result<i32, CliError> {
    let r = resolve(cli)?;
    let Problem::Free(prob) = &r.problem else {
        return Err(CliError::Usage(
            "transversality needs a free-endpoint problem: add a [curve] section or use builtin example3".into(),
        ));
    };
    let s = solve_free_endpoint(prob, &r.solver)?;
    write_free(&out_dir(cli), prob, &s, r.check_tol)?;
    let ok = s.converged.iter().filter(|c| **c).count();
    println!(
        "{} (alpha = {}): b_star = {} after {} bisection steps, {ok}/{} levels converged",
        prob.name(),
        s.alpha,
        s.b_star,
        s.bisection_steps,
        s.converged.len()
    );
    for (k, e) in s.errors.iter().enumerate() {
        if let Some(e) = e {
            eprintln!("warning: level {k}: {e}");
        }
    }
    Ok(exit_for(&s.converged))
}

fn sweep(cli: &Cli, alphas: &[f64]) -> Result<i32, CliError> {
    if alphas.is_empty() {
        return Err(CliError::Usage(
            "sweep needs at least one order: --alphas 0.7,0.9,0.99".into(),
        ));
    }
    for &a in alphas {
        Order::from_value(a)?;
    }
    let r = resolve(cli)?;
    let spec = fixed_spec(&r, "sweep")?;
    let reference = r.closed_form.map(|f| move |r: f64, x: f64| f(r, x));
    let entries = alpha_sweep(
        &spec,
        alphas,
        reference.as_ref().map(|f| f as &dyn Fn(f64, f64) -> (f64, f64)),
        &r.solver,
    )?;
    let dir = out_dir(cli);
    let mut converged = Vec::new();
    for e in &entries {
        let o = Order::from_value(e.alpha)?;
        let s = spec.with_orders(o, o)?;
        write_solve(&dir.join(format!("alpha_{}", e.alpha)), &s, &e.result, r.check_tol)?;
        report_solve(&s, &e.result, None);
        if let Some(d) = e.distance {
            println!("  sup distance to the classical closed form: {d:e}");
        }
        converged.extend_from_slice(&e.result.converged);
    }
    write(&dir, "sweep_summary.csv", &sweep_summary_csv(&entries))?;
    Ok(exit_for(&converged))
}

fn validate_fuzzy(cli: &Cli, path: &Path) -> Result<i32, CliError> {
    let text = read(path)?;
    let tol = cli.tolerance.unwrap_or(DEFAULT_TOL);
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or("")
        .replace(' ', "");
    let parse_err = |e: Error| CliError::Usage(format!("{}: {e}", path.display()));
    let valid = if header == "r,x,lower,upper" {
        let y = FuzzyTrajectory::from_csv(&text).map_err(parse_err)?;
        let st = y.stacking(tol);
        for (i, rep) in st.nodes.iter().take(10) {
            println!("node {i} (x = {}): {rep}", y.xgrid().node(*i));
        }
        if st.nodes.len() > 10 {
            println!("... {} more nodes", st.nodes.len() - 10);
        }
        println!(
            "{} of {} nodes nested, {} lower/upper crossings",
            y.xgrid().len() - st.nodes.len(),
            y.xgrid().len(),
            st.crossings.len()
        );
        st.is_valid()
    } else {
        let (_, lower, upper) = parse_level_csv(&text).map_err(parse_err)?;
        let rep = validate_stacking(&lower, &upper, tol);
        println!("{rep}");
        rep.is_valid()
    };
    Ok(if valid { EXIT_OK } else { EXIT_PARTIAL })
}
