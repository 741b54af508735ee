use std::sync::Arc;

use fuzzyfrac::frac_ops::*;
use fuzzyfrac::fuzzy_core::*;
use fuzzyfrac::problems::*;
use fuzzyfrac::variational::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frac(a: f64) -> Order {
    Order::from_value(a).unwrap()
}

/// `(cD y)^2 / 2` on both bounds.
struct CaputoEnergy;

impl Lagrangian for CaputoEnergy {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        match bound {
            Bound::Lower => 0.5 * p[Arg::Dcl].powi(2),
            Bound::Upper => 0.5 * p[Arg::Dcu].powi(2),
        }
    }
}

/// A general quadratic form in all fifteen arguments, with separate coefficients per bound.
#[derive(Clone)]
struct Quadratic {
    q: [[[f64; NARGS]; NARGS]; 2],
    c: [[f64; NARGS]; 2],
}

impl Quadratic {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut q = [[[0.0; NARGS]; NARGS]; 2];
        let mut c = [[0.0; NARGS]; 2];
        for b in 0..2 {
            for i in 1..NARGS {
                c[b][i] = rng.random_range(-1.0..1.0);
                for j in i..NARGS {
                    let v = rng.random_range(-0.5..0.5);
                    q[b][i][j] = v;
                    q[b][j][i] = v;
                }
            }
        }
        Self { q, c }
    }
}

impl Lagrangian for Quadratic {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        let b = bound as usize;
        let mut s = 0.0;
        for i in 1..NARGS {
            let xi = p[Arg::ALL[i]];
            s += self.c[b][i] * xi;
            for j in 1..NARGS {
                s += 0.5 * self.q[b][i][j] * xi * p[Arg::ALL[j]];
            }
        }
        s
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        let b = bound as usize;
        let i = arg.slot();
        if i == 0 {
            return Some(0.0);
        }
        Some(self.c[b][i] + (1..NARGS).map(|j| self.q[b][i][j] * p[Arg::ALL[j]]).sum::<f64>())
    }
}

/// Same integrand without analytic partials.
struct NoPartials<L>(L);

impl<L: Lagrangian> Lagrangian for NoPartials<L> {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        self.0.value(bound, p)
    }
}

struct Sum(Arc<dyn Lagrangian>, Arc<dyn Lagrangian>);

impl Lagrangian for Sum {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        self.0.value(bound, p) + self.1.value(bound, p)
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        Some(partial(self.0.as_ref(), bound, arg, p) + partial(self.1.as_ref(), bound, arg, p))
    }
}

struct Scaled(f64, Arc<dyn Lagrangian>);

impl Lagrangian for Scaled {
    fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
        self.0 * self.1.value(bound, p)
    }

    fn partial(&self, bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
        Some(self.0 * partial(self.1.as_ref(), bound, arg, p))
    }
}

struct Constant(f64);

impl Lagrangian for Constant {
    fn value(&self, _bound: Bound, _p: &LagrangianPoint) -> f64 {
        self.0
    }
}

/// Depends on x and the boundary block only through x.
struct XOnly;

impl Lagrangian for XOnly {
    fn value(&self, _bound: Bound, p: &LagrangianPoint) -> f64 {
        p[Arg::X] * p[Arg::X] + 1.0
    }
}

fn spec(l: Arc<dyn Lagrangian>, alpha: Order, n: usize) -> ProblemSpec {
    ProblemSpec::builder(l)
        .xgrid(XGrid::new(0.0, 1.0, n).unwrap())
        .rgrid(RGrid::uniform(5).unwrap())
        .orders(alpha)
        .build()
        .unwrap()
}

fn ex2_traj(p: &ProblemSpec) -> FuzzyTrajectory {
    FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), example2_closed_form)
}

#[test]
fn example2_closed_form_near_alpha_one() {
    let p = example2(frac(0.999), 501, RGrid::uniform(3).unwrap()).unwrap();
    let y = ex2_traj(&p);
    let rep = el_residuals(&p, &y).unwrap();
    let g = p.xgrid();
    let n = g.len();
    // independent evaluation: for Example 2 the lower and upper E-L fields reduce to D_right(cD_left y)
    for (k, _) in p.rgrid().values().iter().enumerate() {
        for (id, vals) in [("el1", y.lower(k)), ("el4", y.upper(k))] {
            let f = GridFunction::new(g.clone(), vals.to_vec()).unwrap();
            let a = FractionalOrder::new(0.999).unwrap();
            let e = rl_right_deriv(&caputo_left(&f, a), a);
            let r = p.rgrid().values()[k];
            let entry = rep.get(id, r).unwrap();
            assert_eq!(entry.first_node, 2);
            assert_eq!(entry.values.len(), n - 4);
            for (i, v) in entry.values.iter().enumerate() {
                assert!((v - e.values()[i + 2]).abs() < 1e-10 * (1.0 + v.abs()), "{id} r={r} node {}", i + 2);
            }
            let inner = (0..n)
                .filter(|&i| (0.05..=0.95).contains(&g.node(i)))
                .map(|i| e.values()[i].abs())
                .fold(0.0, f64::max);
            assert!(inner < 0.05, "{id} r={r}: {inner}");
        }
    }
    assert!(rep.max_abs_of("el2") == 0.0 && rep.max_abs_of("el3") == 0.0);
    let coarse = el_residuals(&p.with_orders(frac(0.99), frac(0.99)).unwrap(), &y).unwrap();
    assert!(rep.max_abs() < coarse.max_abs());
}

#[test]
fn constant_trajectory_has_zero_residuals() {
    for alpha in [frac(0.4), Order::Classical] {
        let p = spec(Arc::new(CaputoEnergy), alpha, 41);
        let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |r, _| (r - 1.0, 1.0 - r));
        assert_eq!(el_residuals(&p, &y).unwrap().max_abs(), 0.0);
        assert_eq!(natural_bc_residuals(&p, &y).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn perturbation_increases_residual() {
    let p = example2(frac(0.9), 201, RGrid::uniform(3).unwrap()).unwrap();
    let y = ex2_traj(&p);
    let base = el_residuals(&p, &y).unwrap().max_abs();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bumps: Vec<f64> = (0..p.xgrid().len()).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut z = y.clone();
    for k in 0..p.rgrid().len() {
        let l: Vec<f64> = y.lower(k).iter().zip(&bumps).map(|(a, b)| a + b).collect();
        let u: Vec<f64> = y.upper(k).iter().zip(&bumps).map(|(a, b)| a + b).collect();
        z.set_level(k, l, u);
    }
    assert!(el_residuals(&p, &z).unwrap().max_abs() > base);
}

#[test]
fn example2_classical_boundary_conditions() {
    let p = example2(Order::Classical, 201, RGrid::uniform(5).unwrap()).unwrap();
    let y = ex2_traj(&p);
    let bc = natural_bc_residuals(&p, &y).unwrap();
    assert_eq!(bc.entries.len(), 8 * 5);
    assert!(bc.max_abs() < 1e-8, "{}", bc.max_abs());
    assert!(el_residuals(&p, &y).unwrap().max_abs() < 1e-8);
    // r = 0: y(0) = 3/15 and y'(0) = 9/15 satisfy (3 - r) y(0) = y'(0)
    let (y0, _) = example2_closed_form(0.0, 0.0);
    let slope = example2_closed_form(0.0, 1.0).0 - y0;
    assert!((3.0 * y0 - slope).abs() < 1e-15);
    assert!(bc.get("bc_a1", 0.0).unwrap().max_abs < 1e-10);
}

#[test]
fn boundary_independent_integrand_gives_zero_bc() {
    for alpha in [frac(0.6), Order::Classical] {
        let p = spec(Arc::new(XOnly), alpha, 31);
        let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |r, x| (r * x, 2.0 - r + x * x));
        assert_eq!(natural_bc_residuals(&p, &y).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn fixed_endpoints_give_empty_bc_report() {
    let p = quadratic_crisp(frac(0.7), 21, RGrid::uniform(3).unwrap()).unwrap();
    let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |_, x| (x, x));
    assert!(natural_bc_residuals(&p, &y).unwrap().entries.is_empty());
}

fn inner_spec(l: Arc<dyn Lagrangian>, alpha: f64, n: usize, ab: (f64, f64)) -> ProblemSpec {
    ProblemSpec::builder(l)
        .xgrid(XGrid::new(0.0, 1.0, n).unwrap())
        .rgrid(RGrid::uniform(3).unwrap())
        .orders(frac(alpha))
        .inner(ab.0, ab.1)
        .build()
        .unwrap()
}

fn assert_reduces_to_el(l: Arc<dyn Lagrangian>, alpha: f64, f: impl Fn(f64, f64) -> (f64, f64)) {
    let full = inner_spec(l.clone(), alpha, 81, (0.0, 1.0));
    let plain = spec(l, frac(alpha), 81).with_rgrid(RGrid::uniform(3).unwrap()).unwrap();
    let y = FuzzyTrajectory::from_fn(full.xgrid(), full.rgrid(), f);
    let sub = subinterval_residuals(&full, &y).unwrap();
    let el = el_residuals(&plain, &y).unwrap();
    for e in &el.entries {
        let s = sub.get(&format!("AB:{}", e.id), e.r).unwrap();
        assert_eq!((s.first_node, s.values.len()), (e.first_node, e.values.len()));
        for (u, v) in s.values.iter().zip(&e.values) {
            assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()), "{} r={}: {u} vs {v}", e.id, e.r);
        }
    }
}

#[test]
fn subinterval_with_full_interval_matches_el() {
    assert_reduces_to_el(Arc::new(Example2), 0.8, |r, x| (r * x - 1.0 + x * x, 2.0 - r + x.sin()));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    assert_reduces_to_el(Arc::new(Quadratic::random(&mut rng)), 0.6, |r, x| (r + x.exp(), 3.0 - r + x * x));
}

#[test]
fn subinterval_trivial_cases() {
    let p = inner_spec(Arc::new(XOnly), 0.5, 41, (0.25, 0.75));
    let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |r, x| (r * x, 3.0 - x));
    assert_eq!(subinterval_residuals(&p, &y).unwrap().max_abs(), 0.0);
    let p = inner_spec(Arc::new(CaputoEnergy), 0.5, 41, (0.25, 0.75));
    let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |_, _| (0.5, 0.5));
    let rep = subinterval_residuals(&p, &y).unwrap();
    assert!(!rep.entries.is_empty());
    assert_eq!(rep.max_abs(), 0.0);
    for region in ["aA:", "AB:", "Bb:", "bc_a", "bc_A", "bc_B", "bc_b"] {
        assert!(rep.entries.iter().any(|e| e.id.starts_with(region)), "{region}");
    }
}

#[test]
fn inner_interval_off_grid_is_rejected() {
    let err = ProblemSpec::builder(Arc::new(CaputoEnergy))
        .xgrid(XGrid::new(0.0, 1.0, 11).unwrap())
        .orders(frac(0.5))
        .inner(0.25, 0.75)
        .build()
        .unwrap_err();
    assert!(matches!(err, fuzzyfrac::Error::GridAlignment(_)));
}

#[test]
fn functional_values() {
    let p = spec(Arc::new(Constant(1.0)), frac(0.5), 21);
    let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |r, x| (r * x, 2.0 - r));
    let j = functional_value(&p, &y).unwrap();
    assert!(j.lower.iter().chain(&j.upper).all(|v| (v - 1.0).abs() < 1e-14));

    let p = example2(Order::Classical, 201, RGrid::uniform(5).unwrap()).unwrap();
    let y = ex2_traj(&p);
    let j = functional_value(&p, &y).unwrap();
    // per-level values are not nested here, and the report says so
    assert!(!j.is_fuzzy_number());
    assert!(j.stacking.violations.iter().any(|v| v.condition == StackingCondition::LowerMonotone));
    let top = p.rgrid().len() - 1;
    assert!((j.lower[top] - j.upper[top]).abs() < 1e-14);
    assert!((j.lower[top] - 3.0 / 11.0).abs() < 1e-12, "{}", j.lower[top]);

    let doubled = p.with_rgrid(p.rgrid().clone()).unwrap();
    let twice = ProblemSpec::builder(Arc::new(Scaled(2.0, doubled.lagrangian_arc())))
        .xgrid(p.xgrid().clone())
        .rgrid(p.rgrid().clone())
        .orders(Order::Classical)
        .build()
        .unwrap();
    let j2 = functional_value(&twice, &y).unwrap();
    for k in 0..=top {
        assert!((j2.lower[k] - 2.0 * j.lower[k]).abs() < 1e-13);
        assert!((j2.upper[k] - 2.0 * j.upper[k]).abs() < 1e-13);
    }
}

#[test]
fn closed_form_is_minimal_among_perturbations() {
    let p = example2(Order::Classical, 201, RGrid::default()).unwrap();
    let y = ex2_traj(&p);
    let best = functional_value(&p, &y).unwrap().to_fuzzy();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let (c0, c1, w) = (
            rng.random_range(-0.2..0.2),
            rng.random_range(-0.2..0.2),
            rng.random_range(1.0..6.0),
        );
        let z = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |r, x| {
            let (l, u) = example2_closed_form(r, x);
            let d = c0 + c1 * (w * x).sin();
            (l + d, u + d)
        });
        let other = functional_value(&p, &z).unwrap().to_fuzzy();
        let ord = compare(&best, &other).unwrap();
        assert!(
            matches!(ord, FuzzyOrdering::Less | FuzzyOrdering::LessEq | FuzzyOrdering::Equivalent),
            "{ord}"
        );
    }
}

#[test]
fn classical_refinement_reduces_residual() {
    // Example 3's closed form is not polynomial, so the discrete E-L residual is nonzero and shrinks with h.
    let mut last = f64::INFINITY;
    for nodes in [51, 101, 201, 401] {
        let prob = example3(Order::Classical, nodes, RGrid::uniform(3).unwrap(), (1.1, 2.0)).unwrap();
        let p = prob.spec_on(EXAMPLE3_B_STAR).unwrap();
        let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), example3_closed_form);
        let e = el_residuals(&p, &y).unwrap().max_abs();
        assert!(e < last && e > 0.0, "{nodes}: {e} vs {last}");
        last = e;
    }
}

#[test]
fn non_finite_integrand_reports_node() {
    struct Blowup;
    impl Lagrangian for Blowup {
        fn value(&self, bound: Bound, p: &LagrangianPoint) -> f64 {
            let y = if bound == Bound::Lower { p[Arg::Yl] } else { p[Arg::Yu] };
            y * y / (p[Arg::X] - 0.5).abs().max(0.0)
        }
    }
    let p = ProblemSpec::builder(Arc::new(Blowup))
        .xgrid(XGrid::new(0.0, 1.0, 11).unwrap())
        .rgrid(RGrid::uniform(2).unwrap())
        .orders(frac(0.5))
        .build()
        .unwrap();
    let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |_, _| (1.0, 1.0));
    match functional_value(&p, &y) {
        Err(fuzzyfrac::Error::NonFinite { node, .. }) => assert_eq!(node, 5),
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn mismatched_trajectory_is_rejected() {
    let p = spec(Arc::new(CaputoEnergy), frac(0.5), 21);
    let g = XGrid::new(0.0, 1.0, 11).unwrap();
    let y = FuzzyTrajectory::from_fn(&g, p.rgrid(), |_, _| (0.0, 0.0));
    assert!(el_residuals(&p, &y).is_err());
}

#[test]
fn residual_csv_layout() {
    let p = example2(Order::Classical, 21, RGrid::uniform(2).unwrap()).unwrap();
    let y = ex2_traj(&p);
    let csv = el_residuals(&p, &y).unwrap().to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("equation_id,r,max_abs,l2,pass"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn trajectory_csv_round_trip() {
    let p = example2(Order::Classical, 11, RGrid::uniform(3).unwrap()).unwrap();
    let y = ex2_traj(&p);
    let csv = y.to_csv(&[("alpha".into(), "1".into())]);
    assert!(csv.starts_with("# alpha=1\nr,x,lower,upper\n"));
    assert_eq!(FuzzyTrajectory::from_csv(&csv).unwrap(), y);
}

fn point_strategy() -> impl Strategy<Value = LagrangianPoint> {
    (0.0..1.0f64, prop::collection::vec(-2.0..2.0f64, NARGS)).prop_map(|(r, v)| {
        let mut p = LagrangianPoint::new(r);
        for (arg, x) in Arg::ALL.iter().zip(v) {
            p[*arg] = x;
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fd_partials_match_analytic_on_quadratics(seed in 0u64..1000, p in point_strategy()) {
        let q = Quadratic::random(&mut ChaCha8Rng::seed_from_u64(seed));
        for bound in [Bound::Lower, Bound::Upper] {
            for arg in Arg::ALL {
                let an = q.partial(bound, arg, &p).unwrap();
                let num = fd_partial(&q, bound, arg, &p);
                prop_assert!((an - num).abs() <= 1e-7 * an.abs().max(1.0), "{arg}: {an} vs {num}");
            }
        }
    }

    #[test]
    fn el_residuals_are_linear_in_l(seed in 0u64..1000, alpha in 0.2..0.95f64, c in -2.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1: Arc<dyn Lagrangian> = Arc::new(Quadratic::random(&mut rng));
        let l2: Arc<dyn Lagrangian> = Arc::new(Scaled(c, Arc::new(Example2)));
        let report = |l: Arc<dyn Lagrangian>| {
            let p = spec(l, frac(alpha), 33);
            let t = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |r, x| (r * x + x * x, 2.0 - r + x));
            el_residuals(&p, &t).unwrap()
        };
        let both = report(Arc::new(Sum(l1.clone(), l2.clone())));
        let (a, b) = (report(l1), report(l2));
        for ((s, x), y) in both.entries.iter().zip(&a.entries).zip(&b.entries) {
            prop_assert_eq!(&s.id, &x.id);
            for ((u, v), w) in s.values.iter().zip(&x.values).zip(&y.values) {
                prop_assert!((u - v - w).abs() < 1e-10 * (1.0 + u.abs()), "{}: {} vs {}", s.id, u, v + w);
            }
        }
    }

    #[test]
    fn crisp_problems_have_equal_lower_and_upper_residuals(alpha in 0.2..0.95f64, w in 0.5..3.0f64) {
        let p = spec(Arc::new(QuadraticCrisp), frac(alpha), 41);
        let y = FuzzyTrajectory::from_fn(p.xgrid(), p.rgrid(), |_, x| ((w * x).sin(), (w * x).sin()));
        let rep = el_residuals(&p, &y).unwrap();
        for &r in p.rgrid().values() {
            let l = rep.get("el1", r).unwrap();
            let u = rep.get("el4", r).unwrap();
            prop_assert!((l.max_abs - u.max_abs).abs() < 1e-12);
            prop_assert!((l.l2 - u.l2).abs() < 1e-12);
        }
    }
}

#[test]
fn check_partials_catches_wrong_derivatives() {
    struct Wrong;
    impl Lagrangian for Wrong {
        fn value(&self, _bound: Bound, p: &LagrangianPoint) -> f64 {
            p[Arg::Yl] * p[Arg::Yl]
        }
        fn partial(&self, _bound: Bound, arg: Arg, p: &LagrangianPoint) -> Option<f64> {
            Some(if arg == Arg::Yl { p[Arg::Yl] } else { 0.0 })
        }
    }
    assert!(matches!(check_partials(&Wrong, 0.0, 1.0), Err(fuzzyfrac::Error::PartialMismatch { .. })));
    assert!(check_partials(&Example2, 0.0, 1.0).is_ok());
    assert!(check_partials(&NoPartials(Example2), 0.0, 1.0).is_ok());
}
