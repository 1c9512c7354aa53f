use std::sync::Arc;

use curva::builders::{Provenance, SubSuperPair};
use curva::elliptic::{solve_linear_robin, Gauge, RobinProblem};
use curva::monotone::*;
use curva::*;
use proptest::prelude::*;

fn relax_problem(d: f64) -> NonlinearProblem {
    // -dΔu = 1 - u, ∂u = 0
    NonlinearProblem {
        diffusion: d,
        sigma: 0.0,
        f: Arc::new(|_, u| 1.0 - u),
        df: Arc::new(|_, _| -1.0),
        g: Arc::new(|_, _| 0.0),
        dg: Arc::new(|_, _| 0.0),
    }
}

fn annulus() -> (std::sync::Arc<Grid>, MetricData) {
    build_domain(&DomainSpec::annulus(0.5, 1.0, 16, 24)).unwrap()
}

fn manual(lo: f64, hi: f64, n: usize) -> SubSuperPair {
    SubSuperPair::new(vec![lo; n], vec![hi; n], Provenance::Manual, 2).unwrap()
}

#[test]
fn linear_decay_gives_margin_constant() {
    let (g, m) = annulus();
    let p = NonlinearProblem {
        diffusion: 1.0,
        sigma: 0.0,
        f: Arc::new(|_, u| -u),
        df: Arc::new(|_, _| -1.0),
        g: Arc::new(|_, _| 0.0),
        dg: Arc::new(|_, _| 0.0),
    };
    let c = derive_iteration_constants(&p, &m, &vec![0.0; g.len()], &vec![2.0; g.len()]).unwrap();
    assert!((c.a - 1.1).abs() < 1e-12);
    assert_eq!(c.b, 0.0);
}

#[test]
fn yamabe_constant_matches_closed_form_derivative_bound() {
    // F = u - u⁵ for R = S = -1, so -∂F/∂u = 5u⁴ - 1, largest at u = 2
    let (g, m) = build_domain(&DomainSpec::ball(3, 1.0, 16)).unwrap();
    let m = m.with_constant_background(-1.0, 1.0).unwrap();
    let p = NonlinearProblem::yamabe(&m, &vec![-1.0; g.len()], &vec![-1.0; g.boundary.len()]);
    let c = derive_iteration_constants(&p, &m, &vec![0.5; g.len()], &vec![2.0; g.len()]).unwrap();
    let oracle = (0..=10_000)
        .map(|k| 0.5 + 1.5 * k as f64 / 10_000.0)
        .map(|u: f64| -1.0 + 5.0 * u.powi(4))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((oracle - 79.0).abs() < 1e-9);
    assert!((c.a - 1.1 * oracle).abs() < 1e-9, "A = {}", c.a);
    assert!((c.a - 86.9).abs() < 1e-9);
}

#[test]
fn u_independent_source_uses_floor() {
    let (g, m) = annulus();
    let p = NonlinearProblem {
        diffusion: 1.0,
        sigma: 1.0,
        f: Arc::new(|_, _| 3.0),
        df: Arc::new(|_, _| 0.0),
        g: Arc::new(|_, _| 0.0),
        dg: Arc::new(|_, _| 0.0),
    };
    let c = derive_iteration_constants(&p, &m, &vec![0.0; g.len()], &vec![1.0; g.len()]).unwrap();
    assert_eq!(c.a, A_FLOOR);
    assert!((c.b - 1.1).abs() < 1e-12);
}

#[test]
fn unordered_bracket_rejected() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    let r = derive_iteration_constants(&p, &m, &vec![1.0; g.len()], &vec![0.0; g.len()]);
    assert!(matches!(r, Err(Error::BracketViolation(_))));
}

#[test]
fn exact_solution_is_fixed_point() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    let c = derive_iteration_constants(&p, &m, &vec![0.0; g.len()], &vec![2.0; g.len()]).unwrap();
    let u = iterate_once(&p, &m, c, &vec![1.0; g.len()]).unwrap();
    assert!(u.iter().all(|x| (x - 1.0).abs() < 1e-12));
}

#[test]
fn one_step_lands_strictly_inside_comparison_bounds() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    let c = derive_iteration_constants(&p, &m, &vec![0.0; g.len()], &vec![2.0; g.len()]).unwrap();
    let u = iterate_once(&p, &m, c, &vec![2.0; g.len()]).unwrap();
    // constant iterate: u₁ = ((A - 1)·2 + 1)/A
    let oracle = ((c.a - 1.0) * 2.0 + 1.0) / c.a;
    for x in &u {
        assert!(*x > 1.0 && *x < 2.0);
        assert!((x - oracle).abs() < 1e-12);
    }
}

#[test]
fn linear_source_is_solved_in_one_step() {
    let (g, m) = annulus();
    let p = NonlinearProblem {
        diffusion: 1.0,
        sigma: 1.0,
        f: Arc::new(|i, _| 2.0 + 0.1 * i as f64 / 100.0),
        df: Arc::new(|_, _| 0.0),
        g: Arc::new(|_, _| 0.5),
        dg: Arc::new(|_, _| 0.0),
    };
    let consts = IterationConstants { a: 0.0, b: 1.0, c: 0.0, d1: 0.0, d2: 0.0 };
    let u = iterate_once(&p, &m, consts, &vec![7.0; g.len()]).unwrap();
    let exact = solve_linear_robin(
        &RobinProblem {
            a: 1.0,
            v: vec![0.0; g.len()],
            b: vec![1.0; g.boundary.len()],
            f: (0..g.len()).map(|i| 2.0 + 0.1 * i as f64 / 100.0).collect(),
            r: vec![0.5; g.boundary.len()],
        },
        &m,
        Gauge::Unique,
    )
    .unwrap();
    for i in 0..g.len() {
        assert!((u[i] - exact[i]).abs() < 1e-10);
    }
}

#[test]
fn relaxation_converges_to_one() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    let t = run_scheme(&p, &m, &manual(0.0, 2.0, g.len()), 1e-8, 30).unwrap();
    assert!(t.converged && t.steps.len() <= 30);
    assert!(t.solution.iter().all(|x| (x - 1.0).abs() < 1e-7));
    assert!(t.steps.iter().all(|s| s.mono_violation <= 0.0));
}

#[test]
fn exact_super_solution_stops_after_one_step() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    let t = run_scheme(&p, &m, &manual(0.0, 1.0, g.len()), 1e-8, 30).unwrap();
    assert_eq!(t.steps.len(), 1);
    assert!(t.steps[0].increment < 1e-12);
}

#[test]
fn invalid_budget_rejected() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    assert!(matches!(run_scheme(&p, &m, &manual(0.0, 2.0, g.len()), 0.0, 30), Err(Error::InvalidArgument(_))));
    assert!(matches!(run_scheme(&p, &m, &manual(0.0, 2.0, g.len()), 1e-8, 0), Err(Error::InvalidArgument(_))));
}

#[test]
fn iteration_budget_exhaustion_is_reported() {
    let (g, m) = annulus();
    let p = relax_problem(1.0);
    let r = run_scheme(&p, &m, &manual(0.0, 2.0, g.len()), 1e-14, 2);
    assert!(matches!(r, Err(Error::MaxIterExceeded { iters: 2, .. })));
}

fn cubic_problem(c: Vec<f64>, gb: Vec<f64>) -> NonlinearProblem {
    // -Δu = c - u³, ∂u = g - u
    let c = Arc::new(c);
    let gb = Arc::new(gb);
    NonlinearProblem {
        diffusion: 1.0,
        sigma: 0.0,
        f: Arc::new(move |i, u| c[i] - u * u * u),
        df: Arc::new(|_, u| -3.0 * u * u),
        g: Arc::new(move |b, u| gb[b] - u),
        dg: Arc::new(|_, _| -1.0),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scheme_is_monotone_bracketed_and_independent_of_a(
        cc in prop::collection::vec(0.5..2.0f64, 4),
        gc in prop::collection::vec(0.0..1.0f64, 2),
    ) {
        let (g, m) = annulus();
        let c = g.eval(|x, y, _, _| cc[0] + 0.5 * (cc[1] - 1.0) * x + 0.5 * (cc[2] - 1.0) * y * y + 0.1 * cc[3]);
        let gb = g.eval_boundary(|x, _, _, _| gc[0] + 0.5 * gc[1] * x.abs());
        let p = cubic_problem(c, gb);
        let pair = manual(0.0, 2.0, g.len());
        let tol = 1e-9;
        let t = run_scheme(&p, &m, &pair, tol, 500).unwrap();
        prop_assert!(t.converged);
        for s in &t.steps {
            prop_assert!(s.mono_violation <= 10.0 * 1e-10 * 2.0);
            prop_assert!(s.min_u >= -10.0 * tol && s.max_u <= 2.0 + 10.0 * tol);
        }
        prop_assert!(t.final_res_interior <= 100.0 * tol && t.final_res_boundary <= 100.0 * tol);
        let mut doubled = t.constants;
        doubled.a *= 2.0;
        doubled.b *= 2.0;
        let t2 = run_scheme_with(&p, &m, &pair, doubled, tol * 1e-2, 2000).unwrap();
        let diff = (0..g.len()).map(|i| (t.solution[i] - t2.solution[i]).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 5.0 * tol, "diff {diff:e}");
    }
}
