use criterion::{black_box, criterion_group, criterion_main, Criterion};

use curva::elliptic::{assemble, principal_eigenpair, Solver};
use curva::scenario::{CaseTag, NormalForm, Scenario, ScenarioOptions, ScenarioSpec};
use curva::{build_domain, DomainSpec};

fn linear(c: &mut Criterion) {
    let (g, m) = build_domain(&DomainSpec::annulus(0.5, 1.5, 129, 128)).unwrap();
    let k = assemble(&m, 1.0, &vec![1.0; g.len()], &vec![1.0; g.boundary.len()], 0.0);
    let rhs = g.eval(|x, y, _, _| x * y);
    c.bench_function("factor annulus 129x128", |b| b.iter(|| Solver::new(black_box(k.clone())).unwrap()));
    let s = Solver::new(k).unwrap();
    c.bench_function("solve annulus 129x128", |b| b.iter(|| s.solve(black_box(&rhs)).unwrap()));
}

fn eigen(c: &mut Criterion) {
    let (g, m) = build_domain(&DomainSpec::disk(1.0, 65, 64)).unwrap();
    let v = g.eval(|x, _, r, _| r * r + 0.3 * x);
    let b = vec![1.0; g.boundary.len()];
    c.bench_function("eigenpair disk 65x64", |bch| bch.iter(|| principal_eigenpair(&m, 1.0, &v, &b).unwrap()));
}

fn scheme(c: &mut Criterion) {
    let domain = DomainSpec::ball(3, 10.0, 401);
    let (g, _) = build_domain(&domain).unwrap();
    let spec = ScenarioSpec {
        interior: vec![-1.0; g.len()],
        boundary: vec![-1.0; g.boundary.len()],
        domain,
        case: CaseTag::NegSnegHneg,
        normal_form: Some(NormalForm { interior: -1.0, boundary: 1.0 }),
        options: ScenarioOptions::default(),
    };
    let sc = Scenario::new(spec).unwrap();
    c.bench_function("certified run ball 401", |b| b.iter(|| sc.run(1.0).unwrap()));
}

criterion_group!(benches, linear, eigen, scheme);
criterion_main!(benches);
