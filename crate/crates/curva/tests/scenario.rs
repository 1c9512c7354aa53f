use curva::builders::Provenance;
use curva::scenario::*;
use curva::*;

fn spec(domain: DomainSpec, case: CaseTag, nf: Option<(f64, f64)>, s: impl Fn(f64, f64, f64) -> f64, h: f64) -> ScenarioSpec {
    let (g, _) = build_domain(&domain).unwrap();
    ScenarioSpec {
        interior: g.eval(|x, y, r, _| s(x, y, r)),
        boundary: vec![h; g.boundary.len()],
        domain,
        case,
        normal_form: nf.map(|(interior, boundary)| NormalForm { interior, boundary }),
        options: ScenarioOptions::default(),
    }
}

fn ball(n_r: usize) -> DomainSpec {
    DomainSpec::ball(3, 10.0, n_r)
}

#[test]
fn case_tags_round_trip_through_names() {
    for t in CaseTag::ALL {
        assert_eq!(t.name().parse::<CaseTag>().unwrap(), t);
        assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
    }
    assert!("Neg_Whatever".parse::<CaseTag>().is_err());
}

#[test]
fn negative_constant_case_certifies_at_full_scale() {
    let cert = certify_max_c(spec(ball(401), CaseTag::NegSnegHneg, Some((-1.0, 1.0)), |_, _, _| -1.0, -1.0), 1.0).unwrap();
    assert_eq!(cert.c_star, 1.0);
    assert_eq!(cert.transcript.len(), 1);
    assert_eq!(cert.result.provenance, Provenance::EigenScaled);
    assert!(cert.result.report.errors.interior_sup < 1e-3);
    assert!(cert.result.constants["eta1"] < 0.0);
    assert!(cert.result.constants.contains_key("iteration_A"));
}

#[test]
fn positive_boundary_curvature_certifies() {
    let sc = Scenario::new(spec(ball(201), CaseTag::NegSnegHpos, Some((-1.0, 1.0)), |_, _, r| -1.0 - 0.01 * r, 0.5))
        .unwrap();
    let res = sc.run(0.5).unwrap();
    assert!(res.trace.converged);
    let e = res.report.errors;
    assert!(e.interior_sup < 1e-3 && e.boundary_sup < 1e-3, "{e:?}");
}

#[test]
fn surface_case_certifies_through_transform() {
    let sp = spec(DomainSpec::disk(1.0, 33, 32), CaseTag::TwoDKneg, Some((-1.0, 0.0)), |_, _, r| -1.0 - 0.5 * r * r, 0.3);
    let cert = certify_max_c(sp, 1.0).unwrap();
    assert!(cert.c_star > 0.0 && cert.c_star <= 1.0);
    assert_eq!(cert.result.provenance, Provenance::TwoDPipeline);
    assert!(cert.result.constants.contains_key("euler_characteristic"));
    // the transcript ends with the last certified probe
    assert!(cert.transcript.iter().any(|p| p.certified && p.c == cert.c_star));
    assert!(cert.transcript.iter().filter(|p| p.c > cert.c_star).all(|p| !p.certified));
}

#[test]
fn zero_case_runs_after_the_diffeomorphism_search() {
    let sp = spec(DomainSpec::ball(3, 1.0, 65), CaseTag::ZeroDiffeo, Some((0.0, 0.0)), |_, _, r| -1.0 + 2.0 * r * r, 0.01);
    let sc = Scenario::new(sp.clone()).unwrap();
    // ∫S > 0 on the unit ball, so the identity is not enough
    let d = sc.diffeo.unwrap();
    assert!(d.squeeze != 0.0 || d.rotation != 0.0);
    assert!(integrate(&sc.interior, &sc.metric) < 0.0);
    let cert = certify_max_c(sp, 1.0).unwrap();
    assert_eq!(cert.result.provenance, Provenance::ZeroCasePerturbation);
}

#[test]
fn scale_must_be_positive() {
    let sp = spec(ball(41), CaseTag::NegSnegHneg, Some((-1.0, 1.0)), |_, _, _| -1.0, -1.0);
    for c in [0.0, -1.0, f64::NAN] {
        let e = run_scenario(sp.clone(), c).unwrap_err();
        assert_eq!(e.stage(), Some(Stage::Classification));
    }
    assert!(certify_max_c(sp, 0.0).is_err());
}

#[test]
fn mismatched_tags_are_classification_errors() {
    let cases: Vec<ScenarioSpec> = vec![
        spec(ball(41), CaseTag::NegSnegHneg, Some((-1.0, 1.0)), |_, _, _| -1.0, 0.5),
        spec(ball(41), CaseTag::NegSnegHpos, Some((-1.0, 1.0)), |_, _, _| -1.0, -0.5),
        spec(ball(41), CaseTag::PosSpos, Some((-1.0, 1.0)), |_, _, _| 1.0, 1.0),
        spec(ball(41), CaseTag::ZeroDiffeo, Some((-1.0, 1.0)), |_, _, r| r - 5.0, 0.0),
        spec(DomainSpec::disk(1.0, 9, 8), CaseTag::TwoDKneg, Some((-1.0, 0.0)), |x, _, _| x, 0.0),
        // a surface case without the normal form
        spec(DomainSpec::disk(1.0, 9, 8), CaseTag::TwoDKneg, None, |_, _, _| -1.0, 0.0),
        // wrong dimension for the tag
        spec(DomainSpec::disk(1.0, 9, 8), CaseTag::NegSnegHneg, Some((-1.0, 0.0)), |_, _, _| -1.0, -1.0),
    ];
    for sp in cases {
        let case = sp.case;
        match Scenario::new(sp) {
            Err(Error::Stage { stage: Stage::Classification, .. }) => {}
            Err(e) => panic!("{case}: {e}"),
            Ok(_) => panic!("{case} accepted"),
        }
    }
}

#[test]
fn mixed_sign_in_three_dimensions_exhausts_the_plateau_budget() {
    let sp = spec(ball(81), CaseTag::NegSmixed, Some((-1.0, 1.0)), |_, _, r| if r < 2.0 { 0.5 } else { -1.0 }, -1.0);
    match Scenario::new(sp) {
        Err(Error::Stage { stage: Stage::Plateau, source }) => {
            assert!(matches!(*source, Error::BudgetInfeasible(_)), "{source}")
        }
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("plateau accepted"),
    }
}

#[test]
fn positive_case_fails_at_the_bracket() {
    let domain = DomainSpec::ball(3, 1.0, 201);
    let mut sp = spec(domain, CaseTag::PosSpos, None, |_, _, r| 1.0 - 0.75 * (1.0 + ((r - 0.7) / 0.03).tanh()), 1.0);
    sp.options.subdomain = Some((0.1, 0.4));
    let sc = Scenario::new(sp.clone()).unwrap();
    assert!(sc.eta1 > 0.0);
    assert!(sc.constants["dirichlet_residual"] < 1e-6);
    let e = sc.run(1.0).unwrap_err();
    assert_eq!(e.stage(), Some(Stage::Bracket));
    match certify_max_c(sp, 1.0) {
        Err(Error::Stage { stage: Stage::Bracket, source }) => assert!(matches!(*source, Error::AllFailed(_))),
        other => panic!("{:?}", other.map(|c| c.c_star)),
    }
}

#[test]
fn subdomain_outside_the_positive_set_is_rejected() {
    let domain = DomainSpec::ball(3, 1.0, 101);
    let mut sp = spec(domain, CaseTag::PosSpos, None, |_, _, r| 1.0 - 2.0 * r, 1.0);
    sp.options.subdomain = Some((0.7, 0.9));
    assert!(Scenario::new(sp).is_err());
}
