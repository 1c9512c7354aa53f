//! End-to-end drivers: classify, build a bracket, iterate, verify.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::builders::*;
use crate::consts;
use crate::elliptic::{estimate_gamma, principal_eigenpair, Eigenpair};
use crate::error::{Error, Result, Stage};
use crate::geometry::*;
use crate::monotone::{run_scheme, IterationTrace, NonlinearProblem};
use crate::verify::{residual_and_curvature_report, CurvatureReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "Neg_Sneg_Hneg")]
    NegSnegHneg,
    #[serde(rename = "Neg_Sneg_Hpos")]
    NegSnegHpos,
    #[serde(rename = "Neg_Smixed")]
    NegSmixed,
    #[serde(rename = "Neg_Diffeo")]
    NegDiffeo,
    #[serde(rename = "TwoD_Kneg")]
    TwoDKneg,
    #[serde(rename = "TwoD_Kmixed")]
    TwoDKmixed,
    #[serde(rename = "TwoD_Diffeo")]
    TwoDDiffeo,
    #[serde(rename = "Zero_Diffeo")]
    ZeroDiffeo,
    #[serde(rename = "Pos_Spos")]
    PosSpos,
}

impl CaseTag {
    pub const ALL: [CaseTag; 9] = [
        CaseTag::NegSnegHneg,
        CaseTag::NegSnegHpos,
        CaseTag::NegSmixed,
        CaseTag::NegDiffeo,
        CaseTag::TwoDKneg,
        CaseTag::TwoDKmixed,
        CaseTag::TwoDDiffeo,
        CaseTag::ZeroDiffeo,
        CaseTag::PosSpos,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CaseTag::NegSnegHneg => "Neg_Sneg_Hneg",
            CaseTag::NegSnegHpos => "Neg_Sneg_Hpos",
            CaseTag::NegSmixed => "Neg_Smixed",
            CaseTag::NegDiffeo => "Neg_Diffeo",
            CaseTag::TwoDKneg => "TwoD_Kneg",
            CaseTag::TwoDKmixed => "TwoD_Kmixed",
            CaseTag::TwoDDiffeo => "TwoD_Diffeo",
            CaseTag::ZeroDiffeo => "Zero_Diffeo",
            CaseTag::PosSpos => "Pos_Spos",
        }
    }

    pub fn is_2d(&self) -> bool {
        matches!(self, CaseTag::TwoDKneg | CaseTag::TwoDKmixed | CaseTag::TwoDDiffeo)
    }

    fn uses_diffeo(&self) -> bool {
        matches!(self, CaseTag::NegDiffeo | CaseTag::TwoDDiffeo | CaseTag::ZeroDiffeo)
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<CaseTag> {
        CaseTag::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario tag `{s}`")))
    }
}

/// Constant background curvatures `(λ, ζ)` or `(K_g, σ_g)` assumed as input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub interior: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Sup-norm tolerance on the realized curvatures.
    pub curvature_tol: f64,
    pub gamma_probes: usize,
    pub seed: u64,
    /// Magnitude of the Robin perturbation; its sign follows the case.
    pub beta: f64,
    /// Plateau level `A`; half the maximum of the bound when absent.
    pub level: Option<f64>,
    /// Radii of the shell `Ω` for the local Dirichlet problem.
    pub subdomain: Option<(f64, f64)>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            tol: 1e-10,
            max_iter: 20_000,
            curvature_tol: 1e-3,
            gamma_probes: 16,
            seed: 0,
            beta: 0.25,
            level: None,
            subdomain: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub domain: DomainSpec,
    pub case: CaseTag,
    pub normal_form: Option<NormalForm>,
    /// `S` (n >= 3) or `K` (n = 2) at every node.
    pub interior: ScalarField,
    /// `H` or `σ` at every boundary node, before scaling by `c`.
    pub boundary: BoundaryField,
    pub options: ScenarioOptions,
}

#[derive(Debug, Clone)]
pub struct CertifiedResult {
    pub u: ScalarField,
    pub c: f64,
    pub trace: IterationTrace,
    pub report: CurvatureReport,
    pub provenance: Provenance,
    pub constants: BTreeMap<String, f64>,
    pub diffeo: Option<Diffeo>,
    pub pair: SubSuperPair,
}

/// Operator whose principal eigenvalue classifies the case: the conformal
/// Laplacian with its Robin condition, or `(-Δ + K_g, ∂_ν + σ_g)` on surfaces.
pub fn first_eigenpair(m: &MetricData, beta: f64) -> Result<Eigenpair> {
    if m.n == 2 {
        let b: Vec<f64> = m.bg_boundary.iter().map(|s| s + beta).collect();
        principal_eigenpair(m, 1.0, &m.bg_interior, &b)
    } else {
        let k = consts::robin_factor(m.n);
        let b: Vec<f64> = m.bg_boundary.iter().map(|h| k * (h + beta)).collect();
        principal_eigenpair(m, consts::a(m.n), &m.bg_interior, &b)
    }
}

enum Prepared {
    EigenConstant,
    Transformed { u_plus: ScalarField },
    Zero,
    Positive { u0: ScalarField },
}

/// The c-independent part of a scenario: metric, classification, diffeomorphism,
/// plateau and (where it does not depend on `c`) the super-solution.
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub metric: MetricData,
    pub eta1: f64,
    pub diffeo: Option<Diffeo>,
    /// Prescribed interior function after composition with the diffeomorphism.
    pub interior: ScalarField,
    /// Prescribed boundary function after composition, unscaled.
    pub boundary: BoundaryField,
    pub constants: BTreeMap<String, f64>,
    prepared: Prepared,
}

fn extent(f: &[f64]) -> (f64, f64) {
    f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn classification(msg: String) -> Error {
    Error::Classification(msg).at(Stage::Classification)
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Scenario> {
        let (grid, base) = build_domain(&spec.domain).map_err(|e| e.at(Stage::Classification))?;
        let n = grid.dim();
        if spec.interior.len() != grid.len() || spec.boundary.len() != grid.boundary.len() {
            return Err(Error::InvalidArgument("prescribed data does not match the grid".into()).at(Stage::Classification));
        }
        if spec.interior.iter().chain(&spec.boundary).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("prescribed data must be finite".into()).at(Stage::Classification));
        }
        let metric = match spec.normal_form {
            Some(nf) => base.with_constant_background(nf.interior, nf.boundary),
            None => Ok(base),
        }
        .map_err(|e| e.at(Stage::Classification))?;
        let case = spec.case;
        if case.is_2d() != (n == 2) {
            return Err(classification(format!("{case} does not apply in dimension {n}")));
        }
        let (smin, smax) = extent(&spec.interior);
        let hmax = spec.boundary.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(classification(format!("{case}: {what}"))) };
        // prescribed data first, so a wrong tag is rejected before any solve
        match case {
            CaseTag::NegSnegHneg => {
                check(smax < 0.0, "S must be negative everywhere")?;
                check(hmax <= 0.0, "H must be non-positive everywhere")?;
            }
            CaseTag::NegSnegHpos => {
                check(smax < 0.0, "S must be negative everywhere")?;
                check(hmax > 0.0, "H must be positive somewhere")?;
            }
            CaseTag::NegSmixed | CaseTag::NegDiffeo => check(smin < 0.0, "S must be negative somewhere")?,
            CaseTag::TwoDKneg => check(smax < 0.0, "K must be negative everywhere")?,
            CaseTag::TwoDKmixed | CaseTag::TwoDDiffeo => check(smin < 0.0, "K must be negative somewhere")?,
            CaseTag::ZeroDiffeo => check(smin < 0.0 && smax > 0.0, "S must change sign")?,
            CaseTag::PosSpos => check(smax > 0.0, "S must be positive somewhere")?,
        }

        let eta1 = first_eigenpair(&metric, 0.0).map_err(|e| e.at(Stage::Eigen))?.eta;
        let mut constants = BTreeMap::new();
        constants.insert("eta1".to_string(), eta1);
        match case {
            CaseTag::NegSnegHneg | CaseTag::NegSnegHpos | CaseTag::NegSmixed | CaseTag::NegDiffeo => {
                check(eta1 < 0.0, &format!("first eigenvalue {eta1:e} is not negative"))?
            }
            CaseTag::ZeroDiffeo => check(eta1.abs() <= 1e-8, &format!("first eigenvalue {eta1:e} is not zero"))?,
            CaseTag::PosSpos => check(eta1 > 0.0, &format!("first eigenvalue {eta1:e} is not positive"))?,
            _ => {}
        }
        let nf_interior = constant_value(&metric.bg_interior);
        let nf_boundary = constant_value(&metric.bg_boundary);
        if case.is_2d() {
            if nf_interior != Some(-1.0) || nf_boundary != Some(0.0) {
                return Err(classification(format!(
                    "{case} needs the normal form K_g = -1, σ_g = 0 of a surface with negative Euler characteristic"
                )));
            }
            let chi = (integrate(&metric.bg_interior, &metric) + integrate_boundary(&metric.bg_boundary, &metric))
                / std::f64::consts::TAU;
            constants.insert("euler_characteristic".to_string(), chi);
        }
        if matches!(case, CaseTag::NegSmixed | CaseTag::NegDiffeo) && !matches!(nf_interior, Some(l) if l < 0.0) {
            return Err(classification(format!("{case} needs a constant negative background scalar curvature")));
        }

        let mut sc = Scenario {
            interior: spec.interior.clone(),
            boundary: spec.boundary.clone(),
            spec,
            metric,
            eta1,
            diffeo: None,
            constants,
            prepared: Prepared::EigenConstant,
        };
        sc.prepared = sc.prepare()?;
        Ok(sc)
    }

    fn prepare(&mut self) -> Result<Prepared> {
        let case = self.spec.case;
        let m = &self.metric;
        let g = m.grid.clone();
        let n = m.n;
        let opts = self.spec.options.clone();
        match case {
            CaseTag::NegSnegHneg | CaseTag::NegSnegHpos => Ok(Prepared::EigenConstant),
            CaseTag::ZeroDiffeo => {
                let out = search_diffeomorphism(m, &self.interior, Objective::NegativeIntegral)
                    .map_err(|e| e.at(Stage::Diffeomorphism))?;
                self.adopt(out.diffeo, out.composed, out.evaluated);
                Ok(Prepared::Zero)
            }
            CaseTag::PosSpos => {
                let mask = self.subdomain_mask()?;
                let local = solve_local_dirichlet(&self.metric, &self.interior, &mask).map_err(|e| e.at(Stage::SubSolution))?;
                self.constants.insert("dirichlet_multiplier".to_string(), local.multiplier);
                self.constants.insert("dirichlet_residual".to_string(), local.residual);
                Ok(Prepared::Positive { u0: local.u0 })
            }
            _ => {
                // plateau route, n >= 3 through w = u^{2-p}, n = 2 through w = e^{-2u}
                let bg = constant_value(&m.bg_interior).expect("checked during classification");
                let q = plateau_exponent(n);
                let (diffusion, mu) = if n == 2 { (1.0, -2.0 * bg) } else { (consts::a(n), (2.0 - consts::p(n)) * bg) };
                let gamma = estimate_gamma(
                    m,
                    diffusion,
                    &vec![mu; g.len()],
                    &vec![0.0; g.boundary.len()],
                    q,
                    opts.gamma_probes,
                    opts.seed,
                )
                .map_err(|e| e.at(Stage::Plateau))?;
                let factor = if n == 2 { -2.0 } else { 2.0 - consts::p(n) };
                let bound: Vec<f64> = self.interior.iter().map(|s| factor * s).collect();
                let (lo, hi) = extent(&bound);
                let level = opts.level.unwrap_or(if lo > 0.0 { lo } else { 0.5 * hi });
                if case.uses_diffeo() && lo < level {
                    let budget = plateau_budget(n, level, gamma, bg);
                    let slack = (budget / (level - lo)).powf(q);
                    let target = (m.volume() - slack).max(0.0);
                    let out = search_diffeomorphism(m, &bound, Objective::SuperlevelVolume { level, target })
                        .map_err(|e| e.at(Stage::Diffeomorphism))?;
                    let composed: Vec<f64> = out.composed.iter().map(|b| b / factor).collect();
                    self.adopt(out.diffeo, composed, out.evaluated);
                    self.constants.insert("superlevel_target".to_string(), target);
                }
                let bound: Vec<f64> = self.interior.iter().map(|s| factor * s).collect();
                let m = &self.metric;
                let plateau = build_plateau_function(m, &bound, level, gamma).map_err(|e| e.at(Stage::Plateau))?;
                let (u_plus, consts) = if n == 2 {
                    build_2d_supersolution(m, &self.interior, &plateau.f, plateau.level, gamma)
                } else {
                    build_negative_supersolution(m, &self.interior, &plateau.f, plateau.level, gamma, q)
                }
                .map_err(|e| e.at(Stage::SuperSolution))?;
                self.constants.extend(consts);
                self.constants.insert("gamma".to_string(), gamma);
                self.constants.insert("q".to_string(), q);
                self.constants.insert("plateau_level".to_string(), plateau.level);
                self.constants.insert("plateau_norm".to_string(), plateau.norm);
                self.constants.insert("plateau_budget".to_string(), plateau.budget);
                Ok(Prepared::Transformed { u_plus })
            }
        }
    }

    fn adopt(&mut self, d: Diffeo, composed: ScalarField, evaluated: usize) {
        let g = &self.metric.grid;
        self.boundary = d.pullback_boundary(g, &self.spec.boundary);
        self.interior = composed;
        self.constants.insert("diffeo_rotation".to_string(), d.rotation);
        self.constants.insert("diffeo_squeeze".to_string(), d.squeeze);
        self.constants.insert("diffeo_evaluated".to_string(), evaluated as f64);
        self.diffeo = Some(d);
    }

    /// Shell `Ω` for the positive case: the configured radii, or the middle
    /// half of the largest centred ball on which `S > 0`.
    fn subdomain_mask(&mut self) -> Result<Vec<bool>> {
        let g = &self.metric.grid;
        let (r1, r2) = match self.spec.options.subdomain {
            Some(radii) => radii,
            None => {
                let mut rho = g.r_out;
                for (i, (nd, s)) in g.nodes.iter().zip(&self.interior).enumerate() {
                    if *s <= 0.0 && !g.is_boundary(i) {
                        rho = rho.min(nd.r);
                    }
                }
                let inner = if g.kind.has_center() { 0.0 } else { g.r_in };
                (inner + 0.25 * (rho - inner), inner + 0.75 * (rho - inner))
            }
        };
        self.constants.insert("subdomain_r1".to_string(), r1);
        self.constants.insert("subdomain_r2".to_string(), r2);
        let mask: Vec<bool> = g.nodes.iter().map(|nd| nd.r > r1 && nd.r < r2).collect();
        if !mask.iter().any(|&x| x) {
            return Err(Error::Precondition(format!("subdomain ({r1}, {r2}) holds no nodes")).at(Stage::SubSolution));
        }
        Ok(mask)
    }

    pub fn problem(&self, c: f64) -> NonlinearProblem {
        let target: Vec<f64> = self.boundary.iter().map(|h| c * h).collect();
        if self.metric.n == 2 {
            NonlinearProblem::gauss(&self.metric, &self.interior, &target)
        } else {
            NonlinearProblem::yamabe(&self.metric, &self.interior, &target)
        }
    }

    fn bracket(&self, c: f64) -> Result<SubSuperPair> {
        let m = &self.metric;
        let n = m.n;
        let opts = &self.spec.options;
        let target: Vec<f64> = self.boundary.iter().map(|h| c * h).collect();
        let s = &self.interior;
        match &self.prepared {
            Prepared::EigenConstant => {
                let sub = eigen_subsolution(m, s, &target, opts.beta).map_err(|e| e.at(Stage::SubSolution))?;
                let floor = sub.field.iter().cloned().fold(0.0, f64::max);
                let big = constant_supersolution(m, s, &target, floor).map_err(|e| e.at(Stage::SuperSolution))?;
                Ok(SubSuperPair::new(sub.field, vec![big; m.grid.len()], Provenance::EigenScaled, n)
                    .map_err(|e| e.at(Stage::Bracket))?
                    .with_constant("delta", sub.delta)
                    .with_constant("eta_beta", sub.eta)
                    .with_constant("beta", sub.beta)
                    .with_constant("C", big))
            }
            Prepared::Transformed { u_plus } => {
                if n == 2 {
                    let (um, consts) =
                        build_2d_subsolution(m, s, &target, u_plus).map_err(|e| e.at(Stage::SubSolution))?;
                    Ok(SubSuperPair::new(um, u_plus.clone(), Provenance::TwoDPipeline, n)
                        .map_err(|e| e.at(Stage::Bracket))?
                        .with_constants(&consts))
                } else {
                    let sub = eigen_subsolution(m, s, &target, opts.beta).map_err(|e| e.at(Stage::SubSolution))?;
                    let (field, xi) = shrink_below(&sub.field, u_plus).ok_or_else(|| {
                        Error::CannotOrder("no 2^-k scaling of the eigenfunction lies below u+".into()).at(Stage::Bracket)
                    })?;
                    Ok(SubSuperPair::new(field, u_plus.clone(), Provenance::KWTransformPipeline, n)
                        .map_err(|e| e.at(Stage::Bracket))?
                        .with_constant("delta", sub.delta)
                        .with_constant("xi", xi)
                        .with_constant("eta_beta", sub.eta)
                        .with_constant("beta", sub.beta))
                }
            }
            Prepared::Zero => zero_case_pair(m, s, &target).map_err(|e| e.at(Stage::Bracket)),
            Prepared::Positive { u0 } => {
                let sup = positive_supersolution(m, s, &target, -opts.beta).map_err(|e| e.at(Stage::SuperSolution))?;
                Ok(glue_positive_pair(u0, &sup.field, n)
                    .map_err(|e| e.at(Stage::Bracket))?
                    .with_constant("delta", sup.delta)
                    .with_constant("eta_beta", sup.eta)
                    .with_constant("beta", sup.beta))
            }
        }
    }

    pub fn run(&self, c: f64) -> Result<CertifiedResult> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Precondition(format!("boundary scale c = {c} must be positive")).at(Stage::Classification));
        }
        let m = &self.metric;
        let opts = &self.spec.options;
        let pair = self.bracket(c)?;
        let prob = self.problem(c);
        let check = validate_bracket(&pair, &prob, m);
        if !check.pass {
            return Err(Error::BracketViolation(format!(
                "{} violated at node {:?}: sub {:e}/{:e}, super {:e}/{:e}, ordering {:e}",
                check.worst_label,
                check.worst_node,
                check.sub_interior,
                check.sub_boundary,
                check.super_interior,
                check.super_boundary,
                check.ordering
            ))
            .at(Stage::Bracket));
        }
        let trace = run_scheme(&prob, m, &pair, opts.tol, opts.max_iter).map_err(|e| e.at(Stage::Iteration))?;
        let mut constants = self.constants.clone();
        constants.extend(pair.constants.iter().map(|(k, v)| (k.clone(), *v)));
        constants.insert("iteration_A".to_string(), trace.constants.a);
        constants.insert("iteration_B".to_string(), trace.constants.b);
        let report = residual_and_curvature_report(&trace.solution, self, c)
            .map_err(|e| e.at(Stage::Verification))?
            .with_constants(&constants);
        let worst = report.errors.interior_sup.max(report.errors.boundary_sup);
        if !(worst <= opts.curvature_tol) {
            return Err(Error::ConditionFailed(format!(
                "realized curvature error {worst:e} exceeds {:e}",
                opts.curvature_tol
            ))
            .at(Stage::Verification));
        }
        Ok(CertifiedResult {
            u: trace.solution.clone(),
            c,
            trace,
            report,
            provenance: pair.provenance,
            constants,
            diffeo: self.diffeo,
            pair,
        })
    }
}

/// `2^{-k} u` for the first `k ≤ 60` that puts it below `ceiling`.
fn shrink_below(u: &[f64], ceiling: &[f64]) -> Option<(ScalarField, f64)> {
    (0..=60).map(|k| 2f64.powi(-k)).find_map(|t| {
        let v: Vec<f64> = u.iter().map(|x| t * x).collect();
        v.iter().zip(ceiling).all(|(a, b)| a <= b).then_some((v, t))
    })
}

pub fn run_scenario(spec: ScenarioSpec, c: f64) -> Result<CertifiedResult> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Precondition(format!("boundary scale c = {c} must be positive")).at(Stage::Classification));
    }
    Scenario::new(spec)?.run(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct Probe {
    pub c: f64,
    pub certified: bool,
    pub stage: Option<Stage>,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub c_star: f64,
    pub result: CertifiedResult,
    pub transcript: Vec<Probe>,
}

pub const BISECTION_STEPS: usize = 12;

/// Largest certifiable `c` in `(0, c_hi]` by bisection, assuming certifiability
/// is monotone in `c`. The final candidate is re-run from scratch.
pub fn certify_max_c(spec: ScenarioSpec, c_hi: f64) -> Result<Certification> {
    if !(c_hi.is_finite() && c_hi > 0.0) {
        return Err(Error::Precondition(format!("c_hi = {c_hi} must be positive")).at(Stage::Classification));
    }
    let sc = Scenario::new(spec.clone())?;
    let mut transcript = Vec::new();
    let mut probe = |c: f64| -> (bool, Option<Error>) {
        match sc.run(c) {
            Ok(_) => {
                transcript.push(Probe { c, certified: true, stage: None, message: None });
                (true, None)
            }
            Err(e) => {
                transcript.push(Probe { c, certified: false, stage: e.stage(), message: Some(e.to_string()) });
                (false, Some(e))
            }
        }
    };
    let mut last_error = None;
    let (ok, err) = probe(c_hi);
    let c_star = if ok {
        c_hi
    } else {
        last_error = err;
        let (mut lo, mut hi) = (0.0, c_hi);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let (ok, err) = probe(mid);
            if ok {
                lo = mid;
            } else {
                hi = mid;
                last_error = err;
            }
        }
        lo
    };
    if c_star == 0.0 {
        let stage = last_error.as_ref().and_then(|e| e.stage()).unwrap_or(Stage::Verification);
        return Err(Error::AllFailed(c_hi / 2f64.powi(BISECTION_STEPS as i32)).at(stage));
    }
    let result = run_scenario(spec, c_star)?;
    Ok(Certification { c_star, result, transcript })
}
