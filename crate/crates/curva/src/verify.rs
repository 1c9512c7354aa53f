//! Realized-curvature reports and the conformal covariance check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consts;
use crate::error::{Error, Result};
use crate::geometry::*;
use crate::monotone::residuals;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub kind: String,
    pub n: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub nodes: usize,
    pub h: f64,
}

impl GridInfo {
    pub fn of(g: &Grid) -> GridInfo {
        let kind = match g.kind {
            DomainKind::Disk2D => "disk",
            DomainKind::Annulus2D => "annulus",
            DomainKind::RadialBall { .. } => "ball",
            DomainKind::RadialAnnulus { .. } => "radial_annulus",
        };
        GridInfo { kind: kind.to_string(), n: g.dim(), n_r: g.n_r, n_theta: g.n_theta, nodes: g.len(), h: g.h }
    }
}

/// Errors of the realized curvatures against their targets. Interior norms run
/// over interior nodes, boundary norms over boundary nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureErrors {
    pub interior_sup: f64,
    pub interior_l2: f64,
    pub boundary_sup: f64,
    pub boundary_l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub interior_sup: f64,
    pub boundary_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub scenario: String,
    pub grid: GridInfo,
    pub c: f64,
    pub eta1: Option<f64>,
    pub errors: CurvatureErrors,
    pub residuals: ResidualNorms,
    pub constants: BTreeMap<String, f64>,
    pub runtime_s: Option<f64>,
}

impl CurvatureReport {
    pub fn with_constants(mut self, c: &BTreeMap<String, f64>) -> Self {
        self.constants.extend(c.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

pub fn curvature_errors(u: &[f64], m: &MetricData, interior: &[f64], boundary: &[f64]) -> Result<CurvatureErrors> {
    let g = &m.grid;
    if interior.len() != g.len() || boundary.len() != g.boundary.len() {
        return Err(Error::InvalidArgument("targets do not match the grid".into()));
    }
    let (k, s) = conformal_curvatures(u, m)?;
    let (mut isup, mut il2) = (0.0f64, 0.0);
    for i in (0..g.len()).filter(|&i| !g.is_boundary(i)) {
        let e = k[i] - interior[i];
        isup = isup.max(e.abs());
        il2 += m.weights[i] * e * e;
    }
    let (mut bsup, mut bl2) = (0.0f64, 0.0);
    for b in 0..g.boundary.len() {
        let e = s[b] - boundary[b];
        bsup = bsup.max(e.abs());
        bl2 += m.bmeasure[b] * e * e;
    }
    if !(isup.is_finite() && bsup.is_finite()) {
        return Err(Error::IterationDiverged("realized curvature is not finite".into()));
    }
    Ok(CurvatureErrors { interior_sup: isup, interior_l2: il2.sqrt(), boundary_sup: bsup, boundary_l2: bl2.sqrt() })
}

/// Report for `u` against the scenario's (composed) targets at scale `c`.
pub fn residual_and_curvature_report(u: &[f64], sc: &Scenario, c: f64) -> Result<CurvatureReport> {
    let m = &sc.metric;
    let target: Vec<f64> = sc.boundary.iter().map(|h| c * h).collect();
    let errors = curvature_errors(u, m, &sc.interior, &target)?;
    let (ri, rb) = residuals(&sc.problem(c), m, u);
    Ok(CurvatureReport {
        scenario: sc.spec.case.name().to_string(),
        grid: GridInfo::of(&m.grid),
        c,
        eta1: Some(sc.eta1),
        errors,
        residuals: ResidualNorms { interior_sup: sup_norm(&ri), boundary_sup: sup_norm(&rb) },
        constants: BTreeMap::new(),
        runtime_s: None,
    })
}

/// Largest discrepancy in the covariance of the conformal Laplacian and its
/// boundary operator under `ĝ = φ^{p-2} g` (`ĝ = φ² g` on surfaces):
/// `□_ĝ v = φ^{1-p} □_g(φv)` at interior nodes, `B_ĝ v = φ^{-p/2} B_g(φv)` on the boundary.
pub fn conformal_invariance_check(phi: &[f64], v: &[f64], m: &MetricData) -> Result<f64> {
    let g = &m.grid;
    if phi.len() != g.len() || v.len() != g.len() {
        return Err(Error::InvalidArgument("fields do not match the grid".into()));
    }
    if let Some(x) = phi.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::NonPositiveConformalFactor(*x));
    }
    let n = m.n;
    // on surfaces ĝ = e^{2w} g with w = log φ; the operators are (-Δ, ∂_ν)
    let (a, rf, pint, pbdry, mh) = if n == 2 {
        let w: Vec<f64> = phi.iter().map(|x| x.ln()).collect();
        (1.0, 0.0, -2.0, -1.0, m.conformal(&w)?)
    } else {
        let p = consts::p(n);
        (consts::a(n), consts::robin_factor(n), 1.0 - p, -p / 2.0, m.conformal(phi)?)
    };
    let pv: Vec<f64> = phi.iter().zip(v).map(|(x, y)| x * y).collect();
    let (src, pot) = if n == 2 { (v, 0.0) } else { (pv.as_slice(), 1.0) };
    let lap_h = laplacian_apply(v, &mh)?;
    let lap = laplacian_apply(src, m)?;
    let dn_h = normal_derivative(v, &mh)?;
    let dn = normal_derivative(src, m)?;
    let mut worst = 0.0f64;
    for i in (0..g.len()).filter(|&i| !g.is_boundary(i)) {
        let lhs = -a * lap_h[i] + pot * mh.bg_interior[i] * v[i];
        let rhs = phi[i].powf(pint) * (-a * lap[i] + pot * m.bg_interior[i] * src[i]);
        worst = worst.max((lhs - rhs).abs());
    }
    for (b, bn) in g.boundary.iter().enumerate() {
        let i = bn.node;
        let lhs = dn_h[b] + rf * mh.bg_boundary[b] * v[i];
        let rhs = phi[i].powf(pbdry) * (dn[b] + rf * m.bg_boundary[b] * src[i]);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_factor_in_flat_ball_has_zero_curvatures() {
        let (g, m) = build_domain(&DomainSpec::ball(3, 1.0, 33)).unwrap();
        let u = vec![1.0; g.len()];
        let h: Vec<f64> = m.bg_boundary.clone();
        let e = curvature_errors(&u, &m, &vec![0.0; g.len()], &h).unwrap();
        assert!(e.interior_sup < 1e-12 && e.boundary_sup < 1e-12, "{e:?}");
    }

    #[test]
    fn surface_covariance_is_exact() {
        let (g, m) = build_domain(&DomainSpec::disk(1.0, 24, 32)).unwrap();
        let phi = g.eval(|_, _, r, _| 1.0 + r * r / 4.0);
        let v = g.eval(|_, _, r, t| t.cos() * r * r);
        assert!(conformal_invariance_check(&phi, &v, &m).unwrap() < 1e-11);
    }

    #[test]
    fn rejects_nonpositive_factor() {
        let (g, m) = build_domain(&DomainSpec::ball(3, 1.0, 9)).unwrap();
        let mut phi = vec![1.0; g.len()];
        phi[3] = 0.0;
        assert!(matches!(
            conformal_invariance_check(&phi, &phi.clone(), &m),
            Err(Error::NonPositiveConformalFactor(_))
        ));
    }
}
