use std::collections::BTreeMap;

use super::{constant_value, pow2};
use crate::consts;
use crate::elliptic::{perturbed_eigenvalue, solve_linear_robin, Gauge, RobinProblem};
use crate::error::{Error, Result};
use crate::geometry::{gradient_norm, lq_norm, MetricData, ScalarField};
use crate::monotone::{residuals, NonlinearProblem};

fn need_yamabe(m: &MetricData) -> Result<()> {
    if m.n < 3 {
        return Err(Error::InvalidArgument(format!("builder needs n >= 3, got {}", m.n)));
    }
    Ok(())
}

fn check_lengths(m: &MetricData, s: &[f64], h: &[f64]) -> Result<()> {
    if s.len() != m.grid.len() || h.len() != m.grid.boundary.len() {
        return Err(Error::InvalidArgument("prescribed data does not match the grid".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EigenSub {
    pub field: ScalarField,
    pub delta: f64,
    pub eta: f64,
    pub beta: f64,
}

/// `u₋ = δφ` from the principal eigenfunction of the conformal Laplacian with
/// Robin coefficient raised by `κβ`. `h_target` is the scaled mean curvature `cH`.
/// `S` may change sign; where `S ≥ 0` the interior inequality holds for every `δ`.
pub fn eigen_subsolution(m: &MetricData, s: &[f64], h_target: &[f64], beta: f64) -> Result<EigenSub> {
    need_yamabe(m)?;
    check_lengths(m, s, h_target)?;
    let n = m.n;
    let p = consts::p(n);
    let k = consts::robin_factor(n);
    let b: Vec<f64> = m.bg_boundary.iter().map(|h| k * h).collect();
    let ep = perturbed_eigenvalue(m, consts::a(n), &m.bg_interior, &b, beta)?;
    if ep.eta >= 0.0 {
        return Err(Error::NotApplicable(format!("perturbed eigenvalue {} is not negative", ep.eta)));
    }
    let phi = ep.phi;
    let inf_phi = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup_phi = phi.iter().cloned().fold(0.0, f64::max);
    let inf_s = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let prob = NonlinearProblem::yamabe(m, s, h_target);
    for kk in 0..=200 {
        let delta = pow2(-kk);
        // η inf φ ≤ δ^{p-2} inf S sup φ^{p-1}
        if ep.eta * inf_phi > delta.powf(p - 2.0) * inf_s * sup_phi.powf(p - 1.0) {
            continue;
        }
        let ok_boundary = m.grid.boundary.iter().enumerate().all(|(bi, bn)| {
            let x = delta * phi[bn.node];
            -beta * x <= h_target[bi] * x.powf(p / 2.0)
        });
        if !ok_boundary {
            continue;
        }
        let field: Vec<f64> = phi.iter().map(|x| delta * x).collect();
        let (ri, rb) = residuals(&prob, m, &field);
        let tol = 1e-8 * (1.0 + ep.eta.abs());
        if ri.iter().chain(&rb).all(|&r| r <= tol) {
            return Ok(EigenSub { field, delta, eta: ep.eta, beta });
        }
    }
    Err(Error::NotApplicable("no power-of-two scaling of the eigenfunction is a sub-solution".into()))
}

/// Smallest `C = 2^k ≥ floor` for which the constant is a discrete super-solution.
pub fn constant_supersolution(m: &MetricData, s: &[f64], h_target: &[f64], floor: f64) -> Result<f64> {
    need_yamabe(m)?;
    check_lengths(m, s, h_target)?;
    if let Some(i) = s.iter().position(|&x| x >= 0.0) {
        return Err(Error::NoConstantWorks(format!("S = {} >= 0 at node {i}", s[i])));
    }
    let prob = NonlinearProblem::yamabe(m, s, h_target);
    let start = if floor > 0.0 { floor.log2().ceil() as i32 } else { -60 };
    for k in start.max(-60)..=60 {
        let c = pow2(k);
        if c < floor {
            continue;
        }
        let u = vec![c; m.grid.len()];
        let (ri, rb) = residuals(&prob, m, &u);
        let tol = 1e-12 * (1.0 + c.powf(consts::p(m.n) - 1.0));
        if ri.iter().chain(&rb).all(|&r| r >= -tol) {
            return Ok(c);
        }
    }
    Err(Error::NoConstantWorks(format!("no C = 2^k in [{floor:e}, 2^60] satisfies both inequalities")))
}

/// Super-solution for sign-changing `S` through `w = u^{2-p}`.
///
/// The metric must be in normal form with constant `R_g = λ < 0`. `f` and `a_level`
/// are the plateau function and its level, `gamma` the elliptic constant of
/// `(-aΔ + (2-p)λ, ∂_ν)` and `q` its norm exponent.
pub fn build_negative_supersolution(
    m: &MetricData,
    s: &[f64],
    f: &[f64],
    a_level: f64,
    gamma: f64,
    q: f64,
) -> Result<(ScalarField, BTreeMap<String, f64>)> {
    need_yamabe(m)?;
    let g = &m.grid;
    if s.len() != g.len() || f.len() != g.len() {
        return Err(Error::InvalidArgument("prescribed data does not match the grid".into()));
    }
    let lambda = constant_value(&m.bg_interior)
        .filter(|&l| l < 0.0)
        .ok_or_else(|| Error::Precondition("background scalar curvature must be a negative constant".into()))?;
    if !(a_level > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument("level and gamma must be positive".into()));
    }
    let n = m.n;
    let p = consts::p(n);
    let d = consts::d_coef(n);
    let mu = (2.0 - p) * lambda;
    if let Some(i) = (0..g.len()).find(|&i| (2.0 - p) * s[i] < f[i]) {
        return Err(Error::ConditionFailed(format!("(2-p)S < F at node {i}")));
    }
    let denom = 1.0 + (d + 1.0) * mu;
    let budget = a_level / (2.0 * gamma * denom);
    let dev: Vec<f64> = f.iter().map(|x| x - a_level).collect();
    let norm = lq_norm(&dev, m, q);
    if norm > budget {
        return Err(Error::ConditionFailed(format!("‖F - A‖ = {norm:e} exceeds {budget:e}")));
    }
    let delta = a_level / denom;
    let delta_b = -delta / (2.0 * gamma * m.volume().powf(1.0 / q));
    let prob = RobinProblem {
        a: consts::a(n),
        v: vec![mu; g.len()],
        b: vec![0.0; g.boundary.len()],
        f: f.iter().map(|x| x - delta).collect(),
        r: vec![delta_b; g.boundary.len()],
    };
    let w = solve_linear_robin(&prob, m, Gauge::Unique)?;
    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grad = gradient_norm(&w, m).into_iter().fold(0.0, f64::max);
    if wmin < d * delta || wmax > (d + 2.0) * delta || grad > delta {
        return Err(Error::BoundsCheckFailed(format!(
            "w in [{wmin:e}, {wmax:e}], |∇w| ≤ {grad:e}; need [{:e}, {:e}] and {delta:e}",
            d * delta,
            (d + 2.0) * delta
        )));
    }
    let u: Vec<f64> = w.iter().map(|x| x.powf(1.0 / (2.0 - p))).collect();
    check_interior_super(&NonlinearProblem::yamabe(m, s, &vec![0.0; g.boundary.len()]), m, &u)?;
    let mut c = BTreeMap::new();
    c.insert("delta".into(), delta);
    c.insert("delta_prime".into(), delta_b);
    c.insert("gamma".into(), gamma);
    c.insert("plateau_level".into(), a_level);
    c.insert("plateau_norm".into(), norm);
    c.insert("plateau_budget".into(), budget);
    Ok((u, c))
}

/// Interior half of the discrete super-solution test; boundary inequalities
/// depend on `c` and are checked once it is fixed.
pub(crate) fn check_interior_super(prob: &NonlinearProblem, m: &MetricData, u: &[f64]) -> Result<()> {
    let (ri, _) = residuals(prob, m, u);
    let g = &m.grid;
    let lu = m.flux(u);
    for i in 0..g.len() {
        if g.boundary_of[i].is_some() {
            continue;
        }
        let scale = 1.0 + (prob.diffusion * lu[i] / m.weights[i]).abs() + (prob.f)(i, u[i]).abs();
        if ri[i] < -super::VALIDATE_TOL * scale {
            return Err(Error::BoundsCheckFailed(format!(
                "interior super-solution residual {:e} at node {i}",
                ri[i]
            )));
        }
    }
    Ok(())
}
