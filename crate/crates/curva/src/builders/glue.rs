use super::negative::EigenSub;
use super::{pow2, Provenance, SubSuperPair};
use crate::consts;
use crate::elliptic::perturbed_eigenvalue;
use crate::error::{Error, Result};
use crate::geometry::MetricData;
use crate::monotone::{residuals, NonlinearProblem};

/// `u₊ = δφ` for a positive first eigenvalue: `φ` is the eigenfunction with
/// Robin coefficient lowered by `κ|β|` (`β < 0`) and `δ = 2^{-k}` the largest scaling
/// that passes `η inf φ ≥ δ^{p-2} sup S sup φ^{p-1}` and the boundary inequality.
pub fn positive_supersolution(m: &MetricData, s: &[f64], h_target: &[f64], beta: f64) -> Result<EigenSub> {
    if m.n < 3 {
        return Err(Error::InvalidArgument("builder needs n >= 3".into()));
    }
    if s.len() != m.grid.len() || h_target.len() != m.grid.boundary.len() {
        return Err(Error::InvalidArgument("prescribed data does not match the grid".into()));
    }
    if !(beta < 0.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} must be negative")));
    }
    let n = m.n;
    let p = consts::p(n);
    let kf = consts::robin_factor(n);
    let b: Vec<f64> = m.bg_boundary.iter().map(|h| kf * h).collect();
    let ep = perturbed_eigenvalue(m, consts::a(n), &m.bg_interior, &b, beta)?;
    if ep.eta <= 0.0 {
        return Err(Error::NotApplicable(format!("perturbed eigenvalue {} is not positive", ep.eta)));
    }
    let phi = ep.phi;
    let inf_phi = phi.iter().cloned().fold(f64::INFINITY, f64::min);
    let sup_s = s.iter().cloned().fold(0.0, f64::max);
    let prob = NonlinearProblem::yamabe(m, s, h_target);
    for k in 0..=200 {
        let delta = pow2(-k);
        if ep.eta * inf_phi < delta.powf(p - 2.0) * sup_s {
            continue;
        }
        let ok_boundary = m.grid.boundary.iter().enumerate().all(|(bi, bn)| {
            let x = delta * phi[bn.node];
            -beta * x >= h_target[bi] * x.powf(p / 2.0)
        });
        if !ok_boundary {
            continue;
        }
        let field: Vec<f64> = phi.iter().map(|x| delta * x).collect();
        let (ri, rb) = residuals(&prob, m, &field);
        let tol = 1e-8 * (1.0 + ep.eta);
        if ri.iter().chain(&rb).all(|&r| r >= -tol) {
            return Ok(EigenSub { field, delta, eta: ep.eta, beta });
        }
    }
    Err(Error::NotApplicable("no power-of-two scaling of the eigenfunction is a super-solution".into()))
}

/// Pairs the local Dirichlet solution (extended by zero) with `u₊ = δφ`,
/// scaling `u₀` by `t = 2^{-k}`, `k = 0..=40`, until `t u₀ ≤ u₊`.
pub fn glue_positive_pair(u0: &[f64], u_plus: &[f64], n: usize) -> Result<SubSuperPair> {
    if u0.len() != u_plus.len() {
        return Err(Error::InvalidArgument("field lengths differ".into()));
    }
    for k in 0..=40 {
        let t = pow2(-k);
        if (0..u0.len()).all(|i| t * u0[i] <= u_plus[i]) {
            let um: Vec<f64> = u0.iter().map(|x| t * x).collect();
            return Ok(SubSuperPair::new(um, u_plus.to_vec(), Provenance::GluedPositiveCase, n)?.with_constant("t", t));
        }
    }
    Err(Error::CannotOrder("no t = 2^-k, k <= 40, puts t u0 below u+".into()))
}
