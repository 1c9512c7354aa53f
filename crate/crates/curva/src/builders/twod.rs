use std::collections::BTreeMap;

use super::constant_value;
use super::negative::check_interior_super;
use crate::elliptic::{solve_linear_robin, Gauge, RobinProblem};
use crate::error::{Error, Result};
use crate::geometry::{gradient_norm, lq_norm, MetricData, ScalarField};
use crate::monotone::{residuals, NonlinearProblem};

fn need_surface(m: &MetricData) -> Result<()> {
    if m.n != 2 {
        return Err(Error::InvalidArgument(format!("builder needs n = 2, got {}", m.n)));
    }
    Ok(())
}

/// Super-solution `u₊ = -½ log w` for prescribed Gauss curvature `K`.
///
/// Needs constant `K_g < 0`; with `μ = -2K_g` it solves `-Δw + μw = F - δ`,
/// `∂_ν w = δ'` where `δ = A/(1 + 2μ)`, so that `w - 2δ` carries the data `F - A`
/// and the estimate gives `δ ≤ w ≤ 3δ`, `|∇w| ≤ δ`. `gamma` belongs to
/// `(-Δ + μ, ∂_ν)` in `L³`.
pub fn build_2d_supersolution(
    m: &MetricData,
    k: &[f64],
    f: &[f64],
    a_level: f64,
    gamma: f64,
) -> Result<(ScalarField, BTreeMap<String, f64>)> {
    need_surface(m)?;
    let g = &m.grid;
    if k.len() != g.len() || f.len() != g.len() {
        return Err(Error::InvalidArgument("prescribed data does not match the grid".into()));
    }
    let kg = constant_value(&m.bg_interior)
        .filter(|&x| x < 0.0)
        .ok_or_else(|| Error::Precondition("background Gauss curvature must be a negative constant".into()))?;
    if !(a_level > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument("level and gamma must be positive".into()));
    }
    let mu = -2.0 * kg;
    if let Some(i) = (0..g.len()).find(|&i| -2.0 * k[i] < f[i]) {
        return Err(Error::ConditionFailed(format!("-2K < F at node {i}")));
    }
    let denom = 1.0 + 2.0 * mu;
    let budget = a_level / (2.0 * gamma * denom);
    let dev: Vec<f64> = f.iter().map(|x| x - a_level).collect();
    let norm = lq_norm(&dev, m, 3.0);
    if norm > budget {
        return Err(Error::ConditionFailed(format!("‖F - A‖ = {norm:e} exceeds {budget:e}")));
    }
    let delta = a_level / denom;
    let delta_b = -delta / (2.0 * gamma * m.volume().powf(1.0 / 3.0));
    let prob = RobinProblem {
        a: 1.0,
        v: vec![mu; g.len()],
        b: vec![0.0; g.boundary.len()],
        f: f.iter().map(|x| x - delta).collect(),
        r: vec![delta_b; g.boundary.len()],
    };
    let w = solve_linear_robin(&prob, m, Gauge::Unique)?;
    let wmin = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let grad = gradient_norm(&w, m).into_iter().fold(0.0, f64::max);
    if wmin < delta || wmax > 3.0 * delta || grad > delta {
        return Err(Error::BoundsCheckFailed(format!(
            "w in [{wmin:e}, {wmax:e}], |∇w| ≤ {grad:e}; need [{delta:e}, {:e}] and {delta:e}",
            3.0 * delta
        )));
    }
    let u: Vec<f64> = w.iter().map(|x| -0.5 * x.ln()).collect();
    check_interior_super(&NonlinearProblem::gauss(m, k, &vec![0.0; g.boundary.len()]), m, &u)?;
    let mut c = BTreeMap::new();
    c.insert("delta".into(), delta);
    c.insert("delta_prime".into(), delta_b);
    c.insert("gamma".into(), gamma);
    c.insert("plateau_level".into(), a_level);
    c.insert("plateau_norm".into(), norm);
    c.insert("plateau_budget".into(), budget);
    Ok((u, c))
}

/// Sub-solution `u₋ = u₀ + C₁` with `-Δu₀ = ½`, `∂_ν u₀ = C = -Vol/(2|∂M|)`.
/// `C₁` starts at the largest integer keeping `u₋ ≤ u₊` and steps down by one
/// until the discrete sub-solution inequalities hold.
pub fn build_2d_subsolution(
    m: &MetricData,
    k: &[f64],
    sigma_target: &[f64],
    u_plus: &[f64],
) -> Result<(ScalarField, BTreeMap<String, f64>)> {
    need_surface(m)?;
    let g = &m.grid;
    if k.len() != g.len() || sigma_target.len() != g.boundary.len() || u_plus.len() != g.len() {
        return Err(Error::InvalidArgument("prescribed data does not match the grid".into()));
    }
    let c = -m.volume() / (2.0 * m.boundary_area());
    let prob = RobinProblem {
        a: 1.0,
        v: vec![0.0; g.len()],
        b: vec![0.0; g.boundary.len()],
        f: vec![0.5; g.len()],
        r: vec![c; g.boundary.len()],
    };
    let u0 = solve_linear_robin(&prob, m, Gauge::MeanZero)?;
    let gap = (0..g.len()).map(|i| u_plus[i] - u0[i]).fold(f64::INFINITY, f64::min);
    if !gap.is_finite() {
        return Err(Error::InvalidArgument("super-solution not finite".into()));
    }
    let nl = NonlinearProblem::gauss(m, k, sigma_target);
    let start = gap.floor();
    for step in 0..200 {
        let c1 = start - step as f64;
        let u: Vec<f64> = u0.iter().map(|x| x + c1).collect();
        let (ri, rb) = residuals(&nl, m, &u);
        let interior_ok = (0..g.len()).all(|i| g.boundary_of[i].is_some() || ri[i] <= 1e-9);
        if interior_ok && rb.iter().all(|&r| r <= 1e-9) {
            let mut consts = BTreeMap::new();
            consts.insert("C".into(), c);
            consts.insert("C1".into(), c1);
            return Ok((u, consts));
        }
    }
    Err(Error::NoShiftWorks(format!("no shift in [{}, {start}] gives a sub-solution", start - 199.0)))
}
