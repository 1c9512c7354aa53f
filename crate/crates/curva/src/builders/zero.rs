use super::validate::field_status;
use super::{Provenance, SubSuperPair};
use crate::consts;
use crate::elliptic::{solve_linear_robin, Gauge, RobinProblem};
use crate::error::{Error, Result};
use crate::geometry::{MetricData, ScalarField};
use crate::monotone::NonlinearProblem;

/// Share of the defect carried by the interior equation.
pub const ZERO_SPLIT: f64 = 0.5;

/// `u = m + v_m`, where `v_m` solves the Neumann problem with the nonlinear
/// terms frozen at the constant `m`. The defect `Φ(m) = ∫F(m) + a∫G(m)` is
/// removed from the data, `τΦ/Vol` from the interior and `(1-τ)Φ/(a|∂M|)` from
/// the boundary, so `u` is a super-solution when `Φ(m) < 0` and a sub-solution
/// when `Φ(m) > 0`, up to terms quadratic in `v_m`.
fn perturbed_constant(p: &NonlinearProblem, m: &MetricData, mass: f64) -> Result<(ScalarField, f64)> {
    let g = &m.grid;
    let a = p.diffusion;
    let f0: Vec<f64> = (0..g.len()).map(|i| (p.f)(i, mass)).collect();
    let g0: Vec<f64> = (0..g.boundary.len()).map(|b| (p.g)(b, mass)).collect();
    let defect: f64 = f0.iter().zip(&m.weights).map(|(f, w)| f * w).sum::<f64>()
        + a * g0.iter().zip(&m.bmeasure).map(|(x, s)| x * s).sum::<f64>();
    let fi = ZERO_SPLIT * defect / m.volume();
    let fb = (1.0 - ZERO_SPLIT) * defect / (a * m.boundary_area());
    let prob = RobinProblem {
        a,
        v: vec![0.0; g.len()],
        b: vec![0.0; g.boundary.len()],
        f: f0.iter().map(|x| x - fi).collect(),
        r: g0.iter().map(|x| x - fb).collect(),
    };
    let v = solve_linear_robin(&prob, m, Gauge::MeanZero)?;
    Ok((v.iter().map(|x| mass + x).collect(), defect))
}

/// Bracket for the zero case: sub- and super-solutions from the family above,
/// with masses `2^{k/4}`, `k = -80..=40`, accepting the first ordered pair.
pub fn zero_case_pair(m: &MetricData, s: &[f64], h_target: &[f64]) -> Result<SubSuperPair> {
    let g = &m.grid;
    if m.n < 3 {
        return Err(Error::InvalidArgument("zero case builder needs n >= 3".into()));
    }
    if s.len() != g.len() || h_target.len() != g.boundary.len() {
        return Err(Error::InvalidArgument("prescribed data does not match the grid".into()));
    }
    let p = NonlinearProblem::yamabe(m, s, h_target);
    let mut subs: Vec<(f64, ScalarField)> = Vec::new();
    let mut supers: Vec<(f64, ScalarField)> = Vec::new();
    for k in -80..=40 {
        let mass = 2f64.powf(k as f64 / 4.0);
        let (u, defect) = perturbed_constant(&p, m, mass)?;
        if u.iter().any(|&x| x <= 0.0) {
            continue;
        }
        // tiny fields pass both tests within tolerance, the defect sign decides
        let (is_sub, is_super) = field_status(&p, m, &u);
        if is_sub && defect > 0.0 {
            subs.push((mass, u));
        } else if is_super && defect < 0.0 {
            supers.push((mass, u));
        }
    }
    for (mp, up) in &supers {
        for (mm, um) in subs.iter().rev() {
            if mm < mp && (0..g.len()).all(|i| um[i] <= up[i]) {
                let pair = SubSuperPair::new(um.clone(), up.clone(), Provenance::ZeroCasePerturbation, m.n)?
                    .with_constant("mass_minus", *mm)
                    .with_constant("mass_plus", *mp)
                    .with_constant("split", ZERO_SPLIT)
                    .with_constant("p", consts::p(m.n));
                return Ok(pair);
            }
        }
    }
    Err(Error::CannotOrder(format!(
        "{} sub- and {} super-solution candidates, none ordered",
        subs.len(),
        supers.len()
    )))
}
