use crate::consts;
use crate::elliptic::Solver;
use crate::error::{Error, Result};
use crate::geometry::{MetricData, ScalarField};
use crate::linalg::Csr;

#[derive(Debug, Clone)]
pub struct LocalDirichlet {
    /// Solution on `Ω`, zero elsewhere.
    pub u0: ScalarField,
    /// Lagrange multiplier of the constrained minimisation.
    pub multiplier: f64,
    /// Sup of the nodal residual `-aΔu + R_g u - S u^{p-1}` over `Ω`.
    pub residual: f64,
    pub descent_steps: usize,
    pub newton_steps: usize,
}

const DESCENT_STEP: f64 = 0.5;
const DESCENT_TOL: f64 = 1e-7;
const RESIDUAL_TOL: f64 = 1e-8;

/// Positive solution of `-aΔu + R_g u = S u^{p-1}` in `Ω`, `u = 0` off `Ω`.
///
/// Minimises `a∫|∇v|² + ∫R_g v²` over `∫S v^p = 1` by a preconditioned
/// projected gradient flow, rescales by the multiplier, then polishes with Newton.
pub fn solve_local_dirichlet(m: &MetricData, s: &[f64], mask: &[bool]) -> Result<LocalDirichlet> {
    let g = &m.grid;
    if m.n < 3 {
        return Err(Error::InvalidArgument("local Dirichlet problem needs n >= 3".into()));
    }
    if s.len() != g.len() || mask.len() != g.len() {
        return Err(Error::InvalidArgument("data does not match the grid".into()));
    }
    let ids: Vec<usize> = (0..g.len()).filter(|&i| mask[i]).collect();
    if ids.is_empty() {
        return Err(Error::InvalidArgument("empty subdomain".into()));
    }
    if let Some(&i) = ids.iter().find(|&&i| g.boundary_of[i].is_some()) {
        return Err(Error::InvalidArgument(format!("subdomain touches the boundary at node {i}")));
    }
    if let Some(&i) = ids.iter().find(|&&i| !(s[i] > 0.0)) {
        return Err(Error::Precondition(format!("S = {} is not positive at node {i} of the subdomain", s[i])));
    }
    let n = m.n;
    let a = consts::a(n);
    let p = consts::p(n);
    let mut local = vec![usize::MAX; g.len()];
    for (k, &i) in ids.iter().enumerate() {
        local[i] = k;
    }
    let rows: Vec<Vec<(usize, f64)>> = ids
        .iter()
        .map(|&i| {
            let mut row = vec![(local[i], m.weights[i] * m.bg_interior[i])];
            for &(j, t) in &m.adj[i] {
                row.push((local[i], a * t));
                if local[j] != usize::MAX {
                    row.push((local[j], -a * t));
                }
            }
            row
        })
        .collect();
    let k = Csr::from_rows(rows);
    let solver = Solver::new(k.clone())?;
    let w: Vec<f64> = ids.iter().map(|&i| m.weights[i]).collect();
    let sl: Vec<f64> = ids.iter().map(|&i| s[i]).collect();
    let dim = ids.len();
    let constraint = |v: &[f64]| (0..dim).map(|i| w[i] * sl[i] * v[i].max(0.0).powf(p)).sum::<f64>();
    let normalise = |v: &mut Vec<f64>| -> Result<()> {
        let c = constraint(v);
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::MinimizerDegenerate("iterate collapsed to zero".into()));
        }
        let f = c.powf(-1.0 / p);
        v.iter_mut().for_each(|x| *x = x.max(0.0) * f);
        Ok(())
    };
    let quotient = |v: &[f64]| k.mul(v).iter().zip(v).map(|(a, b)| a * b).sum::<f64>();

    let mut v = vec![1.0; dim];
    normalise(&mut v)?;
    let mut descent_steps = 0;
    for it in 1..=2000 {
        descent_steps = it;
        let mu = quotient(&v);
        let rhs: Vec<f64> = (0..dim).map(|i| w[i] * sl[i] * v[i].powf(p - 1.0)).collect();
        let gsol = solver.solve(&rhs)?;
        let mut next: Vec<f64> =
            (0..dim).map(|i| (1.0 - DESCENT_STEP) * v[i] + DESCENT_STEP * mu * gsol[i]).collect();
        normalise(&mut next)?;
        let vmax = next.iter().cloned().fold(0.0, f64::max);
        let change = (0..dim).map(|i| (next[i] - v[i]).abs()).fold(0.0, f64::max) / vmax;
        v = next;
        if change < DESCENT_TOL {
            break;
        }
    }
    let mu = quotient(&v);
    if !(mu > 0.0) {
        return Err(Error::MinimizerDegenerate(format!("multiplier {mu:e} is not positive")));
    }
    let mut u: Vec<f64> = v.iter().map(|x| mu.powf(1.0 / (p - 2.0)) * x).collect();

    let residual_of = |u: &[f64]| -> Vec<f64> {
        let ku = k.mul(u);
        (0..dim).map(|i| ku[i] - w[i] * sl[i] * u[i].max(0.0).powf(p - 1.0)).collect()
    };
    let nodal = |r: &[f64]| (0..dim).map(|i| (r[i] / w[i]).abs()).fold(0.0, f64::max);
    let mut r = residual_of(&u);
    let mut newton_steps = 0;
    while nodal(&r) > 1e-3 * RESIDUAL_TOL && newton_steps < 50 {
        newton_steps += 1;
        let mut rows: Vec<Vec<(usize, f64)>> = (0..dim).map(|i| k.row(i).collect()).collect();
        for i in 0..dim {
            rows[i].push((i, -w[i] * sl[i] * (p - 1.0) * u[i].max(0.0).powf(p - 2.0)));
        }
        let jac = Solver::new(Csr::from_rows(rows))?;
        let du = jac.solve(&r)?;
        let before = nodal(&r);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = (0..dim).map(|i| u[i] - step * du[i]).collect();
            let rt = residual_of(&trial);
            if nodal(&rt) < before || step < 1e-4 {
                u = trial;
                r = rt;
                break;
            }
            step *= 0.5;
        }
    }
    let residual = nodal(&r);
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(umax > 1e-12) || !(umin > 0.0) {
        return Err(Error::MinimizerDegenerate(format!("solution range [{umin:e}, {umax:e}] on the subdomain")));
    }
    if residual > RESIDUAL_TOL * umax.powf(p - 1.0).max(1.0) {
        return Err(Error::IterationDiverged(format!("local Dirichlet residual {residual:e}")));
    }
    let mut u0 = vec![0.0; g.len()];
    for (kk, &i) in ids.iter().enumerate() {
        u0[i] = u[kk];
    }
    Ok(LocalDirichlet { u0, multiplier: mu, residual, descent_steps, newton_steps })
}
