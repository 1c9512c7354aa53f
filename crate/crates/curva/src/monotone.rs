//! Monotone iteration for `-d Δu = F(x, u)`, `∂_ν u + σu = G(x, u)`.

use std::sync::Arc;

use crate::builders::SubSuperPair;
use crate::consts;
use crate::elliptic::{assemble, load, Solver, LINEAR_TOL};
use crate::error::{Error, Result};
use crate::geometry::{MetricData, ScalarField};

pub type NodeFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// `F` and `∂F/∂u` are indexed by node, `G` and `∂G/∂u` by boundary node.
#[derive(Clone)]
pub struct NonlinearProblem {
    pub diffusion: f64,
    pub sigma: f64,
    pub f: NodeFn,
    pub df: NodeFn,
    pub g: NodeFn,
    pub dg: NodeFn,
}

impl std::fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearProblem").field("diffusion", &self.diffusion).field("sigma", &self.sigma).finish()
    }
}

impl NonlinearProblem {
    /// `-aΔu + R_g u = S u^{p-1}`, `∂_ν u + κ h_g u = κ H u^{p/2}` with `κ = 2/(p-2)`.
    /// Background curvatures come from the metric; `h_target` already carries any scaling.
    pub fn yamabe(m: &MetricData, s: &[f64], h_target: &[f64]) -> NonlinearProblem {
        let n = m.n;
        let p = consts::p(n);
        let k = consts::robin_factor(n);
        let r = Arc::new(m.bg_interior.clone());
        let hb = Arc::new(m.bg_boundary.clone());
        let s = Arc::new(s.to_vec());
        let hh = Arc::new(h_target.to_vec());
        let (r1, s1, r2, s2) = (r.clone(), s.clone(), r, s);
        let (hb1, hh1, hb2, hh2) = (hb.clone(), hh.clone(), hb, hh);
        NonlinearProblem {
            diffusion: consts::a(n),
            sigma: 0.0,
            f: Arc::new(move |i, u| -r1[i] * u + s1[i] * consts::spow(u, p - 1.0)),
            df: Arc::new(move |i, u| -r2[i] + (p - 1.0) * s2[i] * consts::spow(u, p - 2.0)),
            g: Arc::new(move |b, u| -k * hb1[b] * u + k * hh1[b] * consts::spow(u, p / 2.0)),
            dg: Arc::new(move |b, u| -k * hb2[b] + k * hh2[b] * (p / 2.0) * consts::spow(u, p / 2.0 - 1.0)),
        }
    }

    /// `-Δu + K_g = K e^{2u}`, `∂_ν u + σ_g = σ e^u`.
    pub fn gauss(m: &MetricData, k: &[f64], sigma_target: &[f64]) -> NonlinearProblem {
        let kg = Arc::new(m.bg_interior.clone());
        let sg = Arc::new(m.bg_boundary.clone());
        let k = Arc::new(k.to_vec());
        let st = Arc::new(sigma_target.to_vec());
        let (k1, k2) = (k.clone(), k);
        let (st1, st2) = (st.clone(), st);
        NonlinearProblem {
            diffusion: 1.0,
            sigma: 0.0,
            f: Arc::new(move |i, u| k1[i] * (2.0 * u).exp() - kg[i]),
            df: Arc::new(move |i, u| 2.0 * k2[i] * (2.0 * u).exp()),
            g: Arc::new(move |b, u| st1[b] * u.exp() - sg[b]),
            dg: Arc::new(move |b, u| st2[b] * u.exp()),
        }
    }
}

/// Nodal residuals in the solver's flux discretisation.
///
/// Interior: `-dΔu - F(u)`. Boundary: `∂_ν u + σu - G(u)` with the normal
/// derivative read off the boundary control volume. A super-solution has both
/// non-negative, a sub-solution both non-positive.
pub fn residuals(p: &NonlinearProblem, m: &MetricData, u: &[f64]) -> (ScalarField, Vec<f64>) {
    let grid = &m.grid;
    let lu = m.flux(u);
    let d = p.diffusion;
    let mut interior = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if grid.boundary_of[i].is_none() {
            interior[i] = d * lu[i] / m.weights[i] - (p.f)(i, u[i]);
        }
    }
    let boundary = grid
        .boundary
        .iter()
        .enumerate()
        .map(|(b, bn)| {
            let i = bn.node;
            (d * lu[i] - m.weights[i] * (p.f)(i, u[i])) / (d * m.bmeasure[b]) + p.sigma * u[i] - (p.g)(b, u[i])
        })
        .collect();
    (interior, boundary)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d1: f64,
    /// Sup of `|∂G/∂u|` over the bracket; stands in for the gradient bound.
    pub d2: f64,
}

pub const MARGIN: f64 = 1.1;
pub const A_FLOOR: f64 = 1e-6;
pub const SAMPLES: usize = 256;

pub fn derive_iteration_constants(
    p: &NonlinearProblem,
    m: &MetricData,
    u_minus: &[f64],
    u_plus: &[f64],
) -> Result<IterationConstants> {
    if let Some(i) = (0..u_minus.len()).find(|&i| u_minus[i] > u_plus[i] + 1e-12) {
        return Err(Error::BracketViolation(format!(
            "u- exceeds u+ at node {i} by {:e}",
            u_minus[i] - u_plus[i]
        )));
    }
    let lo = u_minus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u_plus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let samples: Vec<f64> = (0..SAMPLES).map(|k| lo + (hi - lo) * k as f64 / (SAMPLES - 1) as f64).collect();
    let mut amax = f64::NEG_INFINITY;
    let mut c: f64 = 0.0;
    for i in 0..m.grid.len() {
        for &u in &samples {
            amax = amax.max(-(p.df)(i, u));
            c = c.max((p.f)(i, u).abs());
        }
    }
    let mut bmax = f64::NEG_INFINITY;
    let mut d1: f64 = 0.0;
    let mut d2: f64 = 0.0;
    for b in 0..m.grid.boundary.len() {
        for &u in &samples {
            let dg = (p.dg)(b, u);
            bmax = bmax.max(p.sigma - dg);
            d1 = d1.max((p.g)(b, u).abs());
            d2 = d2.max(dg.abs());
        }
    }
    if !(amax.is_finite() && bmax.is_finite() && c.is_finite() && d1.is_finite()) {
        return Err(Error::InvalidArgument("nonlinearity not finite on the bracket range".into()));
    }
    Ok(IterationConstants {
        a: (MARGIN * amax).max(A_FLOOR),
        b: (MARGIN * bmax).max(0.0),
        c,
        d1,
        d2,
    })
}

impl IterationConstants {
    /// Left-hand side of the second smallness inequality, for a supplied
    /// elliptic constant. Advisory only.
    pub fn smallness_lhs(&self, sigma: f64, gamma: f64, vol: f64, q: f64, umax: f64) -> f64 {
        let vq = vol.powf(1.0 / q);
        let inner = gamma * ((self.a * umax + self.c) * vq + 1.0);
        (self.b - sigma) * inner + self.d1 * vq + self.d2 * inner
    }
}

/// The factored iteration operator `(-dΔ + A, ∂_ν + B)`.
pub struct SchemeOperator<'a> {
    p: &'a NonlinearProblem,
    m: &'a MetricData,
    consts: IterationConstants,
    solver: Solver,
}

impl<'a> SchemeOperator<'a> {
    pub fn new(p: &'a NonlinearProblem, m: &'a MetricData, consts: IterationConstants) -> Result<Self> {
        let n = m.grid.len();
        let nb = m.grid.boundary.len();
        let k = assemble(m, p.diffusion, &vec![consts.a; n], &vec![consts.b; nb], 0.0);
        Ok(SchemeOperator { p, m, consts, solver: Solver::new(k)? })
    }

    pub fn step(&self, u_prev: &[f64]) -> Result<ScalarField> {
        let (p, m, c) = (self.p, self.m, &self.consts);
        if u_prev.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("iterate not finite".into()));
        }
        let f: Vec<f64> = (0..m.grid.len()).map(|i| c.a * u_prev[i] + (p.f)(i, u_prev[i])).collect();
        let r: Vec<f64> = m
            .grid
            .boundary
            .iter()
            .enumerate()
            .map(|(b, bn)| {
                let u = u_prev[bn.node];
                (c.b - p.sigma) * u + (p.g)(b, u)
            })
            .collect();
        self.solver.solve(&load(m, p.diffusion, &f, &r))
    }
}

pub fn iterate_once(
    p: &NonlinearProblem,
    m: &MetricData,
    consts: IterationConstants,
    u_prev: &[f64],
) -> Result<ScalarField> {
    SchemeOperator::new(p, m, consts)?.step(u_prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub increment: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub res_interior: f64,
    pub res_boundary: f64,
    /// Largest increase `max(u_k - u_{k-1})`, zero when the step decreased everywhere.
    pub mono_violation: f64,
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub steps: Vec<StepRecord>,
    pub converged: bool,
    pub solution: ScalarField,
    pub constants: IterationConstants,
    pub final_res_interior: f64,
    pub final_res_boundary: f64,
}

fn sup_residuals(p: &NonlinearProblem, m: &MetricData, u: &[f64]) -> (f64, f64) {
    let (ri, rb) = residuals(p, m, u);
    (
        ri.iter().fold(0.0, |a: f64, x| a.max(x.abs())),
        rb.iter().fold(0.0, |a: f64, x| a.max(x.abs())),
    )
}

pub fn run_scheme(
    p: &NonlinearProblem,
    m: &MetricData,
    pair: &SubSuperPair,
    tol: f64,
    max_iter: usize,
) -> Result<IterationTrace> {
    let consts = derive_iteration_constants(p, m, &pair.u_minus, &pair.u_plus)?;
    run_scheme_with(p, m, pair, consts, tol, max_iter)
}

pub fn run_scheme_with(
    p: &NonlinearProblem,
    m: &MetricData,
    pair: &SubSuperPair,
    consts: IterationConstants,
    tol: f64,
    max_iter: usize,
) -> Result<IterationTrace> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument("tolerance and iteration budget must be positive".into()));
    }
    let it = SchemeOperator::new(p, m, consts)?;
    let mut u = pair.u_plus.clone();
    let mut steps = Vec::new();
    for k in 1..=max_iter {
        let next = it.step(&u)?;
        let scale = u.iter().fold(1.0, |a: f64, x| a.max(x.abs()));
        let mut increment: f64 = 0.0;
        let mut rise: f64 = 0.0;
        let mut escape: f64 = 0.0;
        for i in 0..u.len() {
            let d = next[i] - u[i];
            increment = increment.max(d.abs());
            rise = rise.max(d);
            escape = escape.max(pair.u_minus[i] - next[i]).max(next[i] - pair.u_plus[i]);
        }
        let (ri, rb) = sup_residuals(p, m, &next);
        let min_u = next.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_u = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        steps.push(StepRecord { k, increment, min_u, max_u, res_interior: ri, res_boundary: rb, mono_violation: rise });
        if rise > 10.0 * LINEAR_TOL * scale {
            return Err(Error::MonotonicityBroken { step: k, magnitude: rise });
        }
        if escape > 10.0 * tol {
            return Err(Error::BracketEscape { step: k, magnitude: escape });
        }
        u = next;
        if increment < tol {
            return Ok(IterationTrace {
                steps,
                converged: true,
                solution: u,
                constants: consts,
                final_res_interior: ri,
                final_res_boundary: rb,
            });
        }
    }
    Err(Error::MaxIterExceeded { iters: max_iter, increment: steps.last().map(|s| s.increment).unwrap_or(f64::NAN) })
}
