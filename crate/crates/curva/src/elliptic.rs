//! Linear Robin problems `-aΔu + Vu = f`, `∂_ν u + b u = r`, the principal
//! eigenpair of the same operator, and an empirical elliptic constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{gradient_norm, lq_norm, sup_norm, BoundaryField, MetricData, ScalarField};
use crate::linalg::{pcg, BandLu, Csr};

/// Above this many unknowns the direct solver gives way to CG.
pub const DIRECT_LIMIT: usize = 200_000;
pub const LINEAR_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RobinProblem {
    pub a: f64,
    pub v: ScalarField,
    pub b: BoundaryField,
    pub f: ScalarField,
    pub r: BoundaryField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Unique,
    /// Pure Neumann problems: return the solution with zero weighted mean.
    MeanZero,
}

fn check_coefficients(m: &MetricData, a: f64, v: &[f64], b: &[f64]) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("diffusion coefficient {a} must be positive")));
    }
    if v.len() != m.grid.len() || b.len() != m.grid.boundary.len() {
        return Err(Error::InvalidArgument("coefficient length mismatch".into()));
    }
    if v.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("coefficients must be finite".into()));
    }
    Ok(())
}

/// `K = a L + diag(W V) + diag(a S b) - shift W`.
pub fn assemble(m: &MetricData, a: f64, v: &[f64], b: &[f64], shift: f64) -> Csr {
    let grid = &m.grid;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let mut row = Vec::with_capacity(m.adj[i].len() + 1);
        let mut d = m.weights[i] * (v[i] - shift);
        for &(j, t) in &m.adj[i] {
            row.push((j, -a * t));
            d += a * t;
        }
        if let Some(bi) = grid.boundary_of[i] {
            d += a * m.bmeasure[bi] * b[bi];
        }
        row.push((i, d));
        rows.push(row);
    }
    Csr::from_rows(rows)
}

/// Right-hand side `W f + a S r`.
pub fn load(m: &MetricData, a: f64, f: &[f64], r: &[f64]) -> Vec<f64> {
    let mut rhs: Vec<f64> = f.iter().zip(&m.weights).map(|(x, w)| x * w).collect();
    for (bi, bn) in m.grid.boundary.iter().enumerate() {
        rhs[bn.node] += a * m.bmeasure[bi] * r[bi];
    }
    rhs
}

/// A factored operator reusable across many right-hand sides.
#[derive(Debug, Clone)]
pub struct Solver {
    matrix: Csr,
    lu: Option<BandLu>,
    norm_inf: f64,
}

impl Solver {
    pub fn new(matrix: Csr) -> Result<Solver> {
        let lu = if matrix.n <= DIRECT_LIMIT { Some(BandLu::factor(&matrix)?) } else { None };
        let norm_inf = (0..matrix.n).map(|i| matrix.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        Ok(Solver { matrix, lu, norm_inf })
    }

    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let x = match &self.lu {
            Some(lu) => {
                let mut x = lu.solve(rhs);
                // one step of iterative refinement
                let r: Vec<f64> = self.matrix.mul(&x).iter().zip(rhs).map(|(a, b)| b - a).collect();
                let dx = lu.solve(&r);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
                x
            }
            None => pcg(&self.matrix, rhs, LINEAR_TOL * 1e-2, 50 * self.matrix.n)?,
        };
        let ax = self.matrix.mul(&x);
        let res = ax.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // normwise backward error
        let scale = (self.norm_inf * sup_norm(&x) + sup_norm(rhs)).max(f64::MIN_POSITIVE);
        if !(res <= LINEAR_TOL * scale) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularOperator(format!("relative residual {:e} above tolerance", res / scale)));
        }
        Ok(x)
    }
}

pub fn solve_linear_robin(p: &RobinProblem, m: &MetricData, gauge: Gauge) -> Result<ScalarField> {
    check_coefficients(m, p.a, &p.v, &p.b)?;
    if p.f.len() != m.grid.len() || p.r.len() != m.grid.boundary.len() {
        return Err(Error::InvalidArgument("data length mismatch".into()));
    }
    if p.f.iter().chain(&p.r).any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("data must be finite".into()));
    }
    let pure_neumann = p.v.iter().all(|&x| x == 0.0) && p.b.iter().all(|&x| x == 0.0);
    let rhs = load(m, p.a, &p.f, &p.r);
    match gauge {
        Gauge::Unique => {
            if pure_neumann {
                return Err(Error::SingularOperator("pure Neumann problem with V = 0 has constants in its kernel".into()));
            }
            Solver::new(assemble(m, p.a, &p.v, &p.b, 0.0))?.solve(&rhs)
        }
        Gauge::MeanZero => {
            if !pure_neumann {
                return Err(Error::InvalidArgument("mean-zero gauge only applies to pure Neumann problems".into()));
            }
            let total: f64 = rhs.iter().sum();
            let scale: f64 = rhs.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            if total.abs() > 1e-9 * scale {
                return Err(Error::SingularOperator(format!(
                    "incompatible Neumann data: ∫f + a∮r = {total:e}"
                )));
            }
            let k = assemble(m, p.a, &p.v, &p.b, 0.0);
            let last = k.n - 1;
            let mut rows: Vec<Vec<(usize, f64)>> = (0..k.n).map(|i| k.row(i).collect()).collect();
            rows[last] = vec![(last, 1.0)];
            let mut rhs = rhs;
            rhs[last] = 0.0;
            let mut u = Solver::new(Csr::from_rows(rows))?.solve(&rhs)?;
            let mean = crate::geometry::integrate(&u, m) / m.volume();
            for x in u.iter_mut() {
                *x -= mean;
            }
            Ok(u)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub eta: f64,
    /// Positive, normalised to `max φ = 1`.
    pub phi: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

/// Principal eigenpair of `-aΔ + V` with `∂_ν φ + bφ = 0`, by shifted inverse
/// power iteration.
pub fn principal_eigenpair(m: &MetricData, a: f64, v: &[f64], b: &[f64]) -> Result<Eigenpair> {
    check_coefficients(m, a, v, b)?;
    let k = assemble(m, a, v, b, 0.0);
    let w = &m.weights;
    let n = k.n;
    let mut lower = f64::INFINITY;
    for i in 0..n {
        let mut d = 0.0;
        let mut off = 0.0;
        for (c, x) in k.row(i) {
            if c == i {
                d += x;
            } else {
                off += x.abs();
            }
        }
        lower = lower.min((d - off) / w[i]);
    }
    let shift = lower - 1.0;
    // pointwise residuals carry roundoff of order ε max K_ii / w_i
    let floor = 1e3 * f64::EPSILON * k.diag().iter().zip(w).map(|(d, wi)| d.abs() / wi).fold(0.0, f64::max);
    let shifted = assemble(m, a, v, b, shift);
    let solver = Solver::new(shifted)?;
    let mut x = vec![1.0; n];
    let mut eta_prev = f64::NAN;
    for it in 1..=20_000 {
        let wx: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
        let mut y = solver.solve(&wx)?;
        let norm = y.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::IterationDiverged("inverse iteration lost the iterate".into()));
        }
        let sign = if y.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        for yi in y.iter_mut() {
            *yi *= sign / norm;
        }
        let ky = k.mul(&y);
        let eta: f64 = ky.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ymax = sup_norm(&y);
        let residual = (0..n).map(|i| (ky[i] / w[i] - eta * y[i]).abs()).fold(0.0, f64::max) / ymax;
        let settled = (eta - eta_prev).abs() <= EIGEN_TOL * eta.abs().max(1.0);
        x = y;
        if settled && residual <= (EIGEN_RESIDUAL * eta.abs().max(1.0)).max(floor) {
            let phi: Vec<f64> = x.iter().map(|v| v / ymax).collect();
            let min = phi.iter().cloned().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(Error::IterationDiverged(format!("principal eigenfunction not positive (min {min:e})")));
            }
            return Ok(Eigenpair { eta, phi, iterations: it, residual });
        }
        eta_prev = eta;
    }
    Err(Error::IterationDiverged("inverse iteration did not converge".into()))
}

/// Eigenpair with Robin coefficient `b + κβ`, where `κ = 2/(p-2)` (1 in 2-D).
pub fn perturbed_eigenvalue(m: &MetricData, a: f64, v: &[f64], b: &[f64], beta: f64) -> Result<Eigenpair> {
    let k = crate::consts::robin_factor(m.n);
    let bb: Vec<f64> = b.iter().map(|x| x + k * beta).collect();
    principal_eigenpair(m, a, v, &bb)
}

/// Smooth random field on the grid, built from a handful of polar modes.
fn random_smooth(m: &MetricData, rng: &mut ChaCha8Rng) -> (ScalarField, BoundaryField, f64) {
    let g = &m.grid;
    let radial = g.kind.is_radial();
    let mmax = if radial { 0 } else { 3 };
    let mut modes = Vec::new();
    for l in 0..4 {
        for mm in 0..=mmax {
            modes.push((l as f64, mm as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)));
        }
    }
    let span = g.r_out - g.r_in;
    let f = g.eval(|_, _, r, t| {
        let rho = (r - g.r_in) / span;
        modes
            .iter()
            .map(|&(l, mm, c, ph)| {
                // angular modes need r^m near the centre to stay smooth
                let damp = if g.kind.has_center() { rho.powf(mm) } else { 1.0 };
                c * (std::f64::consts::PI * l * rho).cos() * (mm * t + ph).cos() * damp
            })
            .sum()
    });
    let mut bmodes = Vec::new();
    for mm in 0..=mmax {
        bmodes.push((mm as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-1.0..1.0)));
    }
    let r: Vec<f64> = g
        .boundary
        .iter()
        .map(|bn| {
            let t = g.nodes[bn.node].theta;
            bmodes
                .iter()
                .map(|&(mm, c, ph, ci)| if bn.outer { c } else { ci } * (mm * t + ph).cos())
                .sum()
        })
        .collect();
    // sup of the tangential derivative
    let mut dt: f64 = 0.0;
    for bn in &g.boundary {
        let t = g.nodes[bn.node].theta;
        let rr = g.nodes[bn.node].r;
        let d: f64 = bmodes
            .iter()
            .map(|&(mm, c, ph, ci)| -if bn.outer { c } else { ci } * mm * (mm * t + ph).sin())
            .sum();
        dt = dt.max((d / rr).abs());
    }
    (f, r, dt)
}

/// Empirical constant `γ` with `‖u‖_∞ + ‖∇u‖_∞ ≤ γ (‖f‖_q + ‖r‖)` for the
/// operator `(-aΔ + V, ∂_ν + b)`, where the boundary datum is measured by
/// `(sup|r| + sup|∂_τ r|) Vol^{1/q}`. Constant data are always probed; the
/// result is twice the worst observed ratio.
pub fn estimate_gamma(m: &MetricData, a: f64, v: &[f64], b: &[f64], q: f64, probes: usize, seed: u64) -> Result<f64> {
    check_coefficients(m, a, v, b)?;
    if probes == 0 {
        return Err(Error::InvalidArgument("estimate_gamma needs at least one probe".into()));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm exponent {q} must be >= 1")));
    }
    let solver = Solver::new(assemble(m, a, v, b, 0.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol_q = m.volume().powf(1.0 / q);
    let mut worst: f64 = 0.0;
    let n = m.grid.len();
    let nb = m.grid.boundary.len();
    let fixed = [(vec![1.0; n], vec![0.0; nb], 0.0), (vec![0.0; n], vec![1.0; nb], 0.0)];
    let random = (0..probes).map(|_| random_smooth(m, &mut rng)).collect::<Vec<_>>();
    for (f, r, dt) in fixed.into_iter().chain(random) {
        let u = solver.solve(&load(m, a, &f, &r))?;
        let lhs = sup_norm(&u) + sup_norm(&gradient_norm(&u, m));
        let rhs = lq_norm(&f, m, q) + (sup_norm(&r) + dt) * vol_q;
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    Ok(2.0 * worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec};

    #[test]
    fn neumann_without_potential_is_singular() {
        let (g, m) = build_domain(&DomainSpec::disk(1.0, 16, 16)).unwrap();
        let p = RobinProblem {
            a: 1.0,
            v: vec![0.0; g.len()],
            b: vec![0.0; g.boundary.len()],
            f: vec![1.0; g.len()],
            r: vec![0.0; g.boundary.len()],
        };
        assert!(matches!(solve_linear_robin(&p, &m, Gauge::Unique), Err(Error::SingularOperator(_))));
    }

    #[test]
    fn mean_zero_gauge_solves_compatible_neumann() {
        let (g, m) = build_domain(&DomainSpec::disk(1.0, 24, 16)).unwrap();
        // -Δu = 1, ∂u = -1/2 on the unit disk: u = -r²/4 + const
        let p = RobinProblem {
            a: 1.0,
            v: vec![0.0; g.len()],
            b: vec![0.0; g.boundary.len()],
            f: vec![1.0; g.len()],
            r: vec![-0.5; g.boundary.len()],
        };
        let u = solve_linear_robin(&p, &m, Gauge::MeanZero).unwrap();
        let mut exact: Vec<f64> = g.eval(|_, _, r, _| -r * r / 4.0);
        let mean = crate::geometry::integrate(&exact, &m) / m.volume();
        exact.iter_mut().for_each(|x| *x -= mean);
        for i in 0..g.len() {
            assert!((u[i] - exact[i]).abs() < 1e-9, "node {i}: {} vs {}", u[i], exact[i]);
        }
        let bad = RobinProblem { r: vec![0.0; g.boundary.len()], ..p };
        assert!(matches!(solve_linear_robin(&bad, &m, Gauge::MeanZero), Err(Error::SingularOperator(_))));
    }

    #[test]
    fn gamma_requires_probes() {
        let (g, m) = build_domain(&DomainSpec::disk(1.0, 16, 16)).unwrap();
        let r = estimate_gamma(&m, 1.0, &vec![1.0; g.len()], &vec![0.0; g.boundary.len()], 3.0, 0, 1);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
