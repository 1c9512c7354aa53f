//! Polar and radial grids, vertex-centred finite volumes, conformal metrics.
//!
//! Every node owns a control volume `W_i`; neighbours are coupled through face
//! transmissibilities `T_ij` and boundary nodes carry a face measure `S_i`.
//! The discrete Laplacian is `(Δu)_i = (Σ_j T_ij (u_j - u_i) + S_i ∂_ν u_i) / W_i`,
//! which makes it symmetric with respect to the weights and exact on
//! quadratics away from the centre.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consts;
use crate::error::{Error, Result};

pub type ScalarField = Vec<f64>;
pub type BoundaryField = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Disk2D,
    Annulus2D,
    RadialBall { n: usize },
    RadialAnnulus { n: usize },
}

impl DomainKind {
    pub fn dim(&self) -> usize {
        match self {
            DomainKind::Disk2D | DomainKind::Annulus2D => 2,
            DomainKind::RadialBall { n } | DomainKind::RadialAnnulus { n } => *n,
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, DomainKind::RadialBall { .. } | DomainKind::RadialAnnulus { .. })
    }

    pub fn has_center(&self) -> bool {
        matches!(self, DomainKind::Disk2D | DomainKind::RadialBall { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseMetric {
    Euclidean,
    /// Nodal conformal data `v`: `g = e^{2v} g_E` for n = 2, `g = v^{p-2} g_E` otherwise.
    ExplicitConformal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub r_in: f64,
    pub r_out: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub base: BaseMetric,
}

impl DomainSpec {
    pub fn disk(r: f64, n_r: usize, n_theta: usize) -> Self {
        DomainSpec { kind: DomainKind::Disk2D, r_in: 0.0, r_out: r, n_r, n_theta, base: BaseMetric::Euclidean }
    }

    pub fn annulus(r_in: f64, r_out: f64, n_r: usize, n_theta: usize) -> Self {
        DomainSpec { kind: DomainKind::Annulus2D, r_in, r_out, n_r, n_theta, base: BaseMetric::Euclidean }
    }

    pub fn ball(n: usize, r: f64, n_r: usize) -> Self {
        DomainSpec { kind: DomainKind::RadialBall { n }, r_in: 0.0, r_out: r, n_r, n_theta: 1, base: BaseMetric::Euclidean }
    }

    pub fn radial_annulus(n: usize, r_in: f64, r_out: f64, n_r: usize) -> Self {
        DomainSpec { kind: DomainKind::RadialAnnulus { n }, r_in, r_out, n_r, n_theta: 1, base: BaseMetric::Euclidean }
    }

    pub fn with_base(mut self, base: BaseMetric) -> Self {
        self.base = base;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub ring: usize,
    pub j: usize,
    pub r: f64,
    pub theta: f64,
}

impl Node {
    pub fn x(&self) -> f64 {
        self.r * self.theta.cos()
    }
    pub fn y(&self) -> f64 {
        self.r * self.theta.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    pub outer: bool,
    /// Euclidean face measure.
    pub measure: f64,
}

/// Euclidean grid geometry.
#[derive(Debug, Clone)]
pub struct Grid {
    pub kind: DomainKind,
    pub r_in: f64,
    pub r_out: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub h: f64,
    pub dtheta: f64,
    pub nodes: Vec<Node>,
    pub weights: Vec<f64>,
    /// Symmetric face couplings `(i, j, T_ij)` with `i < j`.
    pub links: Vec<(usize, usize, f64)>,
    pub boundary: Vec<BoundaryNode>,
    pub boundary_of: Vec<Option<usize>>,
}

fn unit_sphere_area(n: usize) -> f64 {
    // |S^{n-1}| = 2 π^{n/2} / Γ(n/2)
    let half = n as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_half_integer(n)
}

/// Γ(n/2) for positive integers n.
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary_of[i].is_some()
    }

    pub fn ring_radius(&self, ring: usize) -> f64 {
        self.r_in + ring as f64 * self.h
    }

    /// Node count on a ring.
    pub fn ring_len(&self, ring: usize) -> usize {
        if self.kind.has_center() && ring == 0 {
            1
        } else {
            self.n_theta
        }
    }

    pub fn index(&self, ring: usize, j: usize) -> usize {
        if self.kind.has_center() {
            if ring == 0 {
                0
            } else {
                1 + (ring - 1) * self.n_theta + j % self.n_theta
            }
        } else {
            ring * self.n_theta + j % self.n_theta
        }
    }

    /// Bandwidth of the coupling graph in node order.
    pub fn bandwidth(&self) -> usize {
        self.links.iter().map(|&(i, j, _)| j - i).max().unwrap_or(0)
    }

    fn build(spec: &DomainSpec) -> Result<Grid> {
        let kind = spec.kind;
        let n = kind.dim();
        if n < 2 {
            return Err(Error::InvalidDomain(format!("dimension {n} < 2")));
        }
        if !(spec.r_out.is_finite() && spec.r_out > 0.0) {
            return Err(Error::InvalidDomain(format!("outer radius {} must be positive", spec.r_out)));
        }
        match kind {
            DomainKind::Disk2D | DomainKind::RadialBall { .. } => {
                if spec.r_in != 0.0 {
                    return Err(Error::InvalidDomain("inner radius must be 0 for a ball".into()));
                }
            }
            _ => {
                if !(spec.r_in > 0.0 && spec.r_in < spec.r_out) {
                    return Err(Error::InvalidDomain(format!(
                        "annulus needs 0 < r_in < r_out, got {} and {}",
                        spec.r_in, spec.r_out
                    )));
                }
            }
        }
        if spec.n_r < 8 {
            return Err(Error::InvalidDomain(format!("n_r = {} too small (need >= 8)", spec.n_r)));
        }
        let n_theta = if kind.is_radial() {
            if spec.n_theta > 1 {
                return Err(Error::InvalidDomain("radial domains carry no angular nodes".into()));
            }
            1
        } else {
            if spec.n_theta < 8 {
                return Err(Error::InvalidDomain(format!("n_theta = {} too small (need >= 8)", spec.n_theta)));
            }
            spec.n_theta
        };
        let n_r = spec.n_r;
        let h = (spec.r_out - spec.r_in) / (n_r - 1) as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let mut g = Grid {
            kind,
            r_in: spec.r_in,
            r_out: spec.r_out,
            n_r,
            n_theta,
            h,
            dtheta,
            nodes: Vec::new(),
            weights: Vec::new(),
            links: Vec::new(),
            boundary: Vec::new(),
            boundary_of: Vec::new(),
        };
        for ring in 0..n_r {
            let r = g.ring_radius(ring);
            for j in 0..g.ring_len(ring) {
                g.nodes.push(Node { ring, j, r, theta: if r == 0.0 { 0.0 } else { j as f64 * dtheta } });
            }
        }
        let nn = g.nodes.len();
        g.boundary_of = vec![None; nn];
        let last = n_r - 1;
        let has_inner_boundary = !kind.has_center();

        if kind.is_radial() {
            let omega = unit_sphere_area(n);
            let vol = |a: f64, b: f64| omega * (b.powi(n as i32) - a.powi(n as i32)) / n as f64;
            for ring in 0..n_r {
                let r = g.ring_radius(ring);
                let lo = if ring == 0 { r } else { r - h / 2.0 };
                let hi = if ring == last { r } else { r + h / 2.0 };
                g.weights.push(vol(lo, hi));
            }
            for ring in 0..last {
                let rf = g.ring_radius(ring) + h / 2.0;
                g.links.push((ring, ring + 1, omega * rf.powi(n as i32 - 1) / h));
            }
            if has_inner_boundary {
                g.boundary.push(BoundaryNode { node: 0, outer: false, measure: omega * spec.r_in.powi(n as i32 - 1) });
            }
            g.boundary.push(BoundaryNode { node: last, outer: true, measure: omega * spec.r_out.powi(n as i32 - 1) });
        } else {
            let dt = dtheta;
            for node in &g.nodes {
                let r = node.r;
                let w = if kind.has_center() && node.ring == 0 {
                    PI * (h / 2.0).powi(2)
                } else if node.ring == 0 {
                    ((r + h / 2.0).powi(2) - r * r) / 2.0 * dt
                } else if node.ring == last {
                    (r * r - (r - h / 2.0).powi(2)) / 2.0 * dt
                } else {
                    r * h * dt
                };
                g.weights.push(w);
            }
            // radial faces
            for ring in 0..last {
                let rf = g.ring_radius(ring) + h / 2.0;
                if kind.has_center() && ring == 0 {
                    for j in 0..n_theta {
                        g.links.push((0, g.index(1, j), (h / 2.0) * dt / h));
                    }
                } else {
                    for j in 0..n_theta {
                        g.links.push((g.index(ring, j), g.index(ring + 1, j), rf * dt / h));
                    }
                }
            }
            // angular faces
            for ring in 0..n_r {
                if kind.has_center() && ring == 0 {
                    continue;
                }
                let r = g.ring_radius(ring);
                let len = if ring == last || (!kind.has_center() && ring == 0) { h / 2.0 } else { h };
                for j in 0..n_theta {
                    let a = g.index(ring, j);
                    let b = g.index(ring, j + 1);
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    g.links.push((a, b, len / (r * dt)));
                }
            }
            if has_inner_boundary {
                for j in 0..n_theta {
                    g.boundary.push(BoundaryNode { node: g.index(0, j), outer: false, measure: spec.r_in * dt });
                }
            }
            for j in 0..n_theta {
                g.boundary.push(BoundaryNode { node: g.index(last, j), outer: true, measure: spec.r_out * dt });
            }
        }
        for (b, bn) in g.boundary.iter().enumerate() {
            g.boundary_of[bn.node] = Some(b);
        }
        Ok(g)
    }

    /// Euclidean one-sided second-order outward normal derivative at a boundary node.
    pub fn normal_derivative_e(&self, u: &[f64], b: usize) -> f64 {
        let bn = self.boundary[b];
        let node = self.nodes[bn.node];
        let j = node.j;
        if bn.outer {
            let r = node.ring;
            (3.0 * u[bn.node] - 4.0 * u[self.index(r - 1, j)] + u[self.index(r - 2, j)]) / (2.0 * self.h)
        } else {
            (3.0 * u[bn.node] - 4.0 * u[self.index(1, j)] + u[self.index(2, j)]) / (2.0 * self.h)
        }
    }

    /// Euclidean gradient components `(∂_r u, r^{-1} ∂_θ u)` at every node.
    pub fn gradient_e(&self, u: &[f64]) -> Vec<(f64, f64)> {
        let last = self.n_r - 1;
        let h = self.h;
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let ring = node.ring;
                let j = node.j;
                if self.kind.has_center() && ring == 0 {
                    if self.kind.is_radial() {
                        return (0.0, 0.0);
                    }
                    // least-squares plane through the first ring
                    let (mut gx, mut gy) = (0.0, 0.0);
                    for k in 0..self.n_theta {
                        let t = k as f64 * self.dtheta;
                        let v = u[self.index(1, k)] - u[0];
                        gx += v * t.cos();
                        gy += v * t.sin();
                    }
                    let s = 2.0 / (self.n_theta as f64 * h);
                    return ((gx * s).hypot(gy * s), 0.0);
                }
                let dr = if ring == last {
                    (3.0 * u[i] - 4.0 * u[self.index(ring - 1, j)] + u[self.index(ring - 2, j)]) / (2.0 * h)
                } else if ring == 0 {
                    -(3.0 * u[i] - 4.0 * u[self.index(1, j)] + u[self.index(2, j)]) / (2.0 * h)
                } else if self.kind.has_center() && ring == 1 && !self.kind.is_radial() {
                    (u[self.index(2, j)] - u[0]) / (2.0 * h)
                } else {
                    (u[self.index(ring + 1, j)] - u[self.index(ring - 1, j)]) / (2.0 * h)
                };
                let dt = if self.kind.is_radial() {
                    0.0
                } else {
                    (u[self.index(ring, j + 1)] - u[self.index(ring, j + self.n_theta - 1)])
                        / (2.0 * node.r * self.dtheta)
                };
                (dr, dt)
            })
            .collect()
    }

    /// Cubic interpolation of nodal values at polar position `(r, θ)`.
    pub fn sample(&self, u: &[f64], r: f64, theta: f64) -> f64 {
        let r = r.clamp(self.r_in, self.r_out);
        let s = (r - self.r_in) / self.h;
        let last = (self.n_r - 1) as isize;
        let mut i0 = s.floor() as isize - 1;
        if !self.kind.has_center() {
            i0 = i0.clamp(0, last - 3);
        } else {
            i0 = i0.min(last - 3);
        }
        let mut acc = 0.0;
        for k in 0..4 {
            let ik = i0 + k;
            let mut wgt = 1.0;
            for m in 0..4 {
                if m != k {
                    wgt *= (s - (i0 + m) as f64) / ((ik - (i0 + m)) as f64);
                }
            }
            let value = if ik < 0 {
                // mirror through the centre
                self.ring_value(u, (-ik) as usize, theta + PI)
            } else {
                self.ring_value(u, ik as usize, theta)
            };
            acc += wgt * value;
        }
        acc
    }

    fn ring_value(&self, u: &[f64], ring: usize, theta: f64) -> f64 {
        if self.kind.is_radial() || (self.kind.has_center() && ring == 0) {
            return u[self.index(ring, 0)];
        }
        let nt = self.n_theta as f64;
        let t = (theta / self.dtheta).rem_euclid(nt);
        let j0 = t.floor() as isize - 1;
        let mut acc = 0.0;
        for k in 0..4isize {
            let jk = j0 + k;
            let mut wgt = 1.0;
            for m in 0..4isize {
                if m != k {
                    wgt *= (t - (j0 + m) as f64) / ((k - m) as f64);
                }
            }
            acc += wgt * u[self.index(ring, jk.rem_euclid(self.n_theta as isize) as usize)];
        }
        acc
    }

    /// Evaluate a closure `(x, y, r, θ)` at every node.
    pub fn eval(&self, f: impl Fn(f64, f64, f64, f64) -> f64) -> ScalarField {
        self.nodes.iter().map(|n| f(n.x(), n.y(), n.r, n.theta)).collect()
    }

    /// Evaluate a closure at every boundary node.
    pub fn eval_boundary(&self, f: impl Fn(f64, f64, f64, f64) -> f64) -> BoundaryField {
        self.boundary
            .iter()
            .map(|b| {
                let n = self.nodes[b.node];
                f(n.x(), n.y(), n.r, n.theta)
            })
            .collect()
    }

    pub fn trace(&self, u: &[f64]) -> BoundaryField {
        self.boundary.iter().map(|b| u[b.node]).collect()
    }

    pub fn describe(&self) -> String {
        match self.kind {
            DomainKind::Disk2D => format!("disk r<={} {}x{}", self.r_out, self.n_r, self.n_theta),
            DomainKind::Annulus2D => {
                format!("annulus {}<=r<={} {}x{}", self.r_in, self.r_out, self.n_r, self.n_theta)
            }
            DomainKind::RadialBall { n } => format!("ball n={} r<={} {}", n, self.r_out, self.n_r),
            DomainKind::RadialAnnulus { n } => {
                format!("radial annulus n={} {}<=r<={} {}", n, self.r_in, self.r_out, self.n_r)
            }
        }
    }
}

/// Metric-dependent finite-volume coefficients plus background curvatures.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub grid: Arc<Grid>,
    pub n: usize,
    pub weights: Vec<f64>,
    /// Per-node neighbour lists with metric transmissibilities.
    pub adj: Vec<Vec<(usize, f64)>>,
    pub bmeasure: Vec<f64>,
    /// Converts the Euclidean radial derivative to the metric normal derivative.
    pub nscale: Vec<f64>,
    /// Metric norm of a Euclidean gradient is `gscale * |∇_E u|`.
    pub gscale: Vec<f64>,
    /// Scalar curvature (n >= 3) or Gauss curvature (n = 2) of the background.
    pub bg_interior: ScalarField,
    /// Mean curvature (n >= 3) or geodesic curvature (n = 2) of the boundary.
    pub bg_boundary: BoundaryField,
}

pub fn build_domain(spec: &DomainSpec) -> Result<(Arc<Grid>, MetricData)> {
    let grid = Arc::new(Grid::build(spec)?);
    let m = MetricData::new(grid.clone(), &spec.base)?;
    Ok((grid, m))
}

impl MetricData {
    pub fn euclidean(grid: Arc<Grid>) -> MetricData {
        let n = grid.dim();
        let mut adj = vec![Vec::new(); grid.len()];
        for &(i, j, t) in &grid.links {
            adj[i].push((j, t));
            adj[j].push((i, t));
        }
        let bg_boundary = grid
            .boundary
            .iter()
            .map(|b| if b.outer { 1.0 / grid.r_out } else { -1.0 / grid.r_in })
            .collect();
        MetricData {
            n,
            weights: grid.weights.clone(),
            adj,
            bmeasure: grid.boundary.iter().map(|b| b.measure).collect(),
            nscale: vec![1.0; grid.boundary.len()],
            gscale: vec![1.0; grid.len()],
            bg_interior: vec![0.0; grid.len()],
            bg_boundary,
            grid,
        }
    }

    pub fn new(grid: Arc<Grid>, base: &BaseMetric) -> Result<MetricData> {
        let e = MetricData::euclidean(grid.clone());
        match base {
            BaseMetric::Euclidean => Ok(e),
            BaseMetric::ExplicitConformal(v) => e.conformal(v),
        }
    }

    /// The metric `e^{2v} g` (n = 2) or `v^{p-2} g` (n >= 3) relative to `self`.
    pub fn conformal(&self, v: &[f64]) -> Result<MetricData> {
        let grid = &self.grid;
        if v.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "conformal data has {} values, grid has {}",
                v.len(),
                grid.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("conformal data not finite".into()));
        }
        let n = self.n;
        let (k_int, k_bdry) = conformal_curvatures(v, self)?;
        let mut out = self.clone();
        if n == 2 {
            for i in 0..grid.len() {
                out.weights[i] *= (2.0 * v[i]).exp();
                out.gscale[i] *= (-v[i]).exp();
            }
            for (b, bn) in grid.boundary.iter().enumerate() {
                out.bmeasure[b] *= v[bn.node].exp();
                out.nscale[b] *= (-v[bn.node]).exp();
            }
        } else {
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                return Err(Error::NonPositiveConformalFactor(min));
            }
            let p = consts::p(n);
            for i in 0..grid.len() {
                out.weights[i] *= v[i].powf(p);
                out.gscale[i] *= v[i].powf(-(p - 2.0) / 2.0);
                for e in out.adj[i].iter_mut() {
                    e.1 *= v[i] * v[e.0];
                }
            }
            for (b, bn) in grid.boundary.iter().enumerate() {
                let x = v[bn.node];
                out.bmeasure[b] *= x.powf((p - 2.0) * (n as f64 - 1.0) / 2.0);
                out.nscale[b] *= x.powf(-(p - 2.0) / 2.0);
            }
        }
        out.bg_interior = k_int;
        out.bg_boundary = k_bdry;
        Ok(out)
    }

    /// Replace the background curvatures (normal-form emulation).
    pub fn with_background(mut self, interior: ScalarField, boundary: BoundaryField) -> Result<Self> {
        if interior.len() != self.grid.len() || boundary.len() != self.grid.boundary.len() {
            return Err(Error::InvalidArgument("background curvature length mismatch".into()));
        }
        self.bg_interior = interior;
        self.bg_boundary = boundary;
        Ok(self)
    }

    pub fn with_constant_background(self, interior: f64, boundary: f64) -> Result<Self> {
        let ni = self.grid.len();
        let nb = self.grid.boundary.len();
        self.with_background(vec![interior; ni], vec![boundary; nb])
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn boundary_area(&self) -> f64 {
        self.bmeasure.iter().sum()
    }

    /// `(L u)_i = Σ_j T_ij (u_i - u_j)`, the flux form of `-Δ` times the weight.
    pub fn flux(&self, u: &[f64]) -> Vec<f64> {
        self.adj
            .iter()
            .enumerate()
            .map(|(i, nb)| nb.iter().map(|&(j, t)| t * (u[i] - u[j])).sum())
            .collect()
    }
}

fn check_field(u: &[f64], m: &MetricData) -> Result<()> {
    if u.len() != m.grid.len() {
        return Err(Error::InvalidArgument(format!("field has {} values, grid has {}", u.len(), m.grid.len())));
    }
    if let Some(i) = u.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("field not finite at node {i}")));
    }
    Ok(())
}

/// Metric outward normal derivative at every boundary node.
pub fn normal_derivative(u: &[f64], m: &MetricData) -> Result<BoundaryField> {
    check_field(u, m)?;
    Ok((0..m.grid.boundary.len()).map(|b| m.nscale[b] * m.grid.normal_derivative_e(u, b)).collect())
}

/// Laplace–Beltrami at every node; boundary nodes close the flux with the
/// one-sided normal derivative.
pub fn laplacian_apply(u: &[f64], m: &MetricData) -> Result<ScalarField> {
    check_field(u, m)?;
    let mut lap: Vec<f64> = m.flux(u).into_iter().map(|x| -x).collect();
    let dn = normal_derivative(u, m)?;
    for (b, bn) in m.grid.boundary.iter().enumerate() {
        lap[bn.node] += m.bmeasure[b] * dn[b];
    }
    for (l, w) in lap.iter_mut().zip(&m.weights) {
        *l /= w;
    }
    Ok(lap)
}

pub fn integrate(f: &[f64], m: &MetricData) -> f64 {
    f.iter().zip(&m.weights).map(|(a, w)| a * w).sum()
}

pub fn integrate_boundary(f: &[f64], m: &MetricData) -> f64 {
    f.iter().zip(&m.bmeasure).map(|(a, w)| a * w).sum()
}

/// Discrete `L^q` norm.
pub fn lq_norm(f: &[f64], m: &MetricData, q: f64) -> f64 {
    f.iter().zip(&m.weights).map(|(a, w)| a.abs().powf(q) * w).sum::<f64>().powf(1.0 / q)
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |acc: f64, x| acc.max(x.abs()))
}

/// Metric gradient norm at every node.
pub fn gradient_norm(u: &[f64], m: &MetricData) -> ScalarField {
    m.grid.gradient_e(u).iter().zip(&m.gscale).map(|(&(a, b), s)| s * a.hypot(b)).collect()
}

/// Curvatures of `u^{p-2} g` (n >= 3) or `e^{2u} g` (n = 2).
pub fn conformal_curvatures(u: &[f64], m: &MetricData) -> Result<(ScalarField, BoundaryField)> {
    check_field(u, m)?;
    let lap = laplacian_apply(u, m)?;
    let dn = normal_derivative(u, m)?;
    let grid = &m.grid;
    if m.n == 2 {
        let k = (0..grid.len()).map(|i| (-2.0 * u[i]).exp() * (m.bg_interior[i] - lap[i])).collect();
        let s = grid
            .boundary
            .iter()
            .enumerate()
            .map(|(b, bn)| (-u[bn.node]).exp() * (dn[b] + m.bg_boundary[b]))
            .collect();
        Ok((k, s))
    } else {
        let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::NonPositiveConformalFactor(min));
        }
        let a = consts::a(m.n);
        let p = consts::p(m.n);
        let rf = consts::robin_factor(m.n);
        let r = (0..grid.len())
            .map(|i| u[i].powf(1.0 - p) * (-a * lap[i] + m.bg_interior[i] * u[i]))
            .collect();
        let hh = grid
            .boundary
            .iter()
            .enumerate()
            .map(|(b, bn)| {
                let x = u[bn.node];
                (p - 2.0) / 2.0 * x.powf(-p / 2.0) * (dn[b] + rf * m.bg_boundary[b] * x)
            })
            .collect();
        Ok((r, hh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n_r: usize, n_t: usize) -> MetricData {
        build_domain(&DomainSpec::disk(1.0, n_r, n_t)).unwrap().1
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_half_integer(3) - PI.sqrt() / 2.0).abs() < 1e-14);
        assert!((gamma_half_integer(4) - 1.0).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn disk_volume_and_perimeter_exact() {
        let m = disk(33, 16);
        assert!((m.volume() - PI).abs() < 1e-12);
        assert!((m.boundary_area() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ball_volume_exact() {
        let (_, m) = build_domain(&DomainSpec::ball(3, 2.0, 41)).unwrap();
        assert!((m.volume() - 4.0 / 3.0 * PI * 8.0).abs() < 1e-10);
        assert!((m.boundary_area() - 16.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn constants_are_harmonic() {
        let m = disk(20, 12);
        let lap = laplacian_apply(&vec![3.0; m.grid.len()], &m).unwrap();
        assert!(sup_norm(&lap) < 1e-10);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(matches!(
            build_domain(&DomainSpec::annulus(1.0, 0.5, 16, 16)),
            Err(Error::InvalidDomain(_))
        ));
        assert!(matches!(build_domain(&DomainSpec::disk(-1.0, 16, 16)), Err(Error::InvalidDomain(_))));
        assert!(matches!(build_domain(&DomainSpec::disk(1.0, 4, 16)), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn nonpositive_conformal_factor_rejected() {
        let (g, _) = build_domain(&DomainSpec::ball(3, 1.0, 16)).unwrap();
        let mut v = vec![1.0; g.len()];
        v[3] = 0.0;
        let spec = DomainSpec::ball(3, 1.0, 16).with_base(BaseMetric::ExplicitConformal(v));
        assert!(matches!(build_domain(&spec), Err(Error::NonPositiveConformalFactor(_))));
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let m = disk(24, 32);
        let g = &m.grid;
        let u = g.eval(|x, y, _, _| 1.0 + x - 0.5 * y + x * x * y);
        for &(r, t) in &[(0.013, 0.3), (0.41, 2.0), (0.97, -1.0), (0.5, 4.0)] {
            let (x, y) = (r * f64::cos(t), r * f64::sin(t));
            let exact = 1.0 + x - 0.5 * y + x * x * y;
            assert!((g.sample(&u, r, t) - exact).abs() < 2e-3, "r={r} t={t}");
        }
    }
}
