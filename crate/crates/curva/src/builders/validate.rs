use serde::Serialize;

use super::SubSuperPair;
use crate::geometry::MetricData;
use crate::monotone::{residuals, NonlinearProblem};

pub const VALIDATE_TOL: f64 = 1e-8;

/// Worst violations of the four discrete inequalities. Violations are
/// non-negative; a sub-solution violates where its residual is positive, a
/// super-solution where it is negative.
#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub pass: bool,
    pub sub_interior: f64,
    pub sub_boundary: f64,
    pub super_interior: f64,
    pub super_boundary: f64,
    pub ordering: f64,
    pub scale_interior: f64,
    pub scale_boundary: f64,
    /// Node of the worst scaled violation, if any inequality fails.
    pub worst_node: Option<usize>,
    pub worst_label: String,
}

fn scales(p: &NonlinearProblem, m: &MetricData, u: &[f64]) -> (f64, f64) {
    let lu = m.flux(u);
    let g = &m.grid;
    let d = p.diffusion;
    let mut si: f64 = 1.0;
    for i in 0..g.len() {
        if g.boundary_of[i].is_none() {
            si = si.max((d * lu[i] / m.weights[i]).abs() + (p.f)(i, u[i]).abs());
        }
    }
    let mut sb: f64 = 1.0;
    for (b, bn) in g.boundary.iter().enumerate() {
        let i = bn.node;
        let t = (d * lu[i]).abs() + (m.weights[i] * (p.f)(i, u[i])).abs();
        sb = sb.max(t / (d * m.bmeasure[b]) + (p.sigma * u[i]).abs() + (p.g)(b, u[i]).abs());
    }
    (si, sb)
}

pub fn validate_bracket(pair: &SubSuperPair, p: &NonlinearProblem, m: &MetricData) -> BracketReport {
    let g = &m.grid;
    let (sm_i, sm_b) = scales(p, m, &pair.u_minus);
    let (sp_i, sp_b) = scales(p, m, &pair.u_plus);
    let scale_interior = sm_i.max(sp_i);
    let scale_boundary = sm_b.max(sp_b);
    let (ri_m, rb_m) = residuals(p, m, &pair.u_minus);
    let (ri_p, rb_p) = residuals(p, m, &pair.u_plus);
    let mut worst = (0.0, None, String::new());
    let mut note = |v: f64, scale: f64, node: usize, label: &str| {
        let s = v / scale;
        if s > worst.0 {
            worst = (s, Some(node), label.to_string());
        }
    };
    let mut sub_interior: f64 = 0.0;
    let mut super_interior: f64 = 0.0;
    for i in 0..g.len() {
        if g.boundary_of[i].is_some() {
            continue;
        }
        sub_interior = sub_interior.max(ri_m[i]);
        super_interior = super_interior.max(-ri_p[i]);
        note(ri_m[i], scale_interior, i, "sub interior");
        note(-ri_p[i], scale_interior, i, "super interior");
    }
    let mut sub_boundary: f64 = 0.0;
    let mut super_boundary: f64 = 0.0;
    for (b, bn) in g.boundary.iter().enumerate() {
        sub_boundary = sub_boundary.max(rb_m[b]);
        super_boundary = super_boundary.max(-rb_p[b]);
        note(rb_m[b], scale_boundary, bn.node, "sub boundary");
        note(-rb_p[b], scale_boundary, bn.node, "super boundary");
    }
    let mut ordering: f64 = 0.0;
    for i in 0..g.len() {
        let d = pair.u_minus[i] - pair.u_plus[i];
        ordering = ordering.max(d);
        note(d, 1.0, i, "ordering");
    }
    let pass = sub_interior <= VALIDATE_TOL * scale_interior
        && super_interior <= VALIDATE_TOL * scale_interior
        && sub_boundary <= VALIDATE_TOL * scale_boundary
        && super_boundary <= VALIDATE_TOL * scale_boundary
        && ordering <= super::ORDER_TOL;
    let (_, worst_node, worst_label) = if pass { (0.0, None, String::new()) } else { worst };
    BracketReport {
        pass,
        sub_interior,
        sub_boundary,
        super_interior,
        super_boundary,
        ordering,
        scale_interior,
        scale_boundary,
        worst_node,
        worst_label,
    }
}

/// Whether `u` alone passes the sub-solution and the super-solution tests.
pub(crate) fn field_status(p: &NonlinearProblem, m: &MetricData, u: &[f64]) -> (bool, bool) {
    let g = &m.grid;
    let (si, sb) = scales(p, m, u);
    let (ri, rb) = residuals(p, m, u);
    let interior = (0..g.len()).filter(|&i| g.boundary_of[i].is_none());
    let (mut sub, mut sup) = (true, true);
    for i in interior {
        sub &= ri[i] <= VALIDATE_TOL * si;
        sup &= ri[i] >= -VALIDATE_TOL * si;
    }
    for r in rb {
        sub &= r <= VALIDATE_TOL * sb;
        sup &= r >= -VALIDATE_TOL * sb;
    }
    (sub, sup)
}
