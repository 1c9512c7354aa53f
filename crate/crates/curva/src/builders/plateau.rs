use std::collections::VecDeque;

use super::constant_value;
use crate::consts;
use crate::error::{Error, Result};
use crate::geometry::{lq_norm, MetricData, ScalarField};

/// Norm exponent of the elliptic estimate: 3 on surfaces, `n + 1` above.
pub fn plateau_exponent(n: usize) -> f64 {
    if n == 2 {
        3.0
    } else {
        n as f64 + 1.0
    }
}

/// Admissible `‖F - A‖_{L^q}` for background curvature `bg` (`λ` or `K_g`).
pub fn plateau_budget(n: usize, level: f64, gamma: f64, bg: f64) -> f64 {
    let denom = if n == 2 {
        1.0 + 2.0 * (-2.0 * bg)
    } else {
        1.0 + (consts::d_coef(n) + 1.0) * (2.0 - consts::p(n)) * bg
    };
    level / (2.0 * gamma * denom)
}

#[derive(Debug, Clone)]
pub struct Plateau {
    pub f: ScalarField,
    /// The level `A`; differs from the request on the degenerate branch.
    pub level: f64,
    pub u_mask: Vec<bool>,
    pub v_mask: Vec<bool>,
    pub norm: f64,
    pub budget: f64,
    pub degenerate: bool,
}

/// Graph distance (in links) from the complement of `mask`; 0 outside.
fn depth(m: &MetricData, mask: &[bool]) -> Vec<usize> {
    let n = mask.len();
    let mut d = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if !mask[i] {
            d[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        for &(j, _) in &m.adj[i] {
            if d[j] == usize::MAX {
                d[j] = d[i] + 1;
                queue.push_back(j);
            }
        }
    }
    d
}

/// Plateau function under `bound`, which is `(2-p)S∘φ` (n >= 3) or `-2K∘φ` (n = 2).
///
/// `U` is the superlevel set `{bound > A}` eroded by one link and `V` is `U`
/// eroded once more. `F = A` on `V`, the minimum of `bound` outside `U`, and the
/// midpoint on `U∖V`. The deviation `‖F - A‖_q` is measured over the whole
/// domain and must meet the budget.
pub fn build_plateau_function(m: &MetricData, bound: &[f64], level: f64, gamma: f64) -> Result<Plateau> {
    let g = &m.grid;
    if bound.len() != g.len() {
        return Err(Error::InvalidArgument("bound does not match the grid".into()));
    }
    let bg = constant_value(&m.bg_interior)
        .ok_or_else(|| Error::Precondition("background curvature must be constant".into()))?;
    let q = plateau_exponent(m.n);
    let lo = bound.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = bound.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        let budget = plateau_budget(m.n, lo, gamma, bg);
        return Ok(Plateau {
            f: vec![lo; g.len()],
            level: lo,
            u_mask: vec![true; g.len()],
            v_mask: vec![true; g.len()],
            norm: 0.0,
            budget,
            degenerate: true,
        });
    }
    if !(level > 0.0) || level >= hi {
        return Err(Error::Precondition(format!("level {level} must lie in (0, {hi})")));
    }
    let raw: Vec<bool> = bound.iter().map(|&b| b > level).collect();
    let d = depth(m, &raw);
    let u_mask: Vec<bool> = d.iter().map(|&k| k >= 2).collect();
    let v_mask: Vec<bool> = d.iter().map(|&k| k >= 3).collect();
    if !v_mask.iter().any(|&x| x) {
        return Err(Error::BudgetInfeasible(format!("superlevel set of {level} too thin for a core region")));
    }
    let mid = 0.5 * (lo + level);
    let f: Vec<f64> = (0..g.len())
        .map(|i| {
            if v_mask[i] {
                level
            } else if u_mask[i] {
                mid
            } else {
                lo
            }
        })
        .collect();
    let dev: Vec<f64> = f.iter().map(|x| x - level).collect();
    let norm = lq_norm(&dev, m, q);
    let budget = plateau_budget(m.n, level, gamma, bg);
    if norm > budget {
        return Err(Error::BudgetInfeasible(format!("‖F - A‖ = {norm:e} exceeds budget {budget:e}")));
    }
    Ok(Plateau { f, level, u_mask, v_mask, norm, budget, degenerate: false })
}
