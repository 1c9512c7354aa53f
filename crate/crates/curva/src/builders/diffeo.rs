use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{integrate, BoundaryField, Grid, MetricData, ScalarField};

/// Rotation by `rotation` composed with the radial squeeze `t ↦ t^{1+squeeze}`
/// of the normalised radius (`r/R` on disks and balls, `(r - r₁)/(r₂ - r₁)` on annuli).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Diffeo {
    pub rotation: f64,
    pub squeeze: f64,
}

const SQUEEZES: [f64; 16] = [0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -0.75, 2.0, -0.9, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];

impl Diffeo {
    pub fn identity() -> Diffeo {
        Diffeo { rotation: 0.0, squeeze: 0.0 }
    }

    /// Candidates in search order; radial domains get no rotations.
    pub fn family(g: &Grid) -> Vec<Diffeo> {
        let rotations: Vec<f64> =
            if g.kind.is_radial() { vec![0.0] } else { (0..8).map(|k| k as f64 * TAU / 8.0).collect() };
        SQUEEZES
            .iter()
            .flat_map(|&s| rotations.iter().map(move |&t| Diffeo { rotation: t, squeeze: s }))
            .collect()
    }

    /// Image of the point `(r, θ)`.
    pub fn map(&self, g: &Grid, r: f64, theta: f64) -> (f64, f64) {
        let span = g.r_out - g.r_in;
        let t = ((r - g.r_in) / span).clamp(0.0, 1.0);
        (g.r_in + span * t.powf(1.0 + self.squeeze), theta + self.rotation)
    }

    /// `field ∘ φ` at every node.
    pub fn pullback(&self, g: &Grid, field: &[f64]) -> ScalarField {
        if *self == Diffeo::identity() {
            return field.to_vec();
        }
        g.nodes
            .iter()
            .map(|nd| {
                let (r, t) = self.map(g, nd.r, nd.theta);
                g.sample(field, r, t)
            })
            .collect()
    }

    /// Boundary data composed with the map; the squeeze fixes each boundary
    /// circle, so only the rotation acts.
    pub fn pullback_boundary(&self, g: &Grid, field: &[f64]) -> BoundaryField {
        if self.rotation == 0.0 || g.kind.is_radial() {
            return field.to_vec();
        }
        let (outer, inner): (Vec<usize>, Vec<usize>) = (0..g.boundary.len()).partition(|&b| g.boundary[b].outer);
        let periodic = |ids: &[usize], theta: f64| -> f64 {
            let n = ids.len();
            let s = (theta / g.dtheta).rem_euclid(n as f64);
            let j0 = s.floor() as isize - 1;
            let mut acc = 0.0;
            for k in 0..4isize {
                let mut w = 1.0;
                for m in 0..4isize {
                    if m != k {
                        w *= (s - (j0 + m) as f64) / ((k - m) as f64);
                    }
                }
                acc += w * field[ids[(j0 + k).rem_euclid(n as isize) as usize]];
            }
            acc
        };
        g.boundary
            .iter()
            .map(|bn| {
                let t = g.nodes[bn.node].theta + self.rotation;
                if bn.outer {
                    periodic(&outer, t)
                } else {
                    periodic(&inner, t)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// `∫ S∘φ < 0`.
    NegativeIntegral,
    /// `Vol{f∘φ > level} ≥ target`.
    SuperlevelVolume { level: f64, target: f64 },
}

impl Objective {
    fn value(&self, m: &MetricData, composed: &[f64]) -> f64 {
        match *self {
            Objective::NegativeIntegral => -integrate(composed, m),
            Objective::SuperlevelVolume { level, .. } => {
                composed.iter().zip(&m.weights).filter(|(f, _)| **f > level).map(|(_, w)| w).sum()
            }
        }
    }

    fn met(&self, value: f64) -> bool {
        match *self {
            Objective::NegativeIntegral => value > 0.0,
            Objective::SuperlevelVolume { target, .. } => value >= target,
        }
    }

    fn target(&self) -> f64 {
        match *self {
            Objective::NegativeIntegral => 0.0,
            Objective::SuperlevelVolume { target, .. } => target,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub composed: ScalarField,
    pub diffeo: Diffeo,
    pub value: f64,
    pub evaluated: usize,
}

/// First member of the family meeting the objective.
pub fn search_diffeomorphism(m: &MetricData, field: &[f64], objective: Objective) -> Result<SearchOutcome> {
    let g = &m.grid;
    if field.len() != g.len() {
        return Err(Error::InvalidArgument("field does not match the grid".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for (k, d) in Diffeo::family(g).into_iter().enumerate() {
        let composed = d.pullback(g, field);
        let value = objective.value(m, &composed);
        if objective.met(value) {
            return Ok(SearchOutcome { composed, diffeo: d, value, evaluated: k + 1 });
        }
        best = best.max(value);
    }
    Err(Error::SearchFailed { best, target: objective.target() })
}
