//! `w = u^{2-p}` (n >= 3) and `w = e^{-2u}` (n = 2), with the pointwise
//! residuals of both forms of the super-solution inequality.

use crate::consts;
use crate::error::{Error, Result};
use crate::geometry::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    UtoW,
    WtoU,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub n: usize,
    pub direction: Direction,
}

impl TransformParams {
    /// `2 - p` for n >= 3, `-2` (inside the exponential) for n = 2.
    pub fn exponent(&self) -> f64 {
        if self.n == 2 {
            -2.0
        } else {
            2.0 - consts::p(self.n)
        }
    }
}

pub fn kw_transform(field: &[f64], params: TransformParams) -> Result<ScalarField> {
    if params.n < 2 {
        return Err(Error::InvalidArgument(format!("dimension {} unsupported", params.n)));
    }
    let e = params.exponent();
    let need_positive = params.n >= 3 || params.direction == Direction::WtoU;
    if need_positive {
        if let Some(i) = field.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::NonPositiveInput(format!("value {:e} at node {i}", field[i])));
        }
    }
    Ok(match (params.n, params.direction) {
        (2, Direction::UtoW) => field.iter().map(|u| (e * u).exp()).collect(),
        (2, Direction::WtoU) => field.iter().map(|w| w.ln() / e).collect(),
        (_, Direction::UtoW) => field.iter().map(|u| u.powf(e)).collect(),
        (_, Direction::WtoU) => field.iter().map(|w| w.powf(1.0 / e)).collect(),
    })
}

/// Second-order jet of a field at a point: value, `|∇f|²`, `Δf` and the
/// outward normal derivative (only read at boundary points).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad2: f64,
    pub lap: f64,
    pub dn: f64,
}

/// `(-aΔu + R_g u - S u^{p-1},  ∂u + κh_g u - κH u^{p/2})`; both non-negative
/// exactly when `u` is a super-solution at the point.
pub fn yamabe_u_residuals(n: usize, u: Jet, r_g: f64, s: f64, h_g: f64, h: f64) -> (f64, f64) {
    let a = consts::a(n);
    let p = consts::p(n);
    let k = consts::robin_factor(n);
    let x = u.value;
    (-a * u.lap + r_g * x - s * x.powf(p - 1.0), u.dn + k * h_g * x - k * h * x.powf(p / 2.0))
}

/// `(-aΔw + (2-p)R_g w + D|∇w|²/w - (2-p)S,  ∂w - 2h_g w + 2H w^{1/2})`; both
/// non-positive exactly when `u = w^{1/(2-p)}` is a super-solution.
pub fn yamabe_w_residuals(n: usize, w: Jet, r_g: f64, s: f64, h_g: f64, h: f64) -> (f64, f64) {
    let a = consts::a(n);
    let p = consts::p(n);
    let d = consts::d_coef(n);
    let x = w.value;
    (
        -a * w.lap + (2.0 - p) * r_g * x + d * w.grad2 / x - (2.0 - p) * s,
        w.dn - 2.0 * h_g * x + 2.0 * h * x.sqrt(),
    )
}

/// `(-Δu + K_g - K e^{2u},  ∂u + σ_g - σ e^u)`.
pub fn gauss_u_residuals(u: Jet, k_g: f64, k: f64, s_g: f64, s: f64) -> (f64, f64) {
    let x = u.value;
    (-u.lap + k_g - k * (2.0 * x).exp(), u.dn + s_g - s * x.exp())
}

/// `(-Δw - 2K_g w + |∇w|²/w + 2K,  ∂w - 2σ_g w + 2σ w^{1/2})`.
pub fn gauss_w_residuals(w: Jet, k_g: f64, k: f64, s_g: f64, s: f64) -> (f64, f64) {
    let x = w.value;
    (-w.lap - 2.0 * k_g * x + w.grad2 / x + 2.0 * k, w.dn - 2.0 * s_g * x + 2.0 * s * x.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_dimensional_values() {
        let up = TransformParams { n: 3, direction: Direction::UtoW };
        assert_eq!(kw_transform(&[1.0, 2.0], up).unwrap(), vec![1.0, 0.0625]);
        let down = TransformParams { n: 3, direction: Direction::WtoU };
        assert!((kw_transform(&[0.0625], down).unwrap()[0] - 2.0).abs() < 1e-15);
        assert!(matches!(kw_transform(&[1.0, 0.0], up), Err(Error::NonPositiveInput(_))));
    }

    #[test]
    fn two_dimensional_values() {
        let up = TransformParams { n: 2, direction: Direction::UtoW };
        assert_eq!(kw_transform(&[0.0], up).unwrap(), vec![1.0]);
        // negative u is fine in 2-D, negative w is not
        assert!(kw_transform(&[-3.0], up).is_ok());
        let down = TransformParams { n: 2, direction: Direction::WtoU };
        assert!(matches!(kw_transform(&[-1.0], down), Err(Error::NonPositiveInput(_))));
    }
}
