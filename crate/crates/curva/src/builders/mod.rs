//! Sub- and super-solution factories for the prescribed curvature problems.

mod diffeo;
mod dirichlet;
mod glue;
mod negative;
mod plateau;
mod transform;
mod twod;
mod validate;
mod zero;

use std::collections::BTreeMap;

use serde::Serialize;

pub use diffeo::{search_diffeomorphism, Diffeo, Objective, SearchOutcome};
pub use dirichlet::{solve_local_dirichlet, LocalDirichlet};
pub use glue::{glue_positive_pair, positive_supersolution};
pub use negative::{build_negative_supersolution, constant_supersolution, eigen_subsolution, EigenSub};
pub use plateau::{build_plateau_function, plateau_budget, plateau_exponent, Plateau};
pub use transform::{
    gauss_u_residuals, gauss_w_residuals, kw_transform, yamabe_u_residuals, yamabe_w_residuals, Direction, Jet,
    TransformParams,
};
pub use twod::{build_2d_subsolution, build_2d_supersolution};
pub use validate::{validate_bracket, BracketReport, VALIDATE_TOL};
pub use zero::{zero_case_pair, ZERO_SPLIT};

use crate::error::{Error, Result};
use crate::geometry::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    EigenScaled,
    Constant,
    KWTransformPipeline,
    TwoDPipeline,
    GluedPositiveCase,
    ZeroCasePerturbation,
    Manual,
}

/// An ordered pair `u₋ ≤ u₊` together with the constants found while building it.
#[derive(Debug, Clone, Serialize)]
pub struct SubSuperPair {
    pub u_minus: ScalarField,
    pub u_plus: ScalarField,
    pub provenance: Provenance,
    pub constants: BTreeMap<String, f64>,
}

pub const ORDER_TOL: f64 = 1e-12;

impl SubSuperPair {
    /// Checks ordering, and for `n >= 3` that `u₋ ≥ 0`, `u₋ ≢ 0` and `u₊ > 0`.
    pub fn new(u_minus: ScalarField, u_plus: ScalarField, provenance: Provenance, n: usize) -> Result<SubSuperPair> {
        if u_minus.len() != u_plus.len() {
            return Err(Error::InvalidArgument("sub- and super-solution lengths differ".into()));
        }
        if u_minus.iter().chain(&u_plus).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("pair contains non-finite values".into()));
        }
        if let Some(i) = (0..u_minus.len()).find(|&i| u_minus[i] > u_plus[i] + ORDER_TOL) {
            return Err(Error::BracketViolation(format!(
                "u- exceeds u+ at node {i}: {:e} > {:e}",
                u_minus[i], u_plus[i]
            )));
        }
        if n >= 3 {
            if let Some(i) = u_minus.iter().position(|&x| x < 0.0) {
                return Err(Error::BracketViolation(format!("u- negative at node {i}")));
            }
            if u_minus.iter().all(|&x| x == 0.0) {
                return Err(Error::BracketViolation("u- vanishes identically".into()));
            }
            if let Some(i) = u_plus.iter().position(|&x| x <= 0.0) {
                return Err(Error::BracketViolation(format!("u+ not positive at node {i}")));
            }
        }
        Ok(SubSuperPair { u_minus, u_plus, provenance, constants: BTreeMap::new() })
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn with_constants(mut self, c: &BTreeMap<String, f64>) -> Self {
        self.constants.extend(c.iter().map(|(k, v)| (k.clone(), *v)));
        self
    }
}

/// Every background value equal to the first, up to a relative 1e-12.
pub fn constant_value(f: &[f64]) -> Option<f64> {
    let v = *f.first()?;
    f.iter().all(|x| (x - v).abs() <= 1e-12 * v.abs().max(1.0)).then_some(v)
}

pub(crate) fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}
