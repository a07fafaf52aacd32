//! Two hard-coded maps `f = exp ∘ T ∘ log` on the 2-dimensional orthant whose
//! normalized orbits converge to the eigenvector `𝟏` sublinearly.
//!
//! * [`BuiltinMap::ArctanAveraging`] (`example1`): analytic but not
//!   multiplicatively convex, with
//!   `T(y) = (½(y₁+y₂) − atan(½(y₂−y₁)), ½(y₁+y₂) + atan(½(y₂−y₁)))`.
//! * [`BuiltinMap::ArctanMax`] (`example2`): multiplicatively convex but not
//!   analytic, with `T(y) = (max(y₁, y₂ − atan(y₂−y₁)), max(y₂, y₁ + atan(y₂−y₁)))`.
//!
//! Neither is expressible with monomials, sums, maxima and minima, so both
//! carry closed-form values and derivatives here.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::expr::TIE_RTOL;
use super::Digraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinMap {
    ArctanAveraging,
    ArctanMax,
}

impl BuiltinMap {
    pub const ALL: [BuiltinMap; 2] = [BuiltinMap::ArctanAveraging, BuiltinMap::ArctanMax];

    pub fn tag(self) -> &'static str {
        match self {
            BuiltinMap::ArctanAveraging => "example1",
            BuiltinMap::ArctanMax => "example2",
        }
    }

    pub fn dim(self) -> usize {
        2
    }

    /// The log-coordinate map `T`. Handles `-∞` inputs from zero coordinates.
    pub fn conjugate(self, y: [f64; 2]) -> [f64; 2] {
        match self {
            BuiltinMap::ArctanAveraging => {
                let mid = 0.5 * (y[0] + y[1]);
                let a = (0.5 * (y[1] - y[0])).atan();
                [mid - a, mid + a]
            }
            BuiltinMap::ArctanMax => {
                let a = (y[1] - y[0]).atan();
                [y[0].max(y[1] - a), y[1].max(y[0] + a)]
            }
        }
    }

    /// Derivative of `T` at `y`.
    fn conjugate_derivative(self, y: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        match self {
            BuiltinMap::ArctanAveraging => {
                let s = 0.5 * (y[1] - y[0]);
                let g = 0.5 / (1.0 + s * s);
                Ok([[0.5 + g, 0.5 - g], [0.5 - g, 0.5 + g]])
            }
            BuiltinMap::ArctanMax => {
                let d = y[1] - y[0];
                let a = d.atan();
                let g = 1.0 / (1.0 + d * d);
                // both maxima tie exactly when d = atan(d), i.e. d = 0
                let scale = y[0].abs().max(y[1].abs()).max(1.0);
                if d.abs() <= TIE_RTOL * scale {
                    return Err(Error::NotDifferentiable { coord: 0 });
                }
                let row0 = if y[0] > y[1] - a { [1.0, 0.0] } else { [g, 1.0 - g] };
                let row1 = if y[1] > y[0] + a { [0.0, 1.0] } else { [1.0 - g, g] };
                Ok([row0, row1])
            }
        }
    }

    /// Value on the closed orthant (continuous extension).
    pub fn eval_raw(self, x: &[f64]) -> Vec<f64> {
        if x.iter().all(|&v| v == 0.0) {
            return vec![0.0; 2];
        }
        let t = self.conjugate([x[0].ln(), x[1].ln()]);
        vec![t[0].exp(), t[1].exp()]
    }

    pub fn jacobian_raw(self, x: &[f64]) -> Result<Matrix> {
        let y = [x[0].ln(), x[1].ln()];
        let fx = self.eval_raw(x);
        let d = self.conjugate_derivative(y)?;
        let mut jac = Matrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                jac[(i, j)] = fx[i] * d[i][j] / x[j];
            }
        }
        Ok(jac)
    }

    /// Both maps send `exp(t e_j)` to infinity in every coordinate.
    pub fn digraph(self) -> Digraph {
        Digraph::complete(2)
    }

    pub fn is_analytic(self) -> bool {
        matches!(self, BuiltinMap::ArctanAveraging)
    }

    pub fn is_multiplicatively_convex(self) -> bool {
        matches!(self, BuiltinMap::ArctanMax)
    }

    /// Start points whose orbits have the closed form `exp(∓atan^k(1))`.
    pub fn reference_start(self) -> [f64; 2] {
        let e = std::f64::consts::E;
        match self {
            BuiltinMap::ArctanAveraging => [1.0 / e, e],
            BuiltinMap::ArctanMax => [1.0 / e, 1.0],
        }
    }

    /// Closed-form `k`-th iterate from [`BuiltinMap::reference_start`].
    pub fn reference_iterate(self, k: usize) -> [f64; 2] {
        let a = iterated_atan(1.0, k);
        match self {
            BuiltinMap::ArctanAveraging => [(-a).exp(), a.exp()],
            BuiltinMap::ArctanMax => [(-a).exp(), 1.0],
        }
    }
}

/// `atan^k(x)`: arctangent applied `k` times.
pub fn iterated_atan(x: f64, k: usize) -> f64 {
    (0..k).fold(x, |a, _| a.atan())
}

impl fmt::Display for BuiltinMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BuiltinMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" | "arctan-averaging" => Ok(BuiltinMap::ArctanAveraging),
            "example2" | "arctan-max" => Ok(BuiltinMap::ArctanMax),
            other => Err(Error::InvalidModel(format!(
                "unknown builtin map {other:?}; expected example1 or example2"
            ))),
        }
    }
}
