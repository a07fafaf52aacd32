//! Reproduction of the two arctan maps: their orbits from the reference
//! starts follow `exp(∓atan^k(1))` exactly, and the distance to the
//! eigenvector `𝟏` decays sublinearly.

use serde::{Deserialize, Serialize};

use crate::cone::thompson_raw;
use crate::error::Result;
use crate::maps::{iterated_atan, BuiltinMap};
use crate::rate::{empirical_rate, RateClass};

/// Iterates compared against the closed form.
pub const FORMULA_STEPS: usize = 30;
pub const FORMULA_TOL: f64 = 1e-9;
/// Orbit length used for the rate classification.
pub const ORBIT_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproReport {
    pub example: BuiltinMap,
    pub start: [f64; 2],
    /// `f^k(x)` for `k = 0, 1, 2, 3`.
    pub first_iterates: Vec<[f64; 2]>,
    /// Largest `|f^k(x) − closed form|` over `k ≤ 30`.
    pub max_iterate_error: f64,
    /// Largest `|d_T(f^k(x), 𝟏) − atan^k(1)|` over `k ≤ 30`.
    pub max_distance_error: f64,
    pub theta_hat: f64,
    pub classification: RateClass,
    pub passed: bool,
}

pub fn reproduce(which: BuiltinMap) -> Result<ReproReport> {
    let start = which.reference_start();
    let ones = [1.0, 1.0];
    let mut x = start.to_vec();
    let mut distances = Vec::with_capacity(ORBIT_STEPS + 1);
    let mut first_iterates = Vec::new();
    let mut max_iterate_error: f64 = 0.0;
    let mut max_distance_error: f64 = 0.0;
    for k in 0..=ORBIT_STEPS {
        let d = thompson_raw(&x, &ones);
        distances.push(d);
        if k <= 3 {
            first_iterates.push([x[0], x[1]]);
        }
        if k <= FORMULA_STEPS {
            let want = which.reference_iterate(k);
            let err = (x[0] - want[0]).abs().max((x[1] - want[1]).abs());
            max_iterate_error = max_iterate_error.max(err);
            max_distance_error = max_distance_error.max((d - iterated_atan(1.0, k)).abs());
        }
        x = which.eval_raw(&x);
    }
    let rate = empirical_rate(&distances)?;
    let passed = max_iterate_error <= FORMULA_TOL
        && max_distance_error <= FORMULA_TOL
        && rate.classification == RateClass::Sublinear;
    Ok(ReproReport {
        example: which,
        start,
        first_iterates,
        max_iterate_error,
        max_distance_error,
        theta_hat: rate.theta_hat,
        classification: rate.classification,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn both_examples_pass() {
        for which in BuiltinMap::ALL {
            let r = reproduce(which).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn first_steps() {
        let r = reproduce(BuiltinMap::ArctanAveraging).unwrap();
        let x1 = r.first_iterates[1];
        assert!((thompson_raw(&x1, &[1.0, 1.0]) - FRAC_PI_4).abs() < 1e-15);
        let x2 = r.first_iterates[2];
        assert!((thompson_raw(&x2, &[1.0, 1.0]) - 0.665_773_750_028_353_9).abs() < 1e-12);

        let r = reproduce(BuiltinMap::ArctanMax).unwrap();
        let x1 = r.first_iterates[1];
        assert!((x1[0] - (-FRAC_PI_4).exp()).abs() < 1e-15 && x1[1] == 1.0);
    }
}
