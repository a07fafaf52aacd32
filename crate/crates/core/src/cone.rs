//! Order comparisons and the Thompson and Hilbert metrics on the open
//! positive orthant.
//!
//! For `x, y` in the open orthant,
//!
//! * `M(x/y) = max_i x_i / y_i` is the least `β` with `x ≤ βy`,
//! * `m(x/y) = min_i x_i / y_i` is the largest `α` with `αy ≤ x`,
//! * `d_T(x, y) = max(log M(x/y), log M(y/x))` is Thompson's metric,
//! * `d_H(x, y) = log(M(x/y) / m(x/y))` is Hilbert's projective metric.
//!
//! Norms are sup-norms everywhere, so the orthant is a normal cone with
//! constant 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries below this are rejected; ratios and logs stay finite above it.
pub const MIN_ENTRY: f64 = 1e-300;

/// A strictly positive vector: a point of the open orthant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositiveVector(Vec<f64>);

impl PositiveVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidVector("vector must have at least one entry".into()));
        }
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < MIN_ENTRY {
                return Err(Error::InvalidVector(format!(
                    "entry {} is {v}; entries must be finite and at least {MIN_ENTRY:e}",
                    i + 1
                )));
            }
        }
        Ok(Self(entries))
    }

    /// The all-ones vector.
    pub fn ones(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self(vec![1.0; dim])
    }

    /// `exp` applied entrywise; fails if an entry underflows or overflows.
    pub fn from_log(logs: &[f64]) -> Result<Self> {
        Self::new(logs.iter().map(|v| v.exp()).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * t).collect())
    }

    pub fn ln(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.ln()).collect()
    }

    /// Componentwise `x ≤ y`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl TryFrom<Vec<f64>> for PositiveVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PositiveVector> for Vec<f64> {
    fn from(v: PositiveVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for PositiveVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A point of the closed orthant. Used for boundary evaluation and for
/// coordinate projections `P_J x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonnegVector(Vec<f64>);

impl NonnegVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidVector("vector must have at least one entry".into()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidVector(format!(
                "entry {} is {}; entries must be finite and nonnegative",
                i + 1,
                entries[i]
            )));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Orthogonal projection onto the coordinates in `keep` (0-indexed).
    pub fn project(&self, keep: &[usize]) -> Self {
        let mut out = vec![0.0; self.0.len()];
        for &j in keep {
            out[j] = self.0[j];
        }
        Self(out)
    }
}

impl From<PositiveVector> for NonnegVector {
    fn from(v: PositiveVector) -> Self {
        Self(v.0)
    }
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn check_dims(x: &PositiveVector, y: &PositiveVector) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    Ok(())
}

/// `M(x/y)`: the largest coordinate ratio `x_i / y_i`.
pub fn m_upper(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(ratio_max(x.as_slice(), y.as_slice()))
}

/// `m(x/y)`: the smallest coordinate ratio `x_i / y_i`.
pub fn m_lower(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(ratio_min(x.as_slice(), y.as_slice()))
}

pub(crate) fn ratio_max(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn ratio_min(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min)
}

/// `log t` computed as `ln_1p(t - 1)`, accurate when `t` is near 1.
fn ln_near_one(t: f64) -> f64 {
    (t - 1.0).ln_1p()
}

/// Thompson's metric.
pub fn thompson(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(thompson_raw(x.as_slice(), y.as_slice()))
}

pub(crate) fn thompson_raw(x: &[f64], y: &[f64]) -> f64 {
    let up = ratio_max(x, y);
    let lo = ratio_min(x, y);
    ln_near_one(up).max(-ln_near_one(lo)).max(0.0)
}

/// Hilbert's projective metric. Zero exactly on proportional pairs.
pub fn hilbert(x: &PositiveVector, y: &PositiveVector) -> Result<f64> {
    check_dims(x, y)?;
    Ok(hilbert_raw(x.as_slice(), y.as_slice()))
}

pub(crate) fn hilbert_raw(x: &[f64], y: &[f64]) -> f64 {
    let up = ratio_max(x, y);
    let lo = ratio_min(x, y);
    ((up - lo) / lo).ln_1p()
}

/// Rescale so the largest entry is 1.
pub fn normalize_sup(x: &PositiveVector) -> PositiveVector {
    let s = x.sup_norm();
    PositiveVector(x.0.iter().map(|v| v / s).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> PositiveVector {
        PositiveVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn order_ratios() {
        assert_eq!(m_upper(&pv(&[2.0, 6.0]), &pv(&[1.0, 2.0])).unwrap(), 3.0);
        assert_eq!(m_lower(&pv(&[2.0, 6.0]), &pv(&[1.0, 2.0])).unwrap(), 2.0);
        assert_eq!(m_upper(&pv(&[1.0, 4.0]), &pv(&[2.0, 1.0])).unwrap(), 4.0);
        assert_eq!(m_lower(&pv(&[1.0, 4.0]), &pv(&[2.0, 1.0])).unwrap(), 0.5);
        let x = pv(&[0.3, 7.0, 2.0]);
        assert_eq!(m_upper(&x, &x).unwrap(), 1.0);
        assert_eq!(m_lower(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn upper_is_reciprocal_of_lower() {
        let x = pv(&[1.0, 4.0, 0.25]);
        let y = pv(&[2.0, 1.0, 3.0]);
        let lhs = m_upper(&y, &x).unwrap();
        let rhs = 1.0 / m_lower(&x, &y).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn metric_examples() {
        let e = std::f64::consts::E;
        assert!((thompson(&pv(&[1.0, 1.0]), &pv(&[e, e])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(thompson(&pv(&[3.0, 2.0]), &pv(&[3.0, 2.0])).unwrap(), 0.0);
        let l4 = 4f64.ln();
        assert!((thompson(&pv(&[1.0, 4.0]), &pv(&[1.0, 1.0])).unwrap() - l4).abs() < 1e-15);
        assert_eq!(hilbert(&pv(&[1.0, 2.0]), &pv(&[2.0, 4.0])).unwrap(), 0.0);
        assert!((hilbert(&pv(&[1.0, 4.0]), &pv(&[1.0, 1.0])).unwrap() - l4).abs() < 1e-15);
        let h = hilbert(&pv(&[2.0, 6.0]), &pv(&[1.0, 2.0])).unwrap();
        assert!((h - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let err = thompson(&pv(&[1.0]), &pv(&[1.0, 2.0])).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
        assert!(hilbert(&pv(&[1.0]), &pv(&[1.0, 2.0])).is_err());
        assert!(m_upper(&pv(&[1.0]), &pv(&[1.0, 2.0])).is_err());
        assert!(m_lower(&pv(&[1.0]), &pv(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_sup(&pv(&[2.0, 4.0])).as_slice(), &[0.5, 1.0]);
        assert_eq!(normalize_sup(&pv(&[1.0, 1.0])).as_slice(), &[1.0, 1.0]);
        let z = normalize_sup(&pv(&[3.0, 1.0, 2.0]));
        assert_eq!(z.as_slice(), &[1.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn construction_rejects_bad_entries() {
        assert!(PositiveVector::new(vec![]).is_err());
        assert!(PositiveVector::new(vec![1.0, 0.0]).is_err());
        assert!(PositiveVector::new(vec![1.0, 1e-301]).is_err());
        assert!(PositiveVector::new(vec![f64::NAN]).is_err());
        assert!(PositiveVector::new(vec![f64::INFINITY]).is_err());
        assert!(NonnegVector::new(vec![0.0, -1.0]).is_err());
        assert!(NonnegVector::new(vec![0.0, 0.0]).unwrap().is_zero());
    }

    #[test]
    fn projection_zeroes_other_coordinates() {
        let x = NonnegVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x.project(&[0, 2]).as_slice(), &[1.0, 0.0, 3.0]);
    }
}
