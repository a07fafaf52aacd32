//! Order-preserving, degree-one homogeneous maps of the open orthant into
//! itself, their associated digraphs and their Jacobians.

mod builtin;
mod digraph;
mod expr;
mod tensor;

pub use builtin::{iterated_atan, BuiltinMap};
pub use digraph::Digraph;
pub use expr::{Expr, ExprMap, TIE_RTOL};
pub use tensor::{TensorEntry, TensorMap};

use serde::{Deserialize, Serialize};

use crate::cone::{PositiveVector, MIN_ENTRY};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `x ↦ Ax` for a nonnegative matrix without zero rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMap(Matrix);

impl MatrixMap {
    pub fn new(a: Matrix) -> Result<Self> {
        let n = a.dim();
        for i in 0..n {
            let row = a.row(i);
            if let Some(j) = row.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "entry ({}, {}) is negative ({})",
                    i + 1,
                    j + 1,
                    row[j]
                )));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidModel(format!(
                    "row {} is zero; the map would leave the open orthant",
                    i + 1
                )));
            }
        }
        Ok(Self(a))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Any of the supported map representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapModel {
    Matrix(MatrixMap),
    Tensor(TensorMap),
    Expr(ExprMap),
    Builtin(BuiltinMap),
}

impl From<MatrixMap> for MapModel {
    fn from(m: MatrixMap) -> Self {
        MapModel::Matrix(m)
    }
}

impl From<TensorMap> for MapModel {
    fn from(m: TensorMap) -> Self {
        MapModel::Tensor(m)
    }
}

impl From<ExprMap> for MapModel {
    fn from(m: ExprMap) -> Self {
        MapModel::Expr(m)
    }
}

impl From<BuiltinMap> for MapModel {
    fn from(m: BuiltinMap) -> Self {
        MapModel::Builtin(m)
    }
}

impl MapModel {
    /// Shorthand for a matrix map from rows.
    pub fn matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        MatrixMap::from_rows(rows).map(MapModel::Matrix)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MapModel::Matrix(_) => "matrix",
            MapModel::Tensor(_) => "tensor",
            MapModel::Expr(_) => "expr",
            MapModel::Builtin(_) => "builtin",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MapModel::Matrix(m) => m.0.dim(),
            MapModel::Tensor(t) => t.dim(),
            MapModel::Expr(e) => e.dim(),
            MapModel::Builtin(b) => b.dim(),
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if self.dim() != found {
            return Err(Error::DimensionMismatch { expected: self.dim(), found });
        }
        Ok(())
    }

    /// Value on the closed orthant; the continuous extension of the map.
    pub fn eval_nonneg(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok(match self {
            MapModel::Matrix(m) => m.0.mul_vec(x),
            MapModel::Tensor(t) => t.eval_raw(x),
            MapModel::Expr(e) => e.eval_raw(x),
            MapModel::Builtin(b) => b.eval_raw(x),
        })
    }

    pub fn eval(&self, x: &PositiveVector) -> Result<PositiveVector> {
        let y = self.eval_nonneg(x.as_slice())?;
        if let Some(coord) = y.iter().position(|v| !(v.is_finite() && *v >= MIN_ENTRY)) {
            return Err(Error::NonPositiveOutput { coord });
        }
        PositiveVector::new(y)
    }

    /// The associated digraph: arc `i → j` iff `f(exp(t e_j))_i → ∞`.
    pub fn digraph(&self) -> Digraph {
        match self {
            MapModel::Matrix(m) => Digraph::from_pattern(&m.0),
            MapModel::Tensor(t) => t.digraph(),
            MapModel::Expr(e) => e.digraph(),
            MapModel::Builtin(b) => b.digraph(),
        }
    }

    pub fn jacobian(&self, x: &PositiveVector) -> Result<Matrix> {
        self.check_dim(x.dim())?;
        let x = x.as_slice();
        match self {
            MapModel::Matrix(m) => Ok(m.0.clone()),
            MapModel::Tensor(t) => Ok(t.jacobian_raw(x)),
            MapModel::Expr(e) => e.jacobian_raw(x),
            MapModel::Builtin(b) => b.jacobian_raw(x),
        }
    }

    /// `P_J f P_J` viewed as a map on the coordinates in `keep` (sorted,
    /// 0-indexed). Fails with [`Error::NotInteriorPreserving`] when some
    /// kept coordinate vanishes identically.
    pub fn restrict(&self, keep: &[usize]) -> Result<MapModel> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument("restriction to an empty coordinate set".into()));
        }
        if let Some(&j) = keep.iter().find(|&&j| j >= self.dim()) {
            return Err(Error::InvalidArgument(format!("coordinate {} out of range", j + 1)));
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("coordinate set must be sorted and distinct".into()));
        }
        if keep.len() == self.dim() {
            return Ok(self.clone());
        }
        match self {
            MapModel::Matrix(m) => {
                MatrixMap::new(m.0.principal(keep)).map(MapModel::Matrix).map_err(|_| Error::NotInteriorPreserving)
            }
            MapModel::Tensor(t) => t.restrict(keep).map(MapModel::Tensor),
            MapModel::Expr(e) => e.restrict(keep).map(MapModel::Expr),
            MapModel::Builtin(b) => {
                Err(Error::Unsupported(format!("builtin map {b} cannot be restricted to a coordinate subset")))
            }
        }
    }

    /// Whether `log ∘ f ∘ exp` is convex.
    pub fn is_multiplicatively_convex(&self) -> bool {
        match self {
            MapModel::Matrix(_) | MapModel::Tensor(_) => true,
            MapModel::Expr(e) => !e.has_min(),
            MapModel::Builtin(b) => b.is_multiplicatively_convex(),
        }
    }

    pub fn is_analytic(&self) -> bool {
        match self {
            MapModel::Matrix(_) | MapModel::Tensor(_) => true,
            MapModel::Expr(e) => !e.has_min() && !e.has_max(),
            MapModel::Builtin(b) => b.is_analytic(),
        }
    }

    /// A positive eigenvector known in closed form, if any.
    pub fn known_eigenvector(&self) -> Option<PositiveVector> {
        match self {
            MapModel::Builtin(_) => Some(PositiveVector::ones(2)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_4};

    fn pv(v: &[f64]) -> PositiveVector {
        PositiveVector::new(v.to_vec()).unwrap()
    }

    fn sample_tensor() -> MapModel {
        TensorMap::parse_text("3 2\n1 1 1 1\n1 2 2 2\n2 1 2 1\n").unwrap().into()
    }

    #[test]
    fn eval_examples() {
        let a = MapModel::matrix(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.eval(&pv(&[1.0, 1.0])).unwrap().as_slice(), &[3.0, 3.0]);

        let y = sample_tensor().eval(&pv(&[1.0, 1.0])).unwrap();
        assert!((y[0] - 3f64.sqrt()).abs() < 1e-15 && (y[1] - 1.0).abs() < 1e-15);

        let y = MapModel::Builtin(BuiltinMap::ArctanAveraging).eval(&pv(&[1.0 / E, E])).unwrap();
        assert!((y[0] - (-FRAC_PI_4).exp()).abs() < 1e-15);
        assert!((y[1] - FRAC_PI_4.exp()).abs() < 1e-15);
    }

    #[test]
    fn eval_dimension_mismatch() {
        let a = MapModel::matrix(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.eval(&pv(&[1.0])), Err(Error::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn eval_reports_underflow_as_nonpositive_output() {
        let a = MapModel::matrix(vec![vec![1e-200, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(a.eval(&pv(&[1e-200, 1.0])), Err(Error::NonPositiveOutput { coord: 0 }));
    }

    #[test]
    fn matrix_validation() {
        assert!(MapModel::matrix(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).is_err());
        assert!(MapModel::matrix(vec![vec![-1.0, 2.0], vec![1.0, 0.0]]).is_err());
        assert!(MapModel::matrix(vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn digraph_examples() {
        let p = MapModel::matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.digraph().to_string(), "{1→2, 2→1}");
        assert_eq!(sample_tensor().digraph(), Digraph::complete(2));
        assert_eq!(MapModel::Builtin(BuiltinMap::ArctanMax).digraph(), Digraph::complete(2));
    }

    #[test]
    fn jacobian_examples() {
        let a = MapModel::matrix(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(a.jacobian(&pv(&[0.3, 5.0])).unwrap().rows(), vec![vec![2.0, 1.0], vec![1.0, 2.0]]);

        let j = sample_tensor().jacobian(&pv(&[1.0, 1.0])).unwrap();
        let s3 = 3f64.sqrt();
        let want = [[1.0 / s3, 2.0 / s3], [0.5, 0.5]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[(i, k)] - want[i][k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn restriction() {
        let a = MapModel::matrix(vec![vec![1.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(a.restrict(&[1]).unwrap(), MapModel::matrix(vec![vec![2.0]]).unwrap());
        let b = MapModel::matrix(vec![vec![0.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(b.restrict(&[0]), Err(Error::NotInteriorPreserving));
        assert!(a.restrict(&[1, 0]).is_err());
        assert!(MapModel::Builtin(BuiltinMap::ArctanMax).restrict(&[0]).is_err());
    }

    #[test]
    fn class_flags() {
        assert!(sample_tensor().is_multiplicatively_convex());
        assert!(MapModel::Builtin(BuiltinMap::ArctanAveraging).is_analytic());
        assert!(!MapModel::Builtin(BuiltinMap::ArctanAveraging).is_multiplicatively_convex());
        assert!(!MapModel::Builtin(BuiltinMap::ArctanMax).is_analytic());
    }
}
