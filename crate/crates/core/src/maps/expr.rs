//! Expression maps: each coordinate is a tree of sums, maxima and minima
//! over degree-one monomials `c · x^α` with `α ≥ 0`, `Σα = 1`.
//!
//! Sum and Max trees are multiplicatively convex; Min nodes are allowed but
//! fall outside that class, and [`ExprMap::has_min`] lets callers flag it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::topical::{TopicalExpr, TopicalMap};

use super::Digraph;

/// Relative gap below which two branches of a Max/Min count as tied.
pub const TIE_RTOL: f64 = 1e-12;

/// Tolerance on `Σα = 1` for monomial exponents.
const EXPONENT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Monomial { coef: f64, exps: Vec<f64> },
    Sum(Vec<Expr>),
    Max(Vec<Expr>),
    Min(Vec<Expr>),
}

impl Expr {
    /// `coef · x_j`.
    pub fn var(dim: usize, j: usize, coef: f64) -> Self {
        let mut exps = vec![0.0; dim];
        exps[j] = 1.0;
        Expr::Monomial { coef, exps }
    }

    fn validate(&self, dim: usize, path: &str) -> Result<()> {
        match self {
            Expr::Monomial { coef, exps } => {
                if !(coef.is_finite() && *coef > 0.0) {
                    return Err(Error::InvalidModel(format!("{path}: coefficient {coef} must be positive")));
                }
                if exps.len() != dim {
                    return Err(Error::InvalidModel(format!(
                        "{path}: exponent vector has {} entries, expected {dim}",
                        exps.len()
                    )));
                }
                if exps.iter().any(|a| !a.is_finite() || *a < 0.0) {
                    return Err(Error::InvalidModel(format!("{path}: exponents must be nonnegative")));
                }
                let total: f64 = exps.iter().sum();
                if (total - 1.0).abs() > EXPONENT_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "{path}: exponents sum to {total}, must sum to 1 for degree-one homogeneity"
                    )));
                }
                Ok(())
            }
            Expr::Sum(ch) | Expr::Max(ch) | Expr::Min(ch) => {
                if ch.is_empty() {
                    return Err(Error::InvalidModel(format!("{path}: node has no children")));
                }
                for (k, c) in ch.iter().enumerate() {
                    c.validate(dim, &format!("{path}[{}]", k + 1))?;
                }
                Ok(())
            }
        }
    }

    /// Value on the closed orthant, with `0^0 = 1`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Monomial { coef, exps } => {
                coef * exps
                    .iter()
                    .zip(x)
                    .filter(|(a, _)| **a > 0.0)
                    .map(|(a, v)| v.powf(*a))
                    .product::<f64>()
            }
            Expr::Sum(ch) => ch.iter().map(|c| c.eval(x)).sum(),
            Expr::Max(ch) => ch.iter().map(|c| c.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            Expr::Min(ch) => ch.iter().map(|c| c.eval(x)).fold(f64::INFINITY, f64::min),
        }
    }

    /// Value and gradient at an interior point. Fails on Max/Min ties.
    fn eval_grad(&self, x: &[f64], coord: usize) -> Result<(f64, Vec<f64>)> {
        match self {
            Expr::Monomial { .. } => {
                let v = self.eval(x);
                let Expr::Monomial { exps, .. } = self else { unreachable!() };
                Ok((v, exps.iter().zip(x).map(|(a, xi)| a * v / xi).collect()))
            }
            Expr::Sum(ch) => {
                let mut total = 0.0;
                let mut grad = vec![0.0; x.len()];
                for c in ch {
                    let (v, g) = c.eval_grad(x, coord)?;
                    total += v;
                    grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
                Ok((total, grad))
            }
            Expr::Max(ch) | Expr::Min(ch) => {
                let is_max = matches!(self, Expr::Max(_));
                let vals: Vec<f64> = ch.iter().map(|c| c.eval(x)).collect();
                let better = |a: f64, b: f64| if is_max { a > b } else { a < b };
                let mut best = 0;
                for k in 1..vals.len() {
                    if better(vals[k], vals[best]) {
                        best = k;
                    }
                }
                let scale = vals[best].abs();
                if vals
                    .iter()
                    .enumerate()
                    .any(|(k, v)| k != best && (v - vals[best]).abs() <= TIE_RTOL * scale)
                {
                    return Err(Error::NotDifferentiable { coord });
                }
                ch[best].eval_grad(x, coord)
            }
        }
    }

    /// Coordinates `j` with `lim_{t→∞} expr(exp(t e_j)) = ∞`.
    fn unbounded_directions(&self, dim: usize) -> Vec<bool> {
        match self {
            Expr::Monomial { exps, .. } => exps.iter().map(|a| *a > 0.0).collect(),
            Expr::Sum(ch) | Expr::Max(ch) => ch.iter().fold(vec![false; dim], |acc, c| {
                acc.iter().zip(c.unbounded_directions(dim)).map(|(a, b)| *a || b).collect()
            }),
            Expr::Min(ch) => ch.iter().fold(vec![true; dim], |acc, c| {
                acc.iter().zip(c.unbounded_directions(dim)).map(|(a, b)| *a && b).collect()
            }),
        }
    }

    /// Substitutes `x_j = 0` outside `keep` and renumbers. `None` when the
    /// result vanishes identically.
    fn restrict(&self, keep: &[usize]) -> Option<Expr> {
        match self {
            Expr::Monomial { coef, exps } => {
                let kept: f64 = keep.iter().map(|&j| exps[j]).sum();
                let total: f64 = exps.iter().sum();
                if exps.iter().enumerate().any(|(j, a)| *a > 0.0 && !keep.contains(&j)) {
                    return None;
                }
                debug_assert!((kept - total).abs() < 1e-12);
                Some(Expr::Monomial { coef: *coef, exps: keep.iter().map(|&j| exps[j]).collect() })
            }
            Expr::Sum(ch) | Expr::Max(ch) => {
                let kept: Vec<Expr> = ch.iter().filter_map(|c| c.restrict(keep)).collect();
                if kept.is_empty() {
                    None
                } else if matches!(self, Expr::Sum(_)) {
                    Some(Expr::Sum(kept))
                } else {
                    Some(Expr::Max(kept))
                }
            }
            Expr::Min(ch) => ch.iter().map(|c| c.restrict(keep)).collect::<Option<Vec<_>>>().map(Expr::Min),
        }
    }

    fn contains(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        pred(self)
            || match self {
                Expr::Monomial { .. } => false,
                Expr::Sum(ch) | Expr::Max(ch) | Expr::Min(ch) => ch.iter().any(|c| c.contains(pred)),
            }
    }

    fn to_topical(&self) -> TopicalExpr {
        match self {
            Expr::Monomial { coef, exps } => TopicalExpr::Affine { coeffs: exps.clone(), offset: coef.ln() },
            Expr::Sum(ch) => TopicalExpr::LogSumExp(ch.iter().map(Expr::to_topical).collect()),
            Expr::Max(ch) => TopicalExpr::Max(ch.iter().map(Expr::to_topical).collect()),
            Expr::Min(ch) => TopicalExpr::Min(ch.iter().map(Expr::to_topical).collect()),
        }
    }
}

/// An order-preserving, degree-one homogeneous map given coordinatewise by
/// expression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprMap {
    dim: usize,
    coords: Vec<Expr>,
}

impl ExprMap {
    pub fn new(coords: Vec<Expr>) -> Result<Self> {
        let dim = coords.len();
        if dim == 0 {
            return Err(Error::InvalidModel("expression map needs at least one coordinate".into()));
        }
        for (i, e) in coords.iter().enumerate() {
            e.validate(dim, &format!("coordinate {}", i + 1))?;
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[Expr] {
        &self.coords
    }

    pub fn has_min(&self) -> bool {
        self.coords.iter().any(|e| e.contains(&|n| matches!(n, Expr::Min(_))))
    }

    pub fn has_max(&self) -> bool {
        self.coords.iter().any(|e| e.contains(&|n| matches!(n, Expr::Max(_))))
    }

    pub fn has_sum(&self) -> bool {
        self.coords.iter().any(|e| e.contains(&|n| matches!(n, Expr::Sum(_))))
    }

    pub(crate) fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|e| e.eval(x)).collect()
    }

    pub(crate) fn jacobian_raw(&self, x: &[f64]) -> Result<Matrix> {
        let mut jac = Matrix::zeros(self.dim);
        for (i, e) in self.coords.iter().enumerate() {
            let (_, g) = e.eval_grad(x, i)?;
            for (j, v) in g.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }

    /// Arcs by the limit semantics: monomials contribute their support,
    /// Sum and Max take unions, Min takes intersections.
    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::empty(self.dim);
        for (i, e) in self.coords.iter().enumerate() {
            for (j, hit) in e.unbounded_directions(self.dim).into_iter().enumerate() {
                if hit {
                    g.add_arc(i, j);
                }
            }
        }
        g
    }

    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let coords = keep
            .iter()
            .map(|&i| self.coords[i].restrict(keep))
            .collect::<Option<Vec<_>>>()
            .ok_or(Error::NotInteriorPreserving)?;
        Self::new(coords)
    }

    /// The conjugate map `T = log ∘ f ∘ exp` on real n-space.
    ///
    /// Monomials become affine terms with stochastic coefficient rows, Max
    /// and Min carry over, and Sum becomes log-sum-exp. Without Sum nodes
    /// the result is piecewise affine.
    pub fn log_conjugate(&self) -> TopicalMap {
        TopicalMap::from_exprs(self.coords.iter().map(Expr::to_topical).collect())
            .expect("conjugate of a valid expression map is a valid topical map")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(coef: f64, exps: &[f64]) -> Expr {
        Expr::Monomial { coef, exps: exps.to_vec() }
    }

    #[test]
    fn validation() {
        assert!(ExprMap::new(vec![mono(1.0, &[0.5, 0.6]), mono(1.0, &[0.0, 1.0])]).is_err());
        assert!(ExprMap::new(vec![mono(0.0, &[1.0, 0.0]), mono(1.0, &[0.0, 1.0])]).is_err());
        assert!(ExprMap::new(vec![Expr::Max(vec![]), mono(1.0, &[0.0, 1.0])]).is_err());
        assert!(ExprMap::new(vec![mono(1.0, &[1.0]), mono(1.0, &[0.0, 1.0])]).is_err());
    }

    #[test]
    fn min_uses_intersection() {
        let f = ExprMap::new(vec![
            Expr::Min(vec![Expr::var(2, 0, 1.0), Expr::var(2, 1, 1.0)]),
            Expr::var(2, 1, 1.0),
        ])
        .unwrap();
        assert_eq!(f.digraph(), Digraph::from_arcs(2, [(1, 1)]).unwrap());
        assert!(f.has_min());
    }

    #[test]
    fn max_and_sum_use_union() {
        let f = ExprMap::new(vec![
            Expr::Max(vec![Expr::var(3, 0, 1.0), Expr::var(3, 1, 1.0)]),
            Expr::Sum(vec![mono(1.0, &[0.0, 0.5, 0.5]), Expr::var(3, 1, 2.0)]),
            Expr::var(3, 2, 1.0),
        ])
        .unwrap();
        let want = Digraph::from_arcs(3, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]).unwrap();
        assert_eq!(f.digraph(), want);
    }

    #[test]
    fn gradient_of_max_follows_active_branch() {
        let f = ExprMap::new(vec![
            Expr::Max(vec![Expr::var(2, 0, 1.0), mono(1.0, &[0.5, 0.5])]),
            Expr::var(2, 1, 1.0),
        ])
        .unwrap();
        let jac = f.jacobian_raw(&[1.0, 4.0]).unwrap();
        assert_eq!(jac.rows(), vec![vec![1.0, 0.25], vec![0.0, 1.0]]);
        assert_eq!(f.jacobian_raw(&[1.0, 1.0]), Err(Error::NotDifferentiable { coord: 0 }));
    }

    #[test]
    fn restriction_drops_vanishing_branches() {
        let f = ExprMap::new(vec![
            Expr::Max(vec![Expr::var(2, 0, 1.0), Expr::var(2, 1, 3.0)]),
            Expr::Min(vec![Expr::var(2, 0, 1.0), Expr::var(2, 1, 1.0)]),
        ])
        .unwrap();
        let r = f.restrict(&[0]).unwrap();
        assert_eq!(r.coords(), &[Expr::Max(vec![mono(1.0, &[1.0])])]);
        assert_eq!(f.restrict(&[1]), Err(Error::NotInteriorPreserving));
    }
}
