//! Monotone, sup-norm nonexpansive maps on real n-space built from maxima
//! and minima of affine terms `a·x + b` with `a ≥ 0`, `Σa ≤ 1`.
//!
//! When every coefficient row sums to exactly 1 the map is additively
//! homogeneous (topical): `F(x + c𝟏) = F(x) + c𝟏`. Rows summing to less than
//! one (constant terms in particular) keep monotonicity and nonexpansiveness
//! but give up additive homogeneity.
//!
//! Besides evaluation this module provides averaged fixed-point iteration,
//! cycle-time vectors `lim F^k(x)/k`, checks of invariant half-lines
//! `F(v + tw) = v + (t+1)w`, the reduction `G = F − w`, and an empirical
//! check that a converging orbit contracts by a fixed factor every `m` steps.

use serde::{Deserialize, Serialize};

use crate::cone::sup_norm;
use crate::error::{Error, Result};

/// Tolerance on coefficient row sums.
const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TopicalExpr {
    Affine { coeffs: Vec<f64>, offset: f64 },
    Max(Vec<TopicalExpr>),
    Min(Vec<TopicalExpr>),
    /// `log Σ exp(child)`; the image of a Sum node under log-conjugation.
    LogSumExp(Vec<TopicalExpr>),
}

impl TopicalExpr {
    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Self {
        TopicalExpr::Affine { coeffs, offset }
    }

    /// `x_j + offset`.
    pub fn var(dim: usize, j: usize, offset: f64) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[j] = 1.0;
        TopicalExpr::Affine { coeffs, offset }
    }

    /// The constant `c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        TopicalExpr::Affine { coeffs: vec![0.0; dim], offset: c }
    }

    fn validate(&self, dim: usize, path: &str) -> Result<()> {
        match self {
            TopicalExpr::Affine { coeffs, offset } => {
                if coeffs.len() != dim {
                    return Err(Error::InvalidModel(format!(
                        "{path}: coefficient row has {} entries, expected {dim}",
                        coeffs.len()
                    )));
                }
                if coeffs.iter().any(|a| !a.is_finite() || *a < 0.0) {
                    return Err(Error::InvalidModel(format!("{path}: coefficients must be nonnegative")));
                }
                let s: f64 = coeffs.iter().sum();
                if s > 1.0 + ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "{path}: coefficients sum to {s}; rows must sum to at most 1"
                    )));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidModel(format!("{path}: offset must be finite")));
                }
                Ok(())
            }
            TopicalExpr::Max(ch) | TopicalExpr::Min(ch) | TopicalExpr::LogSumExp(ch) => {
                if ch.is_empty() {
                    return Err(Error::InvalidModel(format!("{path}: node has no children")));
                }
                ch.iter().enumerate().try_for_each(|(k, c)| c.validate(dim, &format!("{path}[{}]", k + 1)))
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TopicalExpr::Affine { coeffs, offset } => coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + offset,
            TopicalExpr::Max(ch) => ch.iter().map(|c| c.eval(x)).fold(f64::NEG_INFINITY, f64::max),
            TopicalExpr::Min(ch) => ch.iter().map(|c| c.eval(x)).fold(f64::INFINITY, f64::min),
            TopicalExpr::LogSumExp(ch) => {
                let vals: Vec<f64> = ch.iter().map(|c| c.eval(x)).collect();
                let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + vals.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
            }
        }
    }

    fn any(&self, pred: &dyn Fn(&TopicalExpr) -> bool) -> bool {
        pred(self)
            || match self {
                TopicalExpr::Affine { .. } => false,
                TopicalExpr::Max(ch) | TopicalExpr::Min(ch) | TopicalExpr::LogSumExp(ch) => {
                    ch.iter().any(|c| c.any(pred))
                }
            }
    }

    fn map_leaves(&self, leaf: &dyn Fn(&[f64], f64) -> TopicalExpr) -> TopicalExpr {
        match self {
            TopicalExpr::Affine { coeffs, offset } => leaf(coeffs, *offset),
            TopicalExpr::Max(ch) => TopicalExpr::Max(ch.iter().map(|c| c.map_leaves(leaf)).collect()),
            TopicalExpr::Min(ch) => TopicalExpr::Min(ch.iter().map(|c| c.map_leaves(leaf)).collect()),
            TopicalExpr::LogSumExp(ch) => TopicalExpr::LogSumExp(ch.iter().map(|c| c.map_leaves(leaf)).collect()),
        }
    }
}

/// A coordinatewise min-max-affine (or log-sum-exp) map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicalMap {
    dim: usize,
    coords: Vec<TopicalExpr>,
}

impl TopicalMap {
    pub fn from_exprs(coords: Vec<TopicalExpr>) -> Result<Self> {
        let dim = coords.len();
        if dim == 0 {
            return Err(Error::InvalidModel("map needs at least one coordinate".into()));
        }
        for (i, c) in coords.iter().enumerate() {
            c.validate(dim, &format!("coordinate {}", i + 1))?;
        }
        Ok(Self { dim, coords })
    }

    /// Parses the action-table text format, one action per line:
    ///
    /// ```text
    /// # state; action; reward; probabilities
    /// 1; stay; 0.0; 1.0 0.0
    /// 1; move; -0.5; 0.0 1.0
    /// 2; stay; 0.0; 0.0 1.0
    /// ```
    ///
    /// States are 1-indexed; each state's coordinate is the maximum over its
    /// actions of `reward + probabilities · x`.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, usize, TopicalExpr)> = Vec::new();
        let mut n: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: lineno + 1, message };
            let fields: Vec<&str> = line.split(';').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(err(format!("expected \"state; action; reward; probabilities\", found {line:?}")));
            }
            let state: usize = fields[0].parse().map_err(|_| err(format!("bad state {:?}", fields[0])))?;
            let reward: f64 = fields[2].parse().map_err(|_| err(format!("bad reward {:?}", fields[2])))?;
            let probs = fields[3]
                .split_whitespace()
                .map(|p| p.parse::<f64>().map_err(|_| err(format!("bad probability {p:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let dim = *n.get_or_insert(probs.len());
            if probs.len() != dim {
                return Err(err(format!("expected {dim} probabilities, found {}", probs.len())));
            }
            if state == 0 || state > dim {
                return Err(err(format!("state {state} out of range 1..={dim}")));
            }
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(err("probabilities must be nonnegative".into()));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(err(format!("probabilities sum to {total}, expected 1")));
            }
            if !reward.is_finite() {
                return Err(err("reward must be finite".into()));
            }
            rows.push((state - 1, lineno + 1, TopicalExpr::affine(probs, reward)));
        }
        let dim = n.ok_or(Error::Parse { line: 1, message: "table has no actions".into() })?;
        let mut per_state: Vec<Vec<TopicalExpr>> = vec![Vec::new(); dim];
        for (s, _, e) in rows {
            per_state[s].push(e);
        }
        if let Some(s) = per_state.iter().position(Vec::is_empty) {
            return Err(Error::Parse { line: 1, message: format!("state {} has no actions", s + 1) });
        }
        Self::from_exprs(per_state.into_iter().map(TopicalExpr::Max).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[TopicalExpr] {
        &self.coords
    }

    /// No log-sum-exp nodes.
    pub fn is_piecewise_affine(&self) -> bool {
        !self.coords.iter().any(|c| c.any(&|e| matches!(e, TopicalExpr::LogSumExp(_))))
    }

    /// Every coefficient row sums to 1.
    pub fn is_additively_homogeneous(&self) -> bool {
        !self.coords.iter().any(|c| {
            c.any(&|e| match e {
                TopicalExpr::Affine { coeffs, .. } => (coeffs.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL,
                _ => false,
            })
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self.coords.iter().map(|c| c.eval(x)).collect())
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.coords.iter().map(|c| c.eval(x)).collect()
    }

    /// `G(x) = F(x) − w`.
    pub fn shifted(&self, w: &[f64]) -> Result<Self> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: w.len() });
        }
        let coords = self
            .coords
            .iter()
            .zip(w)
            .map(|(c, &wi)| c.map_leaves(&|a, b| TopicalExpr::affine(a.to_vec(), b - wi)))
            .collect();
        Self::from_exprs(coords)
    }

    /// `λF + (1 − λ) id`, pushed into the leaves so the result is again
    /// min-max-affine. Requires a piecewise-affine map and `λ ∈ (0, 1]`.
    pub fn averaged(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!("averaging weight {lambda} must lie in (0, 1]")));
        }
        if !self.is_piecewise_affine() {
            return Err(Error::Unsupported("averaging a map with log-sum-exp nodes".into()));
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.map_leaves(&|a, b| {
                    let mut coeffs: Vec<f64> = a.iter().map(|v| lambda * v).collect();
                    coeffs[i] += 1.0 - lambda;
                    TopicalExpr::affine(coeffs, lambda * b)
                })
            })
            .collect();
        Self::from_exprs(coords)
    }
}

/// Applies `f` `k` times.
pub fn iterate_topical(f: &TopicalMap, x0: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut x = f.eval(x0)?;
    for _ in 1..k {
        x = f.apply(&x);
    }
    Ok(if k == 0 { x0.to_vec() } else { x })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmOptions {
    /// Stop when `‖F(x) − x‖∞` falls below this.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Weight on `F` in `x ← λF(x) + (1 − λ)x`.
    pub lambda: f64,
    /// Horizon for the cycle-time estimate reported on failure.
    pub cycle_time_horizon: usize,
}

impl Default for KmOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iters: 100_000, lambda: 0.5, cycle_time_horizon: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmReport {
    pub converged: bool,
    /// The fixed point when converged, otherwise the last iterate.
    pub point: Vec<f64>,
    /// `‖F(point) − point‖∞`.
    pub residual: f64,
    pub iterations: usize,
    /// `F^K(x0)/K`, attached when no fixed point was found.
    pub cycle_time: Option<Vec<f64>>,
}

/// Averaged (Krasnoselskii–Mann) iteration `x ← ½x + ½F(x)`.
pub fn km_fixed_point(f: &TopicalMap, x0: &[f64], opts: &KmOptions) -> Result<KmReport> {
    if !(opts.lambda > 0.0 && opts.lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("averaging weight {} must lie in (0, 1)", opts.lambda)));
    }
    let mut x = x0.to_vec();
    let mut fx = f.eval(&x)?;
    for k in 0..opts.max_iters {
        let residual = sup_dist(&fx, &x);
        if residual < opts.tolerance {
            return Ok(KmReport { converged: true, point: x, residual, iterations: k, cycle_time: None });
        }
        for (xi, fi) in x.iter_mut().zip(&fx) {
            *xi = (1.0 - opts.lambda) * *xi + opts.lambda * fi;
        }
        fx = f.apply(&x);
    }
    let residual = sup_dist(&fx, &x);
    let converged = residual < opts.tolerance;
    let cycle_time = if converged { None } else { Some(cycle_time(f, x0, opts.cycle_time_horizon.max(100))?) };
    Ok(KmReport { converged, point: x, residual, iterations: opts.max_iters, cycle_time })
}

/// `F^K(x0)/K`, an estimate of the cycle-time vector within `O(1/K)`.
pub fn cycle_time(f: &TopicalMap, x0: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 100 {
        return Err(Error::InvalidArgument(format!("cycle-time horizon must be at least 100, got {k}")));
    }
    let xk = iterate_topical(f, x0, k)?;
    Ok(xk.into_iter().map(|v| v / k as f64).collect())
}

/// A candidate invariant half-line `t ↦ v + tw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLine {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    verified: bool,
}

impl HalfLine {
    pub fn new(v: Vec<f64>, w: Vec<f64>) -> Self {
        Self { v, w, verified: false }
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    /// Runs [`half_line_check`] and records the outcome.
    pub fn verify(&mut self, f: &TopicalMap, grid: &[f64]) -> Result<bool> {
        self.verified = half_line_check(f, self, grid)?;
        Ok(self.verified)
    }
}

/// Largest violation tolerated by [`half_line_check`].
pub const HALF_LINE_TOL: f64 = 1e-10;

/// Whether `F(v + tw) = v + (t+1)w` holds within `1e-10` at every `t` in
/// `grid` (at least 10 nonnegative points).
pub fn half_line_check(f: &TopicalMap, h: &HalfLine, grid: &[f64]) -> Result<bool> {
    if grid.len() < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 sample points, got {}", grid.len())));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("sample points must be finite and nonnegative".into()));
    }
    if h.v.len() != f.dim() || h.w.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: h.v.len().max(h.w.len()) });
    }
    for &t in grid {
        let p: Vec<f64> = h.v.iter().zip(&h.w).map(|(v, w)| v + t * w).collect();
        let fp = f.apply(&p);
        let err = fp.iter().zip(h.v.iter().zip(&h.w)).map(|(y, (v, w))| (y - v - (t + 1.0) * w).abs());
        if err.fold(0.0, f64::max) > HALF_LINE_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `t = 0, 1, …, 10` followed by a geometric tail up to `1e6`.
pub fn default_half_line_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=10).map(f64::from).collect();
    g.extend([30.0, 100.0, 1e3, 1e4, 1e5, 1e6]);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfLineReduction {
    /// `G(x) = F(x) − w`.
    pub reduced: TopicalMap,
    /// Burn-in after which `F^{k+m}(x) = G^k(F^m(x)) + kw` held for `k ≤ 20`.
    pub burn_in: usize,
}

/// Largest burn-in tried by [`reduce_by_half_line`].
pub const MAX_BURN_IN: usize = 1 << 14;

/// Builds `G = F − w` and finds, by doubling, a burn-in `m` such that
/// `F^{k+m}(x) = G^k(F^m(x)) + kw` within `1e-8` for `k ≤ 20` at every start.
pub fn reduce_by_half_line(f: &TopicalMap, w: &[f64], starts: &[Vec<f64>]) -> Result<HalfLineReduction> {
    let g = f.shifted(w)?;
    if starts.is_empty() {
        return Err(Error::InvalidArgument("need at least one start point".into()));
    }
    let mut m = 0;
    loop {
        if starts.iter().map(|x| identity_holds(f, &g, w, x, m)).collect::<Result<Vec<_>>>()?.iter().all(|&b| b) {
            return Ok(HalfLineReduction { reduced: g, burn_in: m });
        }
        m = if m == 0 { 1 } else { 2 * m };
        if m > MAX_BURN_IN {
            return Err(Error::Numerical(format!(
                "F^(k+m)(x) = G^k(F^m(x)) + kw failed for every m ≤ {MAX_BURN_IN}; w is probably not the cycle-time vector"
            )));
        }
    }
}

fn identity_holds(f: &TopicalMap, g: &TopicalMap, w: &[f64], x: &[f64], m: usize) -> Result<bool> {
    let y = iterate_topical(f, x, m)?;
    let mut fk = y.clone();
    let mut gk = y;
    for k in 1..=20 {
        fk = f.apply(&fk);
        gk = g.apply(&gk);
        let scale = 1.0 + sup_norm(&fk);
        let bad = fk.iter().zip(&gk).zip(w).any(|((a, b), wi)| (a - b - k as f64 * wi).abs() > 1e-8 * scale);
        if bad {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearOptions {
    pub max_iters: usize,
    /// Distances at or below `floor · max(1, ‖u‖∞)` count as converged. The
    /// floor is raised to `1000·‖F(u) − u‖∞` when `u` is only approximate.
    pub floor: f64,
}

impl Default for LocalLinearOptions {
    fn default() -> Self {
        Self { max_iters: 100_000, floor: 1e-13 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearRate {
    /// Step count `m` with `‖F^{k+m}(x) − u‖ ≤ γ‖F^k(x) − u‖` on the tail.
    pub m: usize,
    pub gamma: f64,
    /// The orbit reached `u` (to the floor) after finitely many steps.
    pub finite_convergence: bool,
}

/// Searches `m ∈ {1, 2, 4, …, 256}` for the smallest step count over which
/// the tail of the orbit of `x0` contracts towards `u` by a factor `γ < 1`.
pub fn verify_local_linear(
    f: &TopicalMap,
    u: &[f64],
    x0: &[f64],
    opts: &LocalLinearOptions,
) -> Result<LocalLinearRate> {
    if !f.is_piecewise_affine() {
        return Err(Error::Unsupported("local linear rate check needs a piecewise-affine map".into()));
    }
    if u.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), found: u.len() });
    }
    // an approximate u limits how close the orbit can appear to get
    let residual = sup_dist(&f.eval(u)?, u);
    let floor = (opts.floor * sup_norm(u).max(1.0)).max(1e3 * residual);
    let mut dist = Vec::new();
    let mut x = f.eval(x0)?;
    dist.push(sup_dist(x0, u));
    while *dist.last().unwrap() > floor && dist.len() <= opts.max_iters {
        dist.push(sup_dist(&x, u));
        x = f.apply(&x);
    }
    let last = *dist.last().unwrap();
    if last > floor.max(1e-8 * sup_norm(u).max(1.0)) {
        return Err(Error::Numerical(format!(
            "orbit did not reach the fixed point (distance {last:e} after {} steps)",
            dist.len() - 1
        )));
    }
    let live: Vec<usize> = (0..dist.len()).filter(|&k| dist[k] > floor).collect();
    let finite_convergence = last == 0.0;
    if live.is_empty() {
        return Ok(LocalLinearRate { m: 1, gamma: 0.0, finite_convergence });
    }
    let tail = &live[live.len() / 2..];
    let end = dist.len() - 1;
    for m in (0..=8).map(|p| 1usize << p) {
        // distances are nonincreasing, so past the end of the record the
        // last distance bounds them
        let gamma = tail.iter().map(|&k| dist[(k + m).min(end)] / dist[k]).fold(0.0, f64::max);
        if gamma < 1.0 {
            return Ok(LocalLinearRate { m, gamma, finite_convergence });
        }
    }
    Err(Error::Numerical("no m ≤ 256 with a contraction factor below 1 on the orbit tail".into()))
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
