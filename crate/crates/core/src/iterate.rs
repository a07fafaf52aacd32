//! Normalized power iteration `x ← f(x)/‖f(x)‖∞` and its damped variant
//! `x ← normalize(λ f(x)/M_k + (1 − λ) x)`, with Collatz–Wielandt brackets,
//! orbit recording and detection of periodic orbits.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{hilbert_raw, ratio_max, ratio_min, PositiveVector};
use crate::error::{Error, Result};
use crate::maps::MapModel;

/// Iterates whose smallest entry falls below this are treated as having
/// left the open orthant.
pub const BOUNDARY_FLOOR: f64 = 1e-250;

pub const DEFAULT_PERIOD_WINDOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once `d_H(x_k, f(x_k)) < tolerance`.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Weight `λ ∈ (0, 1)` on the rescaled map; `None` for plain iteration.
    pub damping: Option<f64>,
    pub record_trace: bool,
    /// Seed for random starts.
    pub seed: u64,
    /// Longest period looked for; orbits are checked every `period_window`
    /// steps once `2·period_window` iterates are available.
    pub period_window: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iters: 100_000,
            damping: None,
            record_trace: false,
            seed: 0,
            period_window: DEFAULT_PERIOD_WINDOW,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!("tolerance {} must lie in (0, 1)", self.tolerance)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if let Some(l) = self.damping {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::InvalidArgument(format!("damping {l} must lie in (0, 1)")));
            }
        }
        if self.period_window == 0 {
            return Err(Error::InvalidArgument("period window must be positive".into()));
        }
        Ok(())
    }
}

/// Recorded orbit. `iterates` holds `x_0, …, x_K` (sup-normalized); the
/// per-step vectors hold `K` entries describing step `k → k+1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub iterates: Vec<PositiveVector>,
    /// `M(f(x_k)/x_k)`.
    pub max_ratio: Vec<f64>,
    /// `m(f(x_k)/x_k)`.
    pub min_ratio: Vec<f64>,
    /// `d_H(x_k, x_{k+1})`.
    pub d_hilbert_step: Vec<f64>,
    /// `‖f(x_k)‖∞`, so that `f^k(x_0) = x_k · Π_{i<k} norms_i`.
    pub norms: Vec<f64>,
}

impl OrbitTrace {
    pub fn steps(&self) -> usize {
        self.max_ratio.len()
    }

    /// CSV with columns `k, x_1..x_n, M_k, m_k, dH_step`, one row per step.
    pub fn to_csv(&self) -> String {
        let n = self.iterates.first().map_or(0, PositiveVector::dim);
        let mut out = String::from("k");
        for i in 1..=n {
            let _ = write!(out, ",x_{i}");
        }
        out.push_str(",M_k,m_k,dH_step\n");
        for k in 0..self.steps() {
            let _ = write!(out, "{k}");
            for v in self.iterates[k].as_slice() {
                let _ = write!(out, ",{v:e}");
            }
            let _ = writeln!(out, ",{:e},{:e},{:e}", self.max_ratio[k], self.min_ratio[k], self.d_hilbert_step[k]);
        }
        out
    }

    fn push_step(&mut self, x: &[f64], fx_norm: f64, upper: f64, lower: f64, step: f64) {
        self.iterates.push(PositiveVector::new(x.to_vec()).expect("iterate stays positive"));
        self.norms.push(fx_norm);
        self.max_ratio.push(upper);
        self.min_ratio.push(lower);
        self.d_hilbert_step.push(step);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIters,
    /// Stopped early on a detected periodic orbit.
    Periodic(usize),
    /// Some coordinate fell below [`BOUNDARY_FLOOR`].
    BoundaryEscape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// The eigenvector when converged, otherwise the last iterate.
    pub eigenvector: PositiveVector,
    /// `[m(f(u)/u), M(f(u)/u)]`.
    pub eigenvalue_bracket: (f64, f64),
    pub converged: bool,
    pub iterations: usize,
    pub trace: Option<OrbitTrace>,
    pub period_detected: Option<usize>,
    pub termination: Termination,
}

impl SolveResult {
    /// Midpoint of the eigenvalue bracket.
    pub fn eigenvalue(&self) -> f64 {
        0.5 * (self.eigenvalue_bracket.0 + self.eigenvalue_bracket.1)
    }
}

/// `x_{k+1} = f(x_k)/‖f(x_k)‖∞`.
pub fn iterate_normalized(map: &MapModel, x0: &PositiveVector, opts: &SolveOptions) -> Result<SolveResult> {
    run(map, x0, &SolveOptions { damping: None, ..*opts }, true)
}

/// `x_{k+1} = normalize(λ f(x_k)/M_k + (1 − λ) x_k)` with `M_k = M(f(x_k)/x_k)`.
pub fn iterate_damped(map: &MapModel, x0: &PositiveVector, opts: &SolveOptions) -> Result<SolveResult> {
    if opts.damping.is_none() {
        return Err(Error::InvalidArgument("damped iteration needs a damping weight".into()));
    }
    run(map, x0, opts, true)
}

/// Damped when `opts.damping` is set, plain otherwise.
pub fn solve(map: &MapModel, x0: &PositiveVector, opts: &SolveOptions) -> Result<SolveResult> {
    run(map, x0, opts, true)
}

fn eval_checked(map: &MapModel, x: &[f64]) -> Result<Vec<f64>> {
    let y = map.eval_nonneg(x)?;
    if y.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical("map evaluation produced NaN".into()));
    }
    if y.iter().any(|v| v.is_infinite()) {
        return Err(Error::Numerical("map evaluation overflowed".into()));
    }
    Ok(y)
}

fn normalize(v: &mut [f64]) -> f64 {
    let s = v.iter().copied().fold(0.0, f64::max);
    v.iter_mut().for_each(|x| *x /= s);
    s
}

fn run(map: &MapModel, x0: &PositiveVector, opts: &SolveOptions, stop_when_converged: bool) -> Result<SolveResult> {
    opts.validate()?;
    if x0.dim() != map.dim() {
        return Err(Error::DimensionMismatch { expected: map.dim(), found: x0.dim() });
    }
    let mut x = x0.as_slice().to_vec();
    normalize(&mut x);
    let window = opts.period_window;
    let mut recent: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::with_capacity((2 * window).min(1024));
    let mut trace = opts.record_trace.then(OrbitTrace::default);
    let mut termination = Termination::MaxIters;
    let mut period_detected = None;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let fx = eval_checked(map, &x)?;
        if fx.iter().any(|&v| v <= 0.0) {
            termination = Termination::BoundaryEscape;
            break;
        }
        let upper = ratio_max(&fx, &x);
        let lower = ratio_min(&fx, &x);
        let residual = ((upper - lower) / lower).ln_1p();
        let fx_norm = fx.iter().copied().fold(0.0, f64::max);
        let mut next: Vec<f64> = match opts.damping {
            None => fx,
            Some(l) => fx.iter().zip(&x).map(|(f, v)| l * f / upper + (1.0 - l) * v).collect(),
        };
        normalize(&mut next);
        if let Some(t) = trace.as_mut() {
            t.push_step(&x, fx_norm, upper, lower, hilbert_raw(&x, &next));
        }
        iterations += 1;
        let converged = stop_when_converged && residual < opts.tolerance;
        x = next;
        if converged {
            termination = Termination::Converged;
            break;
        }
        if x.iter().any(|&v| v < BOUNDARY_FLOOR) {
            termination = Termination::BoundaryEscape;
            break;
        }
        if recent.len() == 2 * window {
            recent.pop_front();
        }
        recent.push_back(x.clone());
        if recent.len() == 2 * window && iterations % window == 0 {
            let buf: Vec<&[f64]> = recent.iter().map(Vec::as_slice).collect();
            if let Some(p) = period_of_tail(&buf, window, opts.tolerance).filter(|&p| p > 1) {
                period_detected = Some(p);
                termination = Termination::Periodic(p);
                break;
            }
        }
    }

    if termination == Termination::MaxIters && recent.len() >= 2 {
        let buf: Vec<&[f64]> = recent.iter().map(Vec::as_slice).collect();
        period_detected = period_of_tail(&buf, window.min(buf.len() / 2), opts.tolerance);
    }
    if termination == Termination::Converged {
        period_detected = Some(1);
    }

    let converged = termination == Termination::Converged;
    let eigenvalue_bracket = match eval_checked(map, &x) {
        Ok(fx) => (ratio_min(&fx, &x), ratio_max(&fx, &x)),
        Err(_) => (0.0, f64::INFINITY),
    };
    if let Some(t) = trace.as_mut() {
        t.iterates.push(PositiveVector::new(x.clone()).map_err(|_| Error::Numerical("iterate left the orthant".into()))?);
    }
    let eigenvector = match PositiveVector::new(x) {
        Ok(v) => v,
        Err(_) => return Err(Error::Numerical("iterate left the open orthant".into())),
    };
    Ok(SolveResult { eigenvector, eigenvalue_bracket, converged, iterations, trace, period_detected, termination })
}

/// Smallest `p ≤ window` with `d_H(x_k, x_{k+p}) < tolerance` for every `k`
/// in the last window of the trace. The window shrinks to half the trace
/// length when the trace is short.
pub fn detect_period(trace: &OrbitTrace, window: usize, tolerance: f64) -> Option<usize> {
    let buf: Vec<&[f64]> = trace.iterates.iter().map(PositiveVector::as_slice).collect();
    period_of_tail(&buf, window.min(buf.len() / 2), tolerance)
}

fn period_of_tail(buf: &[&[f64]], window: usize, tolerance: f64) -> Option<usize> {
    if window == 0 || buf.len() < 2 * window {
        return None;
    }
    let len = buf.len();
    (1..=window).find(|&p| (len - window - p..len - p).all(|k| hilbert_raw(buf[k], buf[k + p]) < tolerance))
}

/// Runs `steps` plain normalized steps and records them. Stops early only
/// at the boundary.
pub fn record_orbit(map: &MapModel, x0: &PositiveVector, steps: usize) -> Result<OrbitTrace> {
    let opts = SolveOptions {
        max_iters: steps.max(1),
        record_trace: true,
        period_window: steps + 1,
        ..SolveOptions::default()
    };
    let r = run(map, x0, &opts, false)?;
    let mut t = r.trace.expect("trace requested");
    if steps == 0 {
        t.iterates.truncate(1);
        t.max_ratio.clear();
        t.min_ratio.clear();
        t.d_hilbert_step.clear();
        t.norms.clear();
    }
    Ok(t)
}

/// `exp(U[−1, 1]ⁿ)`.
pub fn random_start<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PositiveVector {
    let v = (0..dim).map(|_| rng.gen_range(-1.0..=1.0f64).exp()).collect();
    PositiveVector::new(v).expect("exponentials are positive")
}

/// The smallest `(f(y)_i − f(x)_i)/(y_i − x_i)` over coordinates with
/// `y_i > x_i`, when positive. Requires `x ≤ y`, `x ≠ y`.
pub fn type_k_witness(map: &MapModel, x: &PositiveVector, y: &PositiveVector) -> Result<Option<f64>> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    if !x.le(y) {
        return Err(Error::InvalidArgument("type-K witness needs x ≤ y".into()));
    }
    if x == y {
        return Err(Error::InvalidArgument("type-K witness needs x ≠ y".into()));
    }
    let fx = map.eval(x)?;
    let fy = map.eval(y)?;
    let eps = (0..x.dim())
        .filter(|&i| y[i] > x[i])
        .map(|i| (fy[i] - fx[i]) / (y[i] - x[i]))
        .fold(f64::INFINITY, f64::min);
    Ok((eps > 0.0).then_some(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::hilbert;
    use crate::maps::TensorMap;

    fn pv(v: &[f64]) -> PositiveVector {
        PositiveVector::new(v.to_vec()).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> MapModel {
        MapModel::matrix(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn symmetric_matrix_converges() {
        let r = iterate_normalized(&matrix(&[&[2.0, 1.0], &[1.0, 2.0]]), &pv(&[1.0, 2.0]), &SolveOptions::default())
            .unwrap();
        assert!(r.converged);
        assert!((r.eigenvector[0] - 1.0).abs() < 1e-9 && (r.eigenvector[1] - 1.0).abs() < 1e-9);
        assert!((r.eigenvalue_bracket.0 - 3.0).abs() < 1e-9 && (r.eigenvalue_bracket.1 - 3.0).abs() < 1e-9);
        assert_eq!(r.period_detected, Some(1));
    }

    #[test]
    fn permutation_is_periodic() {
        let r = iterate_normalized(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]]), &pv(&[1.0, 3.0]), &SolveOptions::default())
            .unwrap();
        assert!(!r.converged);
        assert_eq!(r.period_detected, Some(2));
        assert_eq!(r.termination, Termination::Periodic(2));
        assert!(r.iterations <= 2 * DEFAULT_PERIOD_WINDOW);
    }

    #[test]
    fn tensor_eigenvector() {
        let t: MapModel = TensorMap::parse_text("3 2\n1 1 1 1\n1 2 2 2\n2 1 2 1\n").unwrap().into();
        let r = iterate_normalized(&t, &pv(&[1.0, 1.0]), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        let ratio = r.eigenvector[1] / r.eigenvector[0];
        assert!((ratio - 0.589_754_512_301_458_4).abs() < 1e-8, "{ratio}");
        assert!((r.eigenvalue() - 1.302_160_039_918_236).abs() < 1e-8);
    }

    #[test]
    fn damped_permutation_converges() {
        let opts = SolveOptions { damping: Some(0.5), record_trace: true, ..SolveOptions::default() };
        let r = iterate_damped(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]]), &pv(&[1.0, 3.0]), &opts).unwrap();
        assert!(r.converged && r.iterations <= 200);
        assert!((r.eigenvector[0] - 1.0).abs() < 1e-9 && (r.eigenvector[1] - 1.0).abs() < 1e-9);
        // first damped step: normalize(½(1/3, 1/9) + ½(1/3, 1)) = (3/5, 1)
        let x1 = &r.trace.unwrap().iterates[1];
        assert!((x1[0] - 0.6).abs() < 1e-15 && x1[1] == 1.0);
    }

    #[test]
    fn damped_from_eigenvector_stops_immediately() {
        let opts = SolveOptions { damping: Some(0.5), ..SolveOptions::default() };
        let r = iterate_damped(&matrix(&[&[2.0, 1.0], &[1.0, 2.0]]), &pv(&[1.0, 1.0]), &opts).unwrap();
        assert!(r.converged && r.iterations == 1);
        assert_eq!(r.eigenvector, pv(&[1.0, 1.0]));
    }

    #[test]
    fn damping_keeps_eigenvector() {
        let a = matrix(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let opts = SolveOptions { damping: Some(0.9), ..SolveOptions::default() };
        let d = iterate_damped(&a, &pv(&[0.2, 1.0]), &opts).unwrap();
        let u = iterate_normalized(&a, &pv(&[0.2, 1.0]), &SolveOptions::default()).unwrap();
        assert!(hilbert(&d.eigenvector, &u.eigenvector).unwrap() < 1e-8);
    }

    #[test]
    fn converged_invariant() {
        let a = matrix(&[&[1.0, 2.0, 0.5], &[0.3, 1.0, 1.0], &[2.0, 0.1, 1.0]]);
        let opts = SolveOptions::default();
        let r = iterate_normalized(&a, &pv(&[1.0, 0.1, 3.0]), &opts).unwrap();
        assert!(r.converged);
        let (m, big_m) = r.eigenvalue_bracket;
        assert!(big_m / m - 1.0 <= 10.0 * opts.tolerance);
        let fu = a.eval(&r.eigenvector).unwrap();
        assert!(hilbert(&fu, &r.eigenvector).unwrap() <= 10.0 * opts.tolerance);
    }

    #[test]
    fn boundary_escape() {
        let r = iterate_normalized(&matrix(&[&[2.0, 1.0], &[0.0, 1.0]]), &pv(&[1.0, 1.0]), &SolveOptions::default())
            .unwrap();
        assert!(!r.converged);
        assert_eq!(r.termination, Termination::BoundaryEscape);
        assert!(r.eigenvector.min_entry() < 1e-6);
    }

    #[test]
    fn period_detection_on_traces() {
        let p3 = matrix(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let t = record_orbit(&p3, &pv(&[1.0, 2.0, 3.0]), 20).unwrap();
        assert_eq!(detect_period(&t, 8, 1e-10), Some(3));
        let p2 = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let t = record_orbit(&p2, &pv(&[1.0, 3.0]), 20).unwrap();
        assert_eq!(detect_period(&t, 8, 1e-10), Some(2));
        let id = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let t = record_orbit(&id, &pv(&[1.0, 3.0]), 20).unwrap();
        assert_eq!(detect_period(&t, 8, 1e-10), Some(1));
    }

    #[test]
    fn csv_layout() {
        let t = record_orbit(&matrix(&[&[2.0, 1.0], &[1.0, 2.0]]), &pv(&[1.0, 2.0]), 3).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,x_1,x_2,M_k,m_k,dH_step");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,5e-1,1e0,"));
    }

    #[test]
    fn type_k_witness_examples() {
        let id = matrix(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(type_k_witness(&id, &pv(&[1.0, 1.0]), &pv(&[2.0, 3.0])).unwrap(), Some(1.0));
        let p = matrix(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(type_k_witness(&p, &pv(&[1.0, 1.0]), &pv(&[2.0, 1.0])).unwrap(), None);
        let a = matrix(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_eq!(type_k_witness(&a, &pv(&[1.0, 1.0]), &pv(&[2.0, 1.0])).unwrap(), Some(2.0));
        assert!(type_k_witness(&a, &pv(&[2.0, 1.0]), &pv(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn options_validation() {
        assert!(SolveOptions { damping: Some(0.0), ..SolveOptions::default() }.validate().is_err());
        assert!(SolveOptions { tolerance: 0.0, ..SolveOptions::default() }.validate().is_err());
        assert!(SolveOptions::default().validate().is_ok());
    }
}
