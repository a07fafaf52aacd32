//! Convergence rates: empirical R-linear rate estimates from distance
//! sequences, the Jacobian bound `ρ₂/ρ` at the eigenvector, the rate
//! combination `λ = ln θ/(ln η + ln θ)`, and a consistency check between the
//! rates of several distance sequences along one orbit.

use serde::{Deserialize, Serialize};

use crate::cone::{hilbert_raw, ratio_max, PositiveVector};
use crate::error::{Error, Result};
use crate::iterate::{random_start, record_orbit, solve, OrbitTrace, SolveOptions, Termination};
use crate::maps::{Digraph, MapModel};
use crate::random::substream;
use crate::structure::{classify, cyclicity, scc};

pub use crate::linalg::eig_moduli;

/// Distances at or below this carry no rate information.
pub const NOISE_FLOOR: f64 = 1e-13;
/// Fraction of the informative entries used for the fit.
pub const TAIL_FRACTION: f64 = 0.3;
/// Fewest entries in the fit window when that many are informative.
pub const MIN_WINDOW: usize = 10;
pub const SUBLINEAR_RATIO: f64 = 0.995;
pub const LINEAR_MAX_THETA: f64 = 0.999;
pub const MAX_FIT_RMS: f64 = 0.1;
/// Residuals are averaged over this many consecutive entries before the RMS
/// is taken, so that the staircase left by complex subdominant eigenvalues
/// does not count as misfit.
pub const RMS_SMOOTHING: usize = 4;
/// Largest pairwise gap accepted by [`rate_equivalence_check`].
pub const AGREEMENT_TOL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateClass {
    Linear,
    Sublinear,
    Inconclusive,
}

impl std::fmt::Display for RateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateClass::Linear => "linear",
            RateClass::Sublinear => "sublinear",
            RateClass::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Estimated `limsup d_k^{1/k}`, in `(0, 1]`.
    pub theta_hat: f64,
    pub classification: RateClass,
    /// `ρ₂/ρ` of the Jacobian at the eigenvector, when primitive.
    pub theoretical_bound: Option<f64>,
    pub lambda_combined: Option<f64>,
    pub combined_rate: Option<f64>,
    /// Index range `[start, end)` of the fitted entries.
    pub window: (usize, usize),
    /// Root-mean-square residual of the log-linear fit, after a moving
    /// average over [`RMS_SMOOTHING`] entries.
    pub fit_rms: f64,
    /// Median of `d_{k+1}/d_k` over the window.
    pub tail_ratio_median: Option<f64>,
}

/// Fits `ln d_k ≈ a + k ln θ` over the last 30% (at least [`MIN_WINDOW`])
/// of the entries above [`NOISE_FLOOR`].
///
/// Classification: *sublinear* when the tail ratios `d_{k+1}/d_k` have median
/// above 0.995 and increase (weakly at every step, strictly overall);
/// otherwise *linear* when `θ̂ ≤ 0.999` and the fit RMS is at most 0.1;
/// otherwise *inconclusive*.
pub fn empirical_rate(d: &[f64]) -> Result<RateReport> {
    if d.len() < 20 {
        return Err(Error::InvalidArgument(format!("need at least 20 distances, got {}", d.len())));
    }
    if d.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("distances must be finite and nonnegative".into()));
    }
    let live: Vec<usize> = (0..d.len()).filter(|&k| d[k] > NOISE_FLOOR).collect();
    if live.len() < 3 {
        return Ok(fast_convergence(d, &live));
    }
    let take = ((TAIL_FRACTION * live.len() as f64).ceil() as usize).max(MIN_WINDOW).min(live.len());
    let window = &live[live.len() - take..];
    let xs: Vec<f64> = window.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = window.iter().map(|&k| d[k].ln()).collect();
    let (intercept, slope) = least_squares(&xs, &ys);
    let resid: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - intercept - slope * x).collect();
    let smoothed: Vec<f64> = if resid.len() >= 2 * RMS_SMOOTHING {
        resid.windows(RMS_SMOOTHING).map(|w| w.iter().sum::<f64>() / RMS_SMOOTHING as f64).collect()
    } else {
        resid
    };
    let fit_rms = (smoothed.iter().map(|r| r * r).sum::<f64>() / smoothed.len() as f64).sqrt();
    let theta_hat = slope.exp().clamp(f64::EPSILON, 1.0);

    let ratios: Vec<f64> = window.windows(2).filter(|w| w[1] == w[0] + 1).map(|w| d[w[1]] / d[w[0]]).collect();
    let median = median(&ratios);
    let increasing = ratios.len() >= 2
        && ratios.windows(2).all(|w| w[1] >= w[0] - 1e-12)
        && ratios[ratios.len() - 1] - ratios[0] > 1e-8;
    let classification = if median.is_some_and(|m| m > SUBLINEAR_RATIO) && increasing {
        RateClass::Sublinear
    } else if theta_hat <= LINEAR_MAX_THETA && fit_rms <= MAX_FIT_RMS {
        RateClass::Linear
    } else {
        RateClass::Inconclusive
    };
    Ok(RateReport {
        theta_hat,
        classification,
        theoretical_bound: None,
        lambda_combined: None,
        combined_rate: None,
        window: (window[0], window[window.len() - 1] + 1),
        fit_rms,
        tail_ratio_median: median,
    })
}

/// Too few informative entries to fit: bound θ by the decay needed to reach
/// the noise floor in the observed number of steps.
fn fast_convergence(d: &[f64], live: &[usize]) -> RateReport {
    let theta_hat = match (live.first(), live.last()) {
        (Some(&k0), Some(&k1)) => {
            let steps = (k1 + 1 - k0) as f64;
            (NOISE_FLOOR / d[k0]).powf(1.0 / steps).clamp(f64::EPSILON, 1.0)
        }
        _ => f64::EPSILON,
    };
    let window = live.first().map_or((0, 0), |&k0| (k0, live[live.len() - 1] + 1));
    RateReport {
        theta_hat,
        classification: RateClass::Linear,
        theoretical_bound: None,
        lambda_combined: None,
        combined_rate: None,
        window,
        fit_rms: 0.0,
        tail_ratio_median: None,
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

/// `λ = ln θ/(ln η + ln θ)` and `η^λ` (which equals `θ^{1−λ}`).
pub fn combine_rates(eta: f64, theta: f64) -> Result<(f64, f64)> {
    for (name, v) in [("eta", eta), ("theta", theta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    let lambda = theta.ln() / (eta.ln() + theta.ln());
    Ok((lambda, eta.powf(lambda)))
}

/// Irreducible with cyclicity 1.
pub fn is_primitive(g: &Digraph) -> bool {
    let classes = scc(g);
    classes.len() == 1 && cyclicity(g, &classes[0]) == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianBound {
    /// Spectral radius of `f'(u)`.
    pub rho: f64,
    /// Second largest eigenvalue modulus.
    pub rho2: f64,
    pub ratio: f64,
    pub primitive: bool,
    /// Why no certificate is available.
    pub reason: Option<String>,
}

impl JacobianBound {
    /// `ρ₂/ρ` when `f'(u)` is primitive.
    pub fn certificate(&self) -> Option<f64> {
        self.primitive.then_some(self.ratio)
    }
}

/// Largest `d_H(f(u), u)` for which `u` is accepted as an eigenvector.
pub const EIGENVECTOR_TOL: f64 = 1e-8;

/// Eigenvalue moduli of the Jacobian at the eigenvector `u`. The ratio
/// `ρ₂/ρ` bounds the R-linear rate of the normalized iteration when `f'(u)`
/// is primitive.
pub fn jacobian_rate_bound(map: &MapModel, u: &PositiveVector) -> Result<JacobianBound> {
    let fu = map.eval(u)?;
    let residual = hilbert_raw(fu.as_slice(), u.as_slice());
    if residual > EIGENVECTOR_TOL {
        return Err(Error::InvalidArgument(format!("u is not an eigenvector (d_H(f(u), u) = {residual:e})")));
    }
    let jac = map.jacobian(u)?;
    let moduli = eig_moduli(&jac)?;
    let rho = moduli[0];
    if rho <= 0.0 {
        return Err(Error::Numerical("Jacobian has spectral radius 0".into()));
    }
    let rho2 = moduli.get(1).copied().unwrap_or(0.0);
    let g = Digraph::from_pattern(&jac);
    let classes = scc(&g);
    let reason = if classes.len() > 1 {
        Some(format!("Jacobian is reducible ({} classes)", classes.len()))
    } else {
        let c = cyclicity(&g, &classes[0]);
        (c != 1).then(|| format!("Jacobian is irreducible but periodic (cyclicity {c})"))
    };
    Ok(JacobianBound { rho, rho2, ratio: rho2 / rho, primitive: reason.is_none(), reason })
}

/// Polishes an approximate eigenvector by plain iteration until the
/// Hilbert residual stops improving. Returns the best iterate and
/// `M(f(u)/u)`.
pub fn refine_eigenvector(map: &MapModel, u: &PositiveVector) -> Result<(PositiveVector, f64)> {
    let mut x = crate::cone::normalize_sup(u);
    let mut best = x.clone();
    let mut best_res = f64::INFINITY;
    let mut since_best = 0;
    for _ in 0..10_000 {
        let fx = map.eval(&x)?;
        let res = hilbert_raw(fx.as_slice(), x.as_slice());
        if res < best_res {
            best_res = res;
            best = x.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if best_res <= 4.0 * f64::EPSILON || since_best >= 50 {
            break;
        }
        x = crate::cone::normalize_sup(&fx);
    }
    let fb = map.eval(&best)?;
    Ok((best.clone(), ratio_max(fb.as_slice(), best.as_slice())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEquivalence {
    /// Rate of `d_H(x_k, u)`.
    pub theta_hilbert: f64,
    /// Rate of `d_T(f^k(x)/r̂^k, λ̂u)`.
    pub theta_scaled_thompson: f64,
    /// Rate of `‖x_k − u‖∞`.
    pub theta_norm: f64,
    /// `λ̂ = M(f^K(x)/r̂^K / u)` at the end of the trace; advisory.
    pub lambda_hat: f64,
    pub max_gap: f64,
    pub agree: bool,
}

/// Empirical rates of three distance sequences along a converged orbit,
/// which should coincide, and their largest pairwise gap. Iterates past the
/// first one within `NOISE_FLOOR/10` of the refined `u` (keeping at least 20)
/// are ignored, since the scaled sequence only accumulates rounding there.
pub fn rate_equivalence_check(map: &MapModel, trace: &OrbitTrace, u: &PositiveVector) -> Result<RateEquivalence> {
    let len = trace.iterates.len();
    if len < 20 || trace.norms.len() + 1 < len {
        return Err(Error::InvalidArgument(format!("trace needs at least 20 iterates with norms, got {len}")));
    }
    let (u, r) = refine_eigenvector(map, u)?;
    let us = u.as_slice();
    let last = hilbert_raw(trace.iterates[len - 1].as_slice(), us);
    if last > 1e-6 {
        return Err(Error::Numerical(format!("trace has not converged to u (final d_H = {last:e})")));
    }
    let len = trace
        .iterates
        .iter()
        .position(|x| hilbert_raw(x.as_slice(), us) <= NOISE_FLOOR / 10.0)
        .map_or(len, |k| (k + 1).max(20));
    let ln_u: Vec<f64> = u.ln();
    let ln_r = r.ln();
    let mut log_scaled = Vec::with_capacity(len);
    let mut acc = 0.0;
    for k in 0..len {
        let lx = trace.iterates[k].ln();
        log_scaled.push(lx.iter().map(|v| v + acc - k as f64 * ln_r).collect::<Vec<f64>>());
        if k < trace.norms.len() {
            acc += trace.norms[k].ln();
        }
    }
    let ln_lambda =
        log_scaled[len - 1].iter().zip(&ln_u).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let hil: Vec<f64> = trace.iterates[..len].iter().map(|x| hilbert_raw(x.as_slice(), us)).collect();
    let tho: Vec<f64> = log_scaled
        .iter()
        .map(|y| y.iter().zip(&ln_u).map(|(a, b)| (a - b - ln_lambda).abs()).fold(0.0, f64::max))
        .collect();
    let nrm: Vec<f64> = trace.iterates[..len]
        .iter()
        .map(|x| x.as_slice().iter().zip(us).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let th = empirical_rate(&hil)?.theta_hat;
    let tt = empirical_rate(&tho)?.theta_hat;
    let tn = empirical_rate(&nrm)?.theta_hat;
    let max_gap = (th - tt).abs().max((th - tn).abs()).max((tt - tn).abs());
    Ok(RateEquivalence {
        theta_hilbert: th,
        theta_scaled_thompson: tt,
        theta_norm: tn,
        lambda_hat: ln_lambda.exp(),
        max_gap,
        agree: max_gap <= AGREEMENT_TOL,
    })
}

/// `d_H(x_k, u)` along a trace.
pub fn hilbert_distances(trace: &OrbitTrace, u: &PositiveVector) -> Vec<f64> {
    trace.iterates.iter().map(|x| hilbert_raw(x.as_slice(), u.as_slice())).collect()
}

/// Drops the iterates after the first one within `NOISE_FLOOR/10` of `u`
/// in Hilbert distance, keeping at least `min_len`.
pub fn truncate_at_convergence(trace: &mut OrbitTrace, u: &PositiveVector, min_len: usize) {
    let d = hilbert_distances(trace, u);
    if let Some(k) = d.iter().position(|&v| v <= NOISE_FLOOR / 10.0) {
        let keep = (k + 1).max(min_len).min(trace.iterates.len());
        trace.iterates.truncate(keep);
        let steps = keep.saturating_sub(1);
        trace.max_ratio.truncate(steps);
        trace.min_ratio.truncate(steps);
        trace.d_hilbert_step.truncate(steps);
        trace.norms.truncate(steps);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub seed: u64,
    /// Orbit length used for the estimates.
    pub steps: usize,
    /// Start of the sampled orbit; seeded random when absent.
    pub start: Option<PositiveVector>,
    pub solve: SolveOptions,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { seed: 0, steps: 2000, start: None, solve: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    /// 0-indexed coordinates of the final class.
    pub class: Vec<usize>,
    pub report: RateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAnalysis {
    pub eigenvector: PositiveVector,
    pub eigenvalue: f64,
    /// Rate of `d_H(x_k, u)` along the sampled orbit, with the Jacobian
    /// certificate and combined rate filled in when available.
    pub report: RateReport,
    pub equivalence: Option<RateEquivalence>,
    pub jacobian: Option<JacobianBound>,
    /// Why the Jacobian bound is missing, when it is.
    pub jacobian_note: Option<String>,
    /// Per-final-class rates for reducible maps.
    pub final_classes: Vec<ClassRate>,
    /// `ρ(P_I f'(u) P_I)/r` over the coordinates `I` outside all final
    /// classes.
    pub eta: Option<f64>,
}

fn find_eigenvector(map: &MapModel, opts: &SolveOptions) -> Result<PositiveVector> {
    if let Some(u) = map.known_eigenvector() {
        return Ok(u);
    }
    let x0 = PositiveVector::ones(map.dim());
    let plain = solve(map, &x0, &SolveOptions { damping: None, ..*opts })?;
    if plain.converged {
        return Ok(plain.eigenvector);
    }
    let damped = solve(map, &x0, &SolveOptions { damping: Some(opts.damping.unwrap_or(0.5)), ..*opts })?;
    if damped.converged {
        return Ok(damped.eigenvector);
    }
    let period = match plain.termination {
        Termination::Periodic(p) => Some(p),
        _ => plain.period_detected.filter(|&p| p > 1),
    };
    Err(Error::NotConverged { iterations: plain.iterations, period })
}

fn orbit_rate(map: &MapModel, x0: &PositiveVector, u: &PositiveVector, steps: usize) -> Result<(OrbitTrace, RateReport)> {
    let mut trace = record_orbit(map, x0, steps.max(20))?;
    truncate_at_convergence(&mut trace, u, 20);
    let report = empirical_rate(&hilbert_distances(&trace, u))?;
    Ok((trace, report))
}

/// Eigenvector, empirical rate, rate consistency, Jacobian certificate and
/// per-class rates for one map.
pub fn analyze_rate(map: &MapModel, opts: &RateOptions) -> Result<RateAnalysis> {
    let u0 = find_eigenvector(map, &opts.solve)?;
    let (u, r) = refine_eigenvector(map, &u0)?;
    let x0 = match (&opts.start, map) {
        (Some(s), _) => s.clone(),
        (None, MapModel::Builtin(b)) => PositiveVector::new(b.reference_start().to_vec())?,
        (None, _) => random_start(map.dim(), &mut substream(opts.seed, 0)),
    };
    let (trace, mut report) = orbit_rate(map, &x0, &u, opts.steps)?;
    let equivalence = rate_equivalence_check(map, &trace, &u).ok();

    let (jacobian, jacobian_note) = match jacobian_rate_bound(map, &u) {
        Ok(b) => {
            let note = b.reason.clone();
            report.theoretical_bound = b.certificate();
            (Some(b), note)
        }
        Err(e) => (None, Some(e.to_string())),
    };

    let mut final_classes = Vec::new();
    let mut eta = None;
    if !matches!(map, MapModel::Builtin(_)) {
        let d = classify(map)?;
        if d.classes.len() > 1 {
            for (k, class) in d.classes.iter().enumerate().filter(|(k, _)| d.is_final[*k]) {
                let sub = map.restrict(class)?;
                let su = find_eigenvector(&sub, &opts.solve)?;
                let (su, _) = refine_eigenvector(&sub, &su)?;
                let sx = random_start(class.len(), &mut substream(opts.seed, 1 + k as u64));
                let (_, mut rep) = orbit_rate(&sub, &sx, &su, opts.steps)?;
                rep.theoretical_bound = jacobian_rate_bound(&sub, &su).ok().and_then(|b| b.certificate());
                final_classes.push(ClassRate { class: class.clone(), report: rep });
            }
            let in_final: Vec<usize> = d.final_classes().iter().flat_map(|&k| d.classes[k].clone()).collect();
            let rest: Vec<usize> = (0..map.dim()).filter(|j| !in_final.contains(j)).collect();
            if !rest.is_empty() {
                if let Ok(jac) = map.jacobian(&u) {
                    eta = eig_moduli(&jac.principal(&rest)).ok().map(|m| m[0] / r);
                }
            }
            let theta_j = final_classes.iter().map(|c| c.report.theta_hat).fold(0.0, f64::max);
            if let Some(e) = eta {
                if let Ok((l, c)) = combine_rates(e, theta_j) {
                    report.lambda_combined = Some(l);
                    report.combined_rate = Some(c);
                }
            }
        }
    }

    Ok(RateAnalysis {
        eigenvector: u,
        eigenvalue: r,
        report,
        equivalence,
        jacobian,
        jacobian_note,
        final_classes,
        eta,
    })
}
