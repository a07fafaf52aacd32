//! The run report shared by every command, and its text rendering.
//! Coordinates and classes are 1-based in both renderings.

use std::fmt::Write;

use nlpf::iterate::{SolveResult, Termination};
use nlpf::rate::{JacobianBound, RateAnalysis, RateEquivalence, RateReport};
use nlpf::repro::ReproReport;
use nlpf::structure::{ClassDecomposition, CwEstimate, ExistenceCertificate, PeriodReport};
use nlpf::topical::KmReport;
use nlpf::verify::{PropertyResult, VerifyReport};
use serde::Serialize;

pub const VERSION: &str = concat!("nlpf ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub command: String,
    pub input: Option<InputInfo>,
    pub options: serde_json::Value,
    pub structure: Option<StructureSummary>,
    pub solve: Option<SolveSummary>,
    pub rate: Option<RateSummary>,
    pub topical: Option<TopicalSummary>,
    pub repro: Option<Vec<ReproReport>>,
    pub verify: Option<VerifySummary>,
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn new(command: &str, input: Option<InputInfo>, options: serde_json::Value) -> Self {
        Self {
            version: VERSION,
            command: command.to_string(),
            input,
            options,
            structure: None,
            solve: None,
            rate: None,
            topical: None,
            repro: None,
            verify: None,
            timings: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub kind: &'static str,
    pub dim: usize,
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

#[derive(Debug, Serialize)]
pub struct ClassSummary {
    pub index: usize,
    pub vertices: Vec<usize>,
    pub is_final: bool,
    pub is_basic: bool,
    pub cw: CwEstimate,
}

#[derive(Debug, Serialize)]
pub struct StructureSummary {
    pub dim: usize,
    pub classes: Vec<ClassSummary>,
    pub r_global: f64,
    pub strongly_connected: bool,
    pub type_k: bool,
    pub exists: bool,
    pub basic: Vec<usize>,
    pub finals: Vec<usize>,
    pub existence_warning: Option<String>,
    pub period: usize,
    pub lcm_of_cyclicities: usize,
    pub transient: Vec<usize>,
    pub period_warning: Option<String>,
}

impl StructureSummary {
    pub fn new(dim: usize, d: &ClassDecomposition, e: &ExistenceCertificate, p: &PeriodReport, type_k: bool) -> Self {
        let classes = d
            .classes
            .iter()
            .enumerate()
            .map(|(k, c)| ClassSummary {
                index: k + 1,
                vertices: one_based(c),
                is_final: d.is_final[k],
                is_basic: d.is_basic[k],
                cw: d.cw[k].clone(),
            })
            .collect();
        Self {
            dim,
            classes,
            r_global: d.r_global,
            strongly_connected: d.is_strongly_connected(),
            type_k,
            exists: e.exists,
            basic: one_based(&e.basic),
            finals: one_based(&e.finals),
            existence_warning: e.warning.clone(),
            period: p.period,
            lcm_of_cyclicities: p.lcm_of_cyclicities,
            transient: one_based(&p.transient),
            period_warning: p.warning.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub start: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub eigenvalue: f64,
    pub eigenvalue_bracket: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
    pub termination: &'static str,
    pub period: Option<usize>,
    pub trace_file: Option<String>,
}

impl SolveSummary {
    pub fn new(start: Vec<f64>, r: &SolveResult, trace_file: Option<String>) -> Self {
        let period = match r.termination {
            Termination::Periodic(p) => Some(p),
            _ => r.period_detected.filter(|&p| p > 1),
        };
        Self {
            start,
            eigenvector: r.eigenvector.as_slice().to_vec(),
            eigenvalue: r.eigenvalue(),
            eigenvalue_bracket: [r.eigenvalue_bracket.0, r.eigenvalue_bracket.1],
            converged: r.converged,
            iterations: r.iterations,
            termination: match r.termination {
                Termination::Converged => "converged",
                Termination::MaxIters => "max_iters",
                Termination::Periodic(_) => "periodic",
                Termination::BoundaryEscape => "boundary_escape",
            },
            period,
            trace_file,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ClassRateSummary {
    pub class: Vec<usize>,
    pub report: RateReport,
}

#[derive(Debug, Serialize)]
pub struct RateSummary {
    pub start: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub eigenvalue: f64,
    pub report: RateReport,
    pub equivalence: Option<RateEquivalence>,
    pub jacobian: Option<JacobianBound>,
    pub jacobian_note: Option<String>,
    pub final_classes: Vec<ClassRateSummary>,
    pub eta: Option<f64>,
}

impl RateSummary {
    pub fn new(start: Vec<f64>, a: RateAnalysis) -> Self {
        Self {
            start,
            eigenvector: a.eigenvector.as_slice().to_vec(),
            eigenvalue: a.eigenvalue,
            report: a.report,
            equivalence: a.equivalence,
            jacobian: a.jacobian,
            jacobian_note: a.jacobian_note,
            final_classes: a
                .final_classes
                .into_iter()
                .map(|c| ClassRateSummary { class: one_based(&c.class), report: c.report })
                .collect(),
            eta: a.eta,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TopicalSummary {
    Km { start: Vec<f64>, result: KmReport },
    CycleTime { start: Vec<f64>, horizon: usize, cycle_time: Vec<f64> },
    HalfLine { v: Vec<f64>, w: Vec<f64>, grid: Vec<f64>, holds: bool },
    Reduce { w: Vec<f64>, starts: Vec<Vec<f64>>, burn_in: usize, reduced: String },
    LocalRate { start: Vec<f64>, fixed_point: Vec<f64>, km_iterations: usize, m: usize, gamma: f64, finite_convergence: bool },
}

#[derive(Debug, Serialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub suites: Vec<String>,
    pub passed: bool,
    pub failed_properties: usize,
    pub properties: Vec<PropertyResult>,
}

impl VerifySummary {
    pub fn new(suites: Vec<String>, r: VerifyReport) -> Self {
        Self {
            seed: r.seed,
            suites,
            passed: r.passed(),
            failed_properties: r.failed().count(),
            properties: r.properties,
        }
    }
}

fn vec_text(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("({})", parts.join(", "))
}

fn list_text(v: &[usize]) -> String {
    let parts: Vec<String> = v.iter().map(usize::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

fn rate_lines(out: &mut String, indent: &str, r: &RateReport) {
    let _ = writeln!(out, "{indent}theta_hat        {:.6} ({})", r.theta_hat, r.classification);
    let _ = writeln!(out, "{indent}fit window       [{}, {}), rms {:.3e}", r.window.0, r.window.1, r.fit_rms);
    if let Some(m) = r.tail_ratio_median {
        let _ = writeln!(out, "{indent}tail ratio med.  {m:.6}");
    }
    if let Some(b) = r.theoretical_bound {
        let _ = writeln!(out, "{indent}bound rho2/rho   {b:.10}");
    }
    if let (Some(l), Some(c)) = (r.lambda_combined, r.combined_rate) {
        let _ = writeln!(out, "{indent}combined         lambda {l:.6}, rate {c:.6}");
    }
}

pub fn render_text(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", r.version, r.command);
    if let Some(i) = &r.input {
        let _ = writeln!(out, "input            {} ({} map, dim {})", i.path, i.kind, i.dim);
        let _ = writeln!(out, "sha256           {}", i.sha256);
    }
    if let Some(s) = &r.structure {
        let _ = writeln!(out, "classes          {}", s.classes.len());
        for c in &s.classes {
            let mut tags = Vec::new();
            if c.is_final {
                tags.push("final");
            }
            if c.is_basic {
                tags.push("basic");
            }
            let note = if c.cw.interior_preserving { "" } else { " (not interior preserving)" };
            let _ = writeln!(
                out,
                "  class {} {:<12} r = {:.10}{note} [{}]",
                c.index,
                list_text(&c.vertices),
                c.cw.value,
                tags.join(", ")
            );
        }
        let _ = writeln!(out, "r(f)             {:.10}", s.r_global);
        let _ = writeln!(out, "strongly conn.   {}", s.strongly_connected);
        let _ = writeln!(out, "type K           {}", s.type_k);
        let _ = writeln!(
            out,
            "eigenvector      {} (basic {}, final {})",
            if s.exists { "exists" } else { "does not exist" },
            list_text(&s.basic),
            list_text(&s.finals)
        );
        if let Some(w) = &s.existence_warning {
            let _ = writeln!(out, "  warning: {w}");
        }
        let _ = writeln!(out, "period           {} (lcm of cyclicities {})", s.period, s.lcm_of_cyclicities);
        if let Some(w) = &s.period_warning {
            let _ = writeln!(out, "  warning: {w}");
        }
    }
    if let Some(s) = &r.solve {
        let _ = writeln!(out, "start            {}", vec_text(&s.start));
        let _ = writeln!(out, "converged        {} after {} iterations ({})", s.converged, s.iterations, s.termination);
        let label = if s.converged { "eigenvector" } else { "last iterate" };
        let _ = writeln!(out, "{label:<16} {}", vec_text(&s.eigenvector));
        let _ = writeln!(
            out,
            "eigenvalue       {:.12} in [{:.12}, {:.12}]",
            s.eigenvalue, s.eigenvalue_bracket[0], s.eigenvalue_bracket[1]
        );
        if let Some(p) = s.period {
            let _ = writeln!(out, "period           {p}");
        }
        if let Some(f) = &s.trace_file {
            let _ = writeln!(out, "trace            {f}");
        }
    }
    if let Some(s) = &r.rate {
        let _ = writeln!(out, "start            {}", vec_text(&s.start));
        let _ = writeln!(out, "eigenvector      {}", vec_text(&s.eigenvector));
        let _ = writeln!(out, "eigenvalue       {:.12}", s.eigenvalue);
        rate_lines(&mut out, "", &s.report);
        if let Some(e) = &s.equivalence {
            let _ = writeln!(
                out,
                "equivalence      d_H {:.6}, scaled d_T {:.6}, sup norm {:.6} (gap {:.2e}, {})",
                e.theta_hilbert,
                e.theta_scaled_thompson,
                e.theta_norm,
                e.max_gap,
                if e.agree { "agree" } else { "disagree" }
            );
        }
        if let Some(j) = &s.jacobian {
            let _ = writeln!(out, "jacobian         rho {:.10}, rho2 {:.10}, primitive {}", j.rho, j.rho2, j.primitive);
        }
        if let Some(n) = &s.jacobian_note {
            let _ = writeln!(out, "  note: {n}");
        }
        for c in &s.final_classes {
            let _ = writeln!(out, "final class      {}", list_text(&c.class));
            rate_lines(&mut out, "  ", &c.report);
        }
        if let Some(e) = s.eta {
            let _ = writeln!(out, "eta              {e:.6}");
        }
    }
    if let Some(t) = &r.topical {
        match t {
            TopicalSummary::Km { start, result } => {
                let _ = writeln!(out, "start            {}", vec_text(start));
                let _ = writeln!(out, "converged        {} after {} iterations", result.converged, result.iterations);
                let _ = writeln!(out, "point            {}", vec_text(&result.point));
                let _ = writeln!(out, "residual         {:.3e}", result.residual);
                if let Some(c) = &result.cycle_time {
                    let _ = writeln!(out, "cycle time       {}", vec_text(c));
                }
            }
            TopicalSummary::CycleTime { start, horizon, cycle_time } => {
                let _ = writeln!(out, "start            {}", vec_text(start));
                let _ = writeln!(out, "horizon          {horizon}");
                let _ = writeln!(out, "cycle time       {}", vec_text(cycle_time));
            }
            TopicalSummary::HalfLine { v, w, grid, holds } => {
                let _ = writeln!(out, "half-line        {} + t {}", vec_text(v), vec_text(w));
                let _ = writeln!(out, "grid points      {}", grid.len());
                let _ = writeln!(out, "invariant        {holds}");
            }
            TopicalSummary::Reduce { w, starts, burn_in, reduced } => {
                let _ = writeln!(out, "w                {}", vec_text(w));
                let _ = writeln!(out, "starts           {}", starts.len());
                let _ = writeln!(out, "burn-in          {burn_in}");
                let _ = writeln!(out, "reduced map G = F - w:");
                for line in reduced.lines() {
                    let _ = writeln!(out, "  {line}");
                }
            }
            TopicalSummary::LocalRate { start, fixed_point, km_iterations, m, gamma, finite_convergence } => {
                let _ = writeln!(out, "start            {}", vec_text(start));
                let _ = writeln!(out, "fixed point      {} ({km_iterations} averaged steps)", vec_text(fixed_point));
                let _ = writeln!(out, "contraction      m = {m}, gamma = {gamma:.6}");
                let _ = writeln!(out, "finite conv.     {finite_convergence}");
            }
        }
    }
    if let Some(rs) = &r.repro {
        for p in rs {
            let _ = writeln!(out, "{}", p.example.tag());
            let _ = writeln!(out, "  start          {}", vec_text(&p.start));
            for (k, x) in p.first_iterates.iter().enumerate() {
                let _ = writeln!(out, "  f^{k}(x)         {}", vec_text(x));
            }
            let _ = writeln!(out, "  iterate error  {:.3e}", p.max_iterate_error);
            let _ = writeln!(out, "  d_T error      {:.3e}", p.max_distance_error);
            let _ = writeln!(out, "  theta_hat      {:.6} ({})", p.theta_hat, p.classification);
            let _ = writeln!(out, "  result         {}", if p.passed { "PASS" } else { "FAIL" });
        }
    }
    if let Some(v) = &r.verify {
        let _ = writeln!(out, "seed             {}", v.seed);
        for p in &v.properties {
            let _ = writeln!(
                out,
                "{} {:<10} {:<42} trials {:>6}  failures {:>4}  skipped {:>4}",
                if p.passed() { "PASS" } else { "FAIL" },
                p.suite,
                p.name,
                p.trials,
                p.failures,
                p.skipped
            );
            if let Some(f) = &p.first_failure {
                let _ = writeln!(out, "     first failure: {f}");
            }
        }
        let _ = writeln!(out, "{} of {} properties failed", v.failed_properties, v.properties.len());
    }
    if let Some(t) = &r.timings {
        let _ = writeln!(out, "time             {:.3} s", t.total_seconds);
    }
    out
}
