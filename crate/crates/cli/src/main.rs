//! `nlpf`: command-line front end for the nlpf library.
//!
//! Exit codes: 0 success, 1 internal error, 2 parse or validation error,
//! 3 non-convergence, 4 property or regression failure.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlpf::cone::PositiveVector;
use nlpf::iterate::{random_start, solve, SolveOptions};
use nlpf::mapspec::{self, MapSpec};
use nlpf::maps::{BuiltinMap, MapModel, TensorMap};
use nlpf::random::substream;
use nlpf::rate::{analyze_rate, RateOptions};
use nlpf::structure::{classify, existence_from, is_type_k, period};
use nlpf::topical::{
    cycle_time, default_half_line_grid, half_line_check, km_fixed_point, reduce_by_half_line, verify_local_linear,
    HalfLine, KmOptions, LocalLinearOptions, TopicalMap,
};
use nlpf::verify::{self, Fault, Suite, VerifyOptions};
use nlpf::Error;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use report::{InputInfo, RateSummary, RunReport, SolveSummary, StructureSummary, Timings, TopicalSummary, VerifySummary};

#[derive(Parser, Debug)]
#[command(name = "nlpf", version, about = "Eigenvectors, fixed points and convergence rates of order-preserving homogeneous maps")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Include wall-clock timings (makes the report non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classes of the dependency digraph, Collatz-Wielandt numbers, existence, type K, period.
    Analyze(InputArgs),
    /// Normalized (or damped) power iteration to an eigenvector.
    Solve(SolveArgs),
    /// Empirical and theoretical convergence rates.
    Rate(RateArgs),
    /// Additively homogeneous (topical) maps.
    Topical(TopicalArgs),
    /// Rerun the two arctan examples against their closed-form orbits.
    Repro(ReproArgs),
    /// Run the seeded property suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// Map-spec document (TOML) or tensor text file.
    file: PathBuf,
    /// Input format; `auto` treats `.tns`/`.tensor` files as tensor text.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Auto,
    Spec,
    Tensor,
}

#[derive(Args, Debug, Serialize)]
struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    /// Stop once d_H(f(x), x) falls below this.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Weight in (0, 1) on the rescaled map.
    #[arg(long)]
    damping: Option<f64>,
    /// Comma-separated positive start vector (default: seeded random).
    #[arg(long, value_delimiter = ',')]
    start: Option<Vec<f64>>,
    /// Seed for the random start.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the orbit as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct RateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Orbit length used for the estimates.
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Comma-separated positive start vector (default: seeded random).
    #[arg(long, value_delimiter = ',')]
    start: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
}

#[derive(Args, Debug)]
struct TopicalArgs {
    #[command(subcommand)]
    mode: TopicalMode,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
enum TopicalMode {
    /// Averaged iteration x <- (1 - lambda) x + lambda F(x) to a fixed point.
    Km(KmArgs),
    /// Cycle-time estimate F^K(x)/K.
    CycleTime(CycleTimeArgs),
    /// Check that t -> v + t w is an invariant half-line.
    HalfLine(HalfLineArgs),
    /// Reduce F to G = F - w and find the burn-in of the identity F^(k+m) = G^k F^m + k w.
    Reduce(ReduceArgs),
    /// Local linear contraction of the averaged map towards its KM fixed point.
    LocalRate(LocalRateArgs),
}

#[derive(Args, Debug, Serialize)]
struct KmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    /// Comma-separated start (default: zero).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
}

#[derive(Args, Debug, Serialize)]
struct CycleTimeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
    /// Horizon K, at least 100.
    #[arg(long, default_value_t = 1000)]
    horizon: usize,
}

#[derive(Args, Debug, Serialize)]
struct HalfLineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    v: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    w: Vec<f64>,
}

#[derive(Args, Debug, Serialize)]
struct ReduceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    w: Vec<f64>,
    /// Number of seeded random starts in [-10, 10]^n.
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct LocalRateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    start: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize)]
struct ReproArgs {
    #[arg(value_enum, default_value_t = Which::All)]
    which: Which,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Which {
    Example1,
    Example2,
    All,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// metrics, models, structure, rates, topical or all.
    #[arg(default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per metric property.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Test hook: corrupt the empirical rates compared against bounds.
    #[arg(long, hide = true)]
    inject_theta_fault: bool,
}

/// Failure carrying the process exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. }
            | Error::InvalidModel(_)
            | Error::InvalidArgument(_)
            | Error::InvalidVector(_)
            | Error::DimensionMismatch { .. }
            | Error::Unsupported(_) => 2,
            Error::NotConverged { .. } => 3,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<(RunReport, u8), Failure>;

fn options_json<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("options serialize")
}

fn load(input: &InputArgs) -> Result<(MapSpec, InputInfo), Failure> {
    let bytes = std::fs::read(&input.file).map_err(|e| usage(format!("cannot read {}: {e}", input.file.display())))?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8", input.file.display())))?;
    let tensor = match input.format {
        Format::Tensor => true,
        Format::Spec => false,
        Format::Auto => {
            matches!(input.file.extension().and_then(|e| e.to_str()), Some("tns" | "tensor"))
        }
    };
    let spec = if tensor {
        MapSpec::Model(TensorMap::parse_text(&text)?.into())
    } else {
        mapspec::parse(&text, input.file.parent().filter(|p| !p.as_os_str().is_empty()))?
    };
    let info = InputInfo { path: input.file.display().to_string(), sha256, kind: spec.kind(), dim: spec.dim() };
    Ok((spec, info))
}

fn load_model(input: &InputArgs) -> Result<(MapModel, InputInfo), Failure> {
    match load(input)? {
        (MapSpec::Model(m), info) => Ok((m, info)),
        (MapSpec::Topical(_), _) => Err(usage("this command needs a homogeneous map; use `nlpf topical` for topical maps")),
    }
}

fn load_topical(input: &InputArgs) -> Result<(TopicalMap, InputInfo), Failure> {
    match load(input)? {
        (MapSpec::Topical(t), info) => Ok((t, info)),
        (MapSpec::Model(_), _) => Err(usage("`nlpf topical` needs a map-spec document of kind \"topical\"")),
    }
}

fn check_len(name: &str, v: &[f64], dim: usize) -> Result<(), Failure> {
    if v.len() != dim {
        return Err(usage(format!("--{name} has {} entries, the map has dimension {dim}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(usage(format!("--{name} must be finite")));
    }
    Ok(())
}

fn positive_start(start: &Option<Vec<f64>>, dim: usize) -> Result<Option<PositiveVector>, Failure> {
    match start {
        None => Ok(None),
        Some(v) => {
            check_len("start", v, dim)?;
            Ok(Some(PositiveVector::new(v.clone())?))
        }
    }
}

fn analyze(a: &InputArgs) -> Outcome {
    let (map, info) = load_model(a)?;
    let d = classify(&map)?;
    let e = existence_from(&map, &d);
    let p = period(&map)?;
    let mut r = RunReport::new("analyze", Some(info), options_json(a));
    r.structure = Some(StructureSummary::new(map.dim(), &d, &e, &p, is_type_k(&map)));
    Ok((r, 0))
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    let (map, info) = load_model(&a.input)?;
    let x0 = match positive_start(&a.start, map.dim())? {
        Some(s) => s,
        None => random_start(map.dim(), &mut substream(a.seed, 0)),
    };
    let opts = SolveOptions {
        tolerance: a.tol,
        max_iters: a.max_iters,
        damping: a.damping,
        record_trace: a.trace_out.is_some(),
        seed: a.seed,
        ..SolveOptions::default()
    };
    let res = solve(&map, &x0, &opts)?;
    let mut trace_file = None;
    if let (Some(path), Some(trace)) = (&a.trace_out, &res.trace) {
        std::fs::write(path, trace.to_csv())
            .map_err(|e| Failure { code: 1, message: format!("cannot write {}: {e}", path.display()) })?;
        trace_file = Some(path.display().to_string());
    }
    let code = if res.converged { 0 } else { 3 };
    let mut r = RunReport::new("solve", Some(info), options_json(a));
    r.solve = Some(SolveSummary::new(x0.as_slice().to_vec(), &res, trace_file));
    Ok((r, code))
}

fn cmd_rate(a: &RateArgs) -> Outcome {
    let (map, info) = load_model(&a.input)?;
    let x0 = match (positive_start(&a.start, map.dim())?, &map) {
        (Some(s), _) => s,
        (None, MapModel::Builtin(b)) => PositiveVector::new(b.reference_start().to_vec())?,
        (None, _) => random_start(map.dim(), &mut substream(a.seed, 0)),
    };
    let opts = RateOptions {
        seed: a.seed,
        steps: a.steps,
        start: Some(x0.clone()),
        solve: SolveOptions { tolerance: a.tol, max_iters: a.max_iters, seed: a.seed, ..SolveOptions::default() },
    };
    let analysis = analyze_rate(&map, &opts)?;
    let mut r = RunReport::new("rate", Some(info), options_json(a));
    r.rate = Some(RateSummary::new(x0.as_slice().to_vec(), analysis));
    Ok((r, 0))
}

fn real_start(start: &Option<Vec<f64>>, dim: usize) -> Result<Vec<f64>, Failure> {
    match start {
        Some(v) => {
            check_len("start", v, dim)?;
            Ok(v.clone())
        }
        None => Ok(vec![0.0; dim]),
    }
}

fn cmd_topical(mode: &TopicalMode) -> Outcome {
    let options = options_json(mode);
    let (summary, info, code) = match mode {
        TopicalMode::Km(a) => {
            let (f, info) = load_topical(&a.input)?;
            let start = real_start(&a.start, f.dim())?;
            let opts = KmOptions { tolerance: a.tol, max_iters: a.max_iters, lambda: a.lambda, ..KmOptions::default() };
            let result = km_fixed_point(&f, &start, &opts)?;
            let code = if result.converged { 0 } else { 3 };
            (TopicalSummary::Km { start, result }, info, code)
        }
        TopicalMode::CycleTime(a) => {
            let (f, info) = load_topical(&a.input)?;
            let start = real_start(&a.start, f.dim())?;
            let chi = cycle_time(&f, &start, a.horizon)?;
            (TopicalSummary::CycleTime { start, horizon: a.horizon, cycle_time: chi }, info, 0)
        }
        TopicalMode::HalfLine(a) => {
            let (f, info) = load_topical(&a.input)?;
            check_len("v", &a.v, f.dim())?;
            check_len("w", &a.w, f.dim())?;
            let grid = default_half_line_grid();
            let holds = half_line_check(&f, &HalfLine::new(a.v.clone(), a.w.clone()), &grid)?;
            let code = if holds { 0 } else { 4 };
            (TopicalSummary::HalfLine { v: a.v.clone(), w: a.w.clone(), grid, holds }, info, code)
        }
        TopicalMode::Reduce(a) => {
            let (f, info) = load_topical(&a.input)?;
            check_len("w", &a.w, f.dim())?;
            if a.starts == 0 {
                return Err(usage("--starts must be at least 1"));
            }
            let mut rng = substream(a.seed, 0);
            let starts: Vec<Vec<f64>> =
                (0..a.starts).map(|_| (0..f.dim()).map(|_| rng.gen_range(-10.0..10.0)).collect()).collect();
            let red = reduce_by_half_line(&f, &a.w, &starts)?;
            let reduced = mapspec::to_toml(&MapSpec::Topical(red.reduced));
            (TopicalSummary::Reduce { w: a.w.clone(), starts, burn_in: red.burn_in, reduced }, info, 0)
        }
        TopicalMode::LocalRate(a) => {
            let (f, info) = load_topical(&a.input)?;
            let start = real_start(&a.start, f.dim())?;
            let km = km_fixed_point(&f, &start, &KmOptions::default())?;
            if !km.converged {
                return Err(Failure {
                    code: 3,
                    message: format!("averaged iteration found no fixed point (residual {:e})", km.residual),
                });
            }
            let g = f.averaged(0.5)?;
            let lr = verify_local_linear(&g, &km.point, &start, &LocalLinearOptions::default())?;
            let summary = TopicalSummary::LocalRate {
                start,
                fixed_point: km.point,
                km_iterations: km.iterations,
                m: lr.m,
                gamma: lr.gamma,
                finite_convergence: lr.finite_convergence,
            };
            (summary, info, 0)
        }
    };
    let mut r = RunReport::new("topical", Some(info), options);
    r.topical = Some(summary);
    Ok((r, code))
}

fn cmd_repro(a: &ReproArgs) -> Outcome {
    let which: Vec<BuiltinMap> = match a.which {
        Which::Example1 => vec![BuiltinMap::ArctanAveraging],
        Which::Example2 => vec![BuiltinMap::ArctanMax],
        Which::All => BuiltinMap::ALL.to_vec(),
    };
    let reports = which.into_iter().map(nlpf::repro::reproduce).collect::<nlpf::Result<Vec<_>>>()?;
    let code = if reports.iter().all(|p| p.passed) { 0 } else { 4 };
    let mut r = RunReport::new("repro", None, options_json(a));
    r.repro = Some(reports);
    Ok((r, code))
}

fn cmd_verify(a: &VerifyArgs) -> Outcome {
    let suites: Vec<Suite> = if a.suite == "all" { Suite::ALL.to_vec() } else { vec![a.suite.parse::<Suite>()?] };
    let opts = VerifyOptions {
        seed: a.seed,
        metric_trials: a.trials,
        fault: a.inject_theta_fault.then_some(Fault::CorruptTheta),
    };
    let report = verify::run(&suites, &opts);
    let code = if report.passed() { 0 } else { 4 };
    let mut r = RunReport::new("verify", None, options_json(a));
    r.verify = Some(VerifySummary::new(suites.iter().map(|s| s.name().to_string()).collect(), report));
    Ok((r, code))
}

fn write_report(r: &RunReport, output: Output) {
    match output {
        Output::Json => println!("{}", serde_json::to_string_pretty(r).expect("report serializes")),
        Output::Text => print!("{}", report::render_text(r)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Rate(a) => cmd_rate(a),
        Command::Topical(t) => cmd_topical(&t.mode),
        Command::Repro(a) => cmd_repro(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok((mut r, code)) => {
            if cli.timings {
                r.timings = Some(Timings { total_seconds: started.elapsed().as_secs_f64() });
            }
            write_report(&r, cli.output);
            ExitCode::from(code)
        }
        Err(f) => {
            if cli.output == Output::Json {
                let body = serde_json::json!({ "version": report::VERSION, "error": { "code": f.code, "message": f.message } });
                println!("{}", serde_json::to_string_pretty(&body).expect("error serializes"));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
