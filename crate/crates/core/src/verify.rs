//! Seeded property suites over random instances. Each property draws from
//! its own substream of the suite seed, so a run is reproducible and adding
//! trials to one property leaves the others unchanged.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::{hilbert, m_upper, sup_norm, thompson, PositiveVector};
use crate::error::{Error, Result};
use crate::iterate::{iterate_damped, iterate_normalized, random_start, record_orbit, solve, SolveOptions};
use crate::linalg::{eig_moduli, Matrix};
use crate::maps::{BuiltinMap, Digraph, MapModel, MatrixMap, TensorEntry, TensorMap};
use crate::random::{self, ExprKinds};
use crate::rate::{
    combine_rates, empirical_rate, hilbert_distances, jacobian_rate_bound, refine_eigenvector, truncate_at_convergence,
    RateClass,
};
use crate::structure::{cw_number, has_positive_eigenvector, is_type_k, scc};
use crate::topical::{cycle_time, km_fixed_point, verify_local_linear, KmOptions, LocalLinearOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Metrics,
    Models,
    Structure,
    Rates,
    Topical,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Metrics, Suite::Models, Suite::Structure, Suite::Rates, Suite::Topical];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Metrics => "metrics",
            Suite::Models => "models",
            Suite::Structure => "structure",
            Suite::Rates => "rates",
            Suite::Topical => "topical",
        }
    }

    fn index(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).expect("listed") as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

/// Deliberate corruption used to check that failures are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    /// Adds 0.5 to every empirical rate compared against a bound.
    CorruptTheta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Trials for each metric property.
    pub metric_trials: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, metric_trials: 10_000, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub suite: Suite,
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Trials whose instance did not meet the property's hypothesis.
    pub skipped: usize,
    pub first_failure: Option<String>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyResult::passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &PropertyResult> {
        self.properties.iter().filter(|p| !p.passed())
    }
}

struct Tally {
    result: PropertyResult,
}

impl Tally {
    fn new(suite: Suite, name: &str) -> Self {
        Self {
            result: PropertyResult {
                suite,
                name: name.to_string(),
                trials: 0,
                failures: 0,
                skipped: 0,
                first_failure: None,
            },
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.result.trials += 1;
        if !ok {
            self.result.failures += 1;
            if self.result.first_failure.is_none() {
                self.result.first_failure = Some(detail());
            }
        }
    }

    /// Errors count as failures.
    fn check_result(&mut self, r: Result<bool>, detail: impl FnOnce() -> String) {
        match r {
            Ok(ok) => self.check(ok, detail),
            Err(e) => self.check(false, || format!("{}: {e}", detail())),
        }
    }

    fn skip(&mut self) {
        self.result.skipped += 1;
    }
}

/// Runs the given suites in order.
pub fn run(suites: &[Suite], opts: &VerifyOptions) -> VerifyReport {
    let mut properties = Vec::new();
    for &s in suites {
        let ctx = Ctx { suite: s, opts: *opts };
        let tallies = match s {
            Suite::Metrics => metrics(&ctx),
            Suite::Models => models(&ctx),
            Suite::Structure => structure(&ctx),
            Suite::Rates => rates(&ctx),
            Suite::Topical => topical(&ctx),
        };
        properties.extend(tallies.into_iter().map(|t| t.result));
    }
    VerifyReport { seed: opts.seed, properties }
}

struct Ctx {
    suite: Suite,
    opts: VerifyOptions,
}

impl Ctx {
    fn rng(&self, property: u64) -> rand_chacha::ChaCha8Rng {
        random::substream(self.opts.seed, 1000 * (self.suite.index() + 1) + property)
    }

    fn tally(&self, name: &str) -> Tally {
        Tally::new(self.suite, name)
    }
}

fn vec_str(x: &[f64]) -> String {
    format!("{x:?}")
}

/// The order-3 tensor with `A₁₁₁ = 1`, `A₁₂₂ = 2`, `A₂₁₂ = 1`.
pub fn example_tensor() -> TensorMap {
    TensorMap::new(
        3,
        2,
        vec![
            TensorEntry { index: vec![0, 0, 0], value: 1.0 },
            TensorEntry { index: vec![0, 1, 1], value: 2.0 },
            TensorEntry { index: vec![1, 0, 1], value: 1.0 },
        ],
    )
    .expect("valid tensor")
}

/// Every model kind: both builtins, the example tensor, and random matrix,
/// tensor, smooth and piecewise expression maps in dimensions 2 to 8.
pub fn shipped_models<R: Rng + ?Sized>(rng: &mut R) -> Vec<MapModel> {
    let mut out: Vec<MapModel> = BuiltinMap::ALL.iter().map(|&b| b.into()).collect();
    out.push(example_tensor().into());
    for dim in 2..=8 {
        out.push(random::matrix_map(dim, 0.5, rng).into());
        out.push(random::tensor_map(rng.gen_range(2..=4), dim, 2, rng).into());
        out.push(random::expr_map(dim, 2, ExprKinds::SMOOTH, rng).into());
        out.push(random::expr_map(dim, 2, ExprKinds::ALL, rng).into());
    }
    out
}

fn metrics(ctx: &Ctx) -> Vec<Tally> {
    let n = ctx.opts.metric_trials;
    let slack = 1e-12;
    let mut out = Vec::new();

    let mut t = ctx.tally("hilbert_le_twice_thompson");
    let mut rng = ctx.rng(0);
    for _ in 0..n {
        let dim = rng.gen_range(2..=8);
        let x = random::positive_vector(dim, 3.0, &mut rng);
        let y = random::positive_vector(dim, 3.0, &mut rng);
        let (h, d) = (hilbert(&x, &y).unwrap(), thompson(&x, &y).unwrap());
        t.check(h <= 2.0 * d + slack, || format!("x={x:?} y={y:?}: d_H={h} d_T={d}"));
    }
    out.push(t);

    let mut t = ctx.tally("ratio_product_at_least_one");
    let mut rng = ctx.rng(1);
    for k in 0..n {
        let dim = rng.gen_range(2..=8);
        let x = random::positive_vector(dim, 3.0, &mut rng);
        let proportional = k % 4 == 0;
        let y = if proportional {
            x.scaled(rng.gen_range(-3.0f64..3.0).exp()).unwrap()
        } else {
            random::positive_vector(dim, 3.0, &mut rng)
        };
        let p = m_upper(&x, &y).unwrap() * m_upper(&y, &x).unwrap();
        let ok = if proportional { (p - 1.0).abs() <= 1e-12 } else { p >= 1.0 - 1e-15 && (p > 1.0 || hilbert(&x, &y).unwrap() == 0.0) };
        t.check(ok, || format!("x={x:?} y={y:?}: product {p}"));
    }
    out.push(t);

    let mut th = ctx.tally("thompson_triangle");
    let mut hh = ctx.tally("hilbert_triangle");
    let mut rng = ctx.rng(2);
    for _ in 0..n {
        let dim = rng.gen_range(2..=8);
        let [x, y, z] = [0; 3].map(|_| random::positive_vector(dim, 3.0, &mut rng));
        let (a, b, c) = (thompson(&x, &z).unwrap(), thompson(&x, &y).unwrap(), thompson(&y, &z).unwrap());
        th.check(a <= b + c + slack, || format!("x={x:?} y={y:?} z={z:?}"));
        let (a, b, c) = (hilbert(&x, &z).unwrap(), hilbert(&x, &y).unwrap(), hilbert(&y, &z).unwrap());
        hh.check(a <= b + c + slack, || format!("x={x:?} y={y:?} z={z:?}"));
    }
    out.push(th);
    out.push(hh);

    let mut t = ctx.tally("hilbert_scale_invariance");
    let mut rng = ctx.rng(3);
    for _ in 0..n {
        let dim = rng.gen_range(2..=8);
        let x = random::positive_vector(dim, 3.0, &mut rng);
        let y = random::positive_vector(dim, 3.0, &mut rng);
        let (a, b) = (rng.gen_range(-5.0f64..5.0).exp(), rng.gen_range(-5.0f64..5.0).exp());
        let h0 = hilbert(&x, &y).unwrap();
        let h1 = hilbert(&x.scaled(a).unwrap(), &y.scaled(b).unwrap()).unwrap();
        t.check((h0 - h1).abs() <= slack, || format!("x={x:?} y={y:?} a={a} b={b}: {h0} vs {h1}"));
    }
    out.push(t);

    let mut t = ctx.tally("sup_norm_normality");
    let mut rng = ctx.rng(4);
    for _ in 0..n {
        let dim = rng.gen_range(2..=8);
        let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..10.0)).collect();
        let x: Vec<f64> = y.iter().map(|v| v * rng.gen_range(0.0..=1.0)).collect();
        t.check(sup_norm(&x) <= sup_norm(&y), || format!("x={} y={}", vec_str(&x), vec_str(&y)));
    }
    out.push(t);

    let mut tt = ctx.tally("thompson_nonexpansive");
    let mut th = ctx.tally("hilbert_nonexpansive");
    let mut rng = ctx.rng(5);
    let maps = shipped_models(&mut rng);
    for k in 0..n {
        let map = &maps[k % maps.len()];
        let x = random::positive_vector(map.dim(), 2.0, &mut rng);
        let y = random::positive_vector(map.dim(), 2.0, &mut rng);
        let r = map.eval(&x).and_then(|fx| {
            let fy = map.eval(&y)?;
            Ok((thompson(&fx, &fy)?, thompson(&x, &y)?, hilbert(&fx, &fy)?, hilbert(&x, &y)?))
        });
        match r {
            Ok((a, b, c, d)) => {
                tt.check(a <= b + 1e-10, || format!("{} map, x={x:?} y={y:?}: {a} > {b}", map.kind()));
                th.check(c <= d + 1e-10, || format!("{} map, x={x:?} y={y:?}: {c} > {d}", map.kind()));
            }
            Err(e) => {
                tt.check(false, || format!("{} map: {e}", map.kind()));
                th.skip();
            }
        }
    }
    out.push(tt);
    out.push(th);
    out
}

fn models(ctx: &Ctx) -> Vec<Tally> {
    let mut out = Vec::new();
    let maps = shipped_models(&mut ctx.rng(0));

    let mut t = ctx.tally("order_preserving");
    let mut rng = ctx.rng(1);
    for map in &maps {
        for _ in 0..1000 {
            let x = random::positive_vector(map.dim(), 2.0, &mut rng);
            let y: Vec<f64> = x
                .as_slice()
                .iter()
                .map(|v| if rng.gen_bool(0.3) { *v } else { v * rng.gen_range(0.0f64..1.5).exp() })
                .collect();
            let y = PositiveVector::new(y).unwrap();
            let r = map.eval(&x).and_then(|fx| {
                let fy = map.eval(&y)?;
                Ok(fx.as_slice().iter().zip(fy.as_slice()).all(|(a, b)| *a <= b * (1.0 + 1e-12)))
            });
            t.check_result(r, || format!("{} map, x={x:?} y={y:?}", map.kind()));
        }
    }
    out.push(t);

    let mut t = ctx.tally("homogeneous_degree_one");
    let mut rng = ctx.rng(2);
    for map in &maps {
        for _ in 0..100 {
            let x = random::positive_vector(map.dim(), 2.0, &mut rng);
            for s in [0.5, 2.0, 10.0] {
                let r = map.eval(&x).and_then(|fx| {
                    let fsx = map.eval(&x.scaled(s)?)?;
                    let err = fsx.as_slice().iter().zip(fx.as_slice()).map(|(a, b)| (a - s * b).abs()).fold(0.0, f64::max);
                    Ok(err <= 1e-10 * s * fx.sup_norm())
                });
                t.check_result(r, || format!("{} map, x={x:?}, t={s}", map.kind()));
            }
        }
    }
    out.push(t);

    let mut t = ctx.tally("jacobian_pattern_matches_digraph");
    let mut rng = ctx.rng(3);
    for map in maps.iter().filter(|m| fixed_pattern(m)) {
        let g = map.digraph();
        for _ in 0..100 {
            let x = random::positive_vector(map.dim(), 2.0, &mut rng);
            let r = map.jacobian(&x).map(|j| Digraph::from_pattern(&j) == g);
            t.check_result(r, || format!("{} map at x={x:?}", map.kind()));
        }
    }
    out.push(t);

    let mut t = ctx.tally("jacobian_matches_finite_differences");
    let mut rng = ctx.rng(4);
    for map in &maps {
        for _ in 0..20 {
            let x = random::positive_vector(map.dim(), 1.0, &mut rng);
            match fd_error(map, &x) {
                Ok(Some(err)) => t.check(err <= 1e-5, || format!("{} map at x={x:?}: relative error {err:e}", map.kind())),
                Ok(None) | Err(Error::NotDifferentiable { .. }) => t.skip(),
                Err(e) => t.check(false, || format!("{} map at x={x:?}: {e}", map.kind())),
            }
        }
    }
    out.push(t);
    out
}

/// Maps whose Jacobian has the same zero pattern at every point.
fn fixed_pattern(map: &MapModel) -> bool {
    match map {
        MapModel::Matrix(_) | MapModel::Tensor(_) => true,
        MapModel::Expr(e) => !e.has_max() && !e.has_min(),
        MapModel::Builtin(_) => false,
    }
}

/// Largest relative deviation of the Jacobian from central differences, or
/// `None` when a Max/Min branch switches inside the stencil.
fn fd_error(map: &MapModel, x: &PositiveVector) -> Result<Option<f64>> {
    let jac = map.jacobian(x)?;
    let n = map.dim();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let h = 1e-6 * x[j];
        let mut xp = x.as_slice().to_vec();
        let mut xm = xp.clone();
        xp[j] += h;
        xm[j] -= h;
        let (xp, xm) = (PositiveVector::new(xp)?, PositiveVector::new(xm)?);
        let (jp, jm) = (map.jacobian(&xp)?, map.jacobian(&xm)?);
        let (fp, fm) = (map.eval(&xp)?, map.eval(&xm)?);
        for i in 0..n {
            let scale = (0..n).map(|k| jac[(i, k)].abs()).fold(0.0, f64::max).max(1e-300);
            if (jp[(i, j)] - jm[(i, j)]).abs() > 1e-3 * scale {
                return Ok(None);
            }
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            worst = worst.max((fd - jac[(i, j)]).abs() / scale);
        }
    }
    Ok(Some(worst))
}

fn reachability(g: &Digraph) -> Vec<Vec<bool>> {
    let n = g.vertex_count();
    let mut r = vec![vec![false; n]; n];
    for (s, row) in r.iter_mut().enumerate() {
        let mut stack = vec![s];
        row[s] = true;
        while let Some(v) = stack.pop() {
            for &w in g.successors(v) {
                if !row[w] {
                    row[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    r
}

/// Checks that `scc` partitions the vertices into mutual-reachability
/// classes listed in topological order.
pub fn scc_agrees_with_reachability(g: &Digraph) -> bool {
    let n = g.vertex_count();
    let classes = scc(g);
    let mut owner = vec![usize::MAX; n];
    for (c, class) in classes.iter().enumerate() {
        for &v in class {
            if owner[v] != usize::MAX {
                return false;
            }
            owner[v] = c;
        }
    }
    if owner.contains(&usize::MAX) {
        return false;
    }
    let r = reachability(g);
    let partition_ok = (0..n).all(|i| (0..n).all(|j| (owner[i] == owner[j]) == (r[i][j] && r[j][i])));
    partition_ok && g.arcs().all(|(i, j)| owner[i] <= owner[j])
}

fn structure(ctx: &Ctx) -> Vec<Tally> {
    let mut out = Vec::new();

    let mut t = ctx.tally("scc_matches_reachability");
    for n in 1..=3usize {
        let pairs = n * n;
        for mask in 0u32..(1 << pairs) {
            let g = Digraph::from_arcs(n, (0..pairs).filter(|b| mask >> b & 1 == 1).map(|b| (b / n, b % n))).unwrap();
            t.check(scc_agrees_with_reachability(&g), || format!("{g}"));
        }
    }
    let mut rng = ctx.rng(0);
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let p = rng.gen_range(0.05..0.6);
        let g = random::digraph(n, p, &mut rng);
        t.check(scc_agrees_with_reachability(&g), || format!("{g}"));
    }
    out.push(t);

    let mut t = ctx.tally("cw_number_matches_spectral_radius");
    let mut rng = ctx.rng(1);
    for _ in 0..40 {
        let dim = rng.gen_range(2..=8);
        let m = random::matrix_map(dim, 0.5, &mut rng);
        let r = eig_moduli(m.matrix()).and_then(|moduli| {
            let model: MapModel = m.clone().into();
            let cw = cw_number(&model, &(0..dim).collect::<Vec<_>>())?;
            Ok(((cw.value - moduli[0]).abs() <= 1e-8 * moduli[0], cw.value, moduli[0]))
        });
        match r {
            Ok((ok, cw, rho)) => t.check(ok, || format!("{:?}: cw {cw} vs rho {rho}", m.matrix().rows())),
            Err(e) => t.check(false, || format!("{:?}: {e}", m.matrix().rows())),
        }
    }
    out.push(t);

    let mut exist = ctx.tally("existence_realized");
    let mut brackets = ctx.tally("orbit_brackets_nested");
    let mut towards = ctx.tally("hilbert_to_eigenvector_nonincreasing");
    let mut rng = ctx.rng(2);
    for _ in 0..40 {
        let dim = rng.gen_range(2..=5);
        let map = random::map_model(dim, &mut rng);
        let x0 = random_start(dim, &mut rng);
        match record_orbit(&map, &x0, 200) {
            Ok(trace) => {
                let ok = trace.max_ratio.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
                    && trace.min_ratio.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
                brackets.check(ok, || format!("{map:?} from {x0:?}"));
            }
            Err(e) => brackets.check(false, || format!("{map:?}: {e}")),
        }
        let cert = match has_positive_eigenvector(&map) {
            Ok(c) => c,
            Err(e) => {
                exist.check(false, || format!("{map:?}: {e}"));
                continue;
            }
        };
        if !cert.exists {
            exist.skip();
            towards.skip();
            continue;
        }
        let found = find_eigenvector(&map);
        match &found {
            Ok(u) => {
                let res = hilbert(&map.eval(u).unwrap(), u).unwrap();
                exist.check(res <= 1e-8, || format!("{map:?}: residual {res:e}"));
            }
            Err(e) => exist.check(false, || format!("{map:?}: {e}")),
        }
        let Ok(u) = found else { continue };
        let start = random_start(dim, &mut rng);
        match record_orbit(&map, &start, 200) {
            Ok(trace) => {
                let d = hilbert_distances(&trace, &u);
                let ok = d.windows(2).all(|w| w[1] <= w[0] + 1e-9);
                towards.check(ok, || format!("{map:?} from {start:?}"));
            }
            Err(e) => towards.check(false, || format!("{map:?}: {e}")),
        }
    }
    out.push(exist);
    out.push(brackets);
    out.push(towards);

    let mut conv = ctx.tally("type_k_converges_from_random_starts");
    let mut agree = ctx.tally("damped_agrees_with_plain");
    let mut rng = ctx.rng(3);
    let mut maps: Vec<MapModel> = Vec::new();
    for dim in 2..=6 {
        maps.push(random::primitive_matrix(dim, 0.4, &mut rng).into());
        maps.push(random::expr_map(dim, 2, ExprKinds::SMOOTH, &mut rng).into());
    }
    maps.push(example_tensor().into());
    for map in &maps {
        let eligible = is_type_k(map) && has_positive_eigenvector(map).map(|c| c.exists).unwrap_or(false);
        if !eligible {
            conv.skip();
            agree.skip();
            continue;
        }
        let opts = SolveOptions::default();
        for _ in 0..50 {
            let x0 = random_start(map.dim(), &mut rng);
            let plain = iterate_normalized(map, &x0, &opts);
            conv.check_result(plain.as_ref().map(|r| r.converged).map_err(Clone::clone), || format!("{map:?} from {x0:?}"));
            let damped = iterate_damped(map, &x0, &SolveOptions { damping: Some(0.5), ..opts });
            if let (Ok(p), Ok(d)) = (&plain, &damped) {
                if p.converged && d.converged {
                    let h = hilbert(&p.eigenvector, &d.eigenvector).unwrap();
                    agree.check(h <= 1e-8, || format!("{map:?} from {x0:?}: d_H = {h:e}"));
                } else {
                    agree.skip();
                }
            }
        }
    }
    out.push(conv);
    out.push(agree);
    out
}

fn find_eigenvector(map: &MapModel) -> Result<PositiveVector> {
    let x0 = PositiveVector::ones(map.dim());
    let mut opts = SolveOptions::default();
    let plain = solve(map, &x0, &opts)?;
    if plain.converged {
        return Ok(plain.eigenvector);
    }
    opts.damping = Some(0.5);
    let damped = solve(map, &x0, &opts)?;
    if damped.converged {
        return Ok(damped.eigenvector);
    }
    Err(Error::NotConverged { iterations: damped.iterations, period: plain.period_detected })
}

fn permuted(a: &Matrix, perm: &[usize]) -> Matrix {
    let n = a.dim();
    let mut b = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            b[(perm[i], perm[j])] = a[(i, j)];
        }
    }
    b
}

/// `B + Bᵀ` for a random primitive `B`: primitive with a real spectrum.
/// Complex subdominant eigenvalues rotate the error slowly enough that the
/// few dozen informative distances of a fast orbit need not show the
/// asymptotic rate.
fn symmetric_primitive<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> MatrixMap {
    let b = random::primitive_matrix(dim, 0.5, rng).matrix().clone();
    let mut a = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            a[(i, j)] = b[(i, j)] + b[(j, i)];
        }
    }
    MatrixMap::new(a).expect("rows are nonzero")
}

fn rates(ctx: &Ctx) -> Vec<Tally> {
    let mut out = Vec::new();
    let corrupt = matches!(ctx.opts.fault, Some(Fault::CorruptTheta));

    let mut sym = ctx.tally("combine_rates_symmetric");
    let mut mono = ctx.tally("combine_rates_monotone");
    let mut rng = ctx.rng(0);
    for _ in 0..500 {
        let eta = rng.gen_range(0.01..0.99);
        let theta = rng.gen_range(0.01..0.99);
        let (l1, r1) = combine_rates(eta, theta).unwrap();
        let (l2, r2) = combine_rates(theta, eta).unwrap();
        sym.check((l1 + l2 - 1.0).abs() <= 1e-12 && (r1 - r2).abs() <= 1e-12, || format!("eta={eta} theta={theta}"));
        let bump = rng.gen_range(1e-3..0.009);
        let (_, r_eta) = combine_rates(eta + bump, theta).unwrap();
        let (_, r_theta) = combine_rates(eta, theta + bump).unwrap();
        mono.check(r_eta > r1 && r_theta > r1, || format!("eta={eta} theta={theta} bump={bump}"));
    }
    out.push(sym);
    out.push(mono);

    let mut t = ctx.tally("combine_rates_limit");
    for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let gaps: Vec<f64> = (1..=8).map(|k| (combine_rates(10f64.powi(-16 * k), theta).unwrap().1 - theta).abs()).collect();
        let ok = gaps.windows(2).all(|w| w[1] < w[0]) && gaps[gaps.len() - 1] < 1e-2;
        t.check(ok, || format!("theta={theta}: gaps {gaps:?}"));
    }
    out.push(t);

    let mut t = ctx.tally("eig_moduli_permutation_invariant");
    let mut rng = ctx.rng(1);
    for _ in 0..100 {
        let dim = rng.gen_range(2..=8);
        let a = random::matrix_map(dim, 1.0, &mut rng).matrix().clone();
        let mut perm: Vec<usize> = (0..dim).collect();
        perm.shuffle(&mut rng);
        let r = eig_moduli(&a).and_then(|m1| {
            let m2 = eig_moduli(&permuted(&a, &perm))?;
            let scale = m1[0].max(1.0);
            Ok(m1.iter().zip(&m2).all(|(x, y)| (x - y).abs() <= 1e-8 * scale))
        });
        t.check_result(r, || format!("{:?} under {perm:?}", a.rows()));
    }
    out.push(t);

    let mut bound = ctx.tally("rate_within_jacobian_bound");
    let mut linear = ctx.tally("primitive_orbit_linear");
    let mut rng = ctx.rng(2);
    let mut mats: Vec<MatrixMap> = vec![MatrixMap::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()];
    mats.extend((0..4).map(|k| symmetric_primitive(k + 2, &mut rng)));
    for m in &mats {
        let map: MapModel = m.clone().into();
        let setup = find_eigenvector(&map)
            .and_then(|u| refine_eigenvector(&map, &u))
            .and_then(|(u, _)| Ok((jacobian_rate_bound(&map, &u)?, u)));
        let (jb, u) = match setup {
            Ok(v) => v,
            Err(e) => {
                bound.check(false, || format!("{:?}: {e}", m.matrix().rows()));
                continue;
            }
        };
        for _ in 0..20 {
            let x0 = random_start(map.dim(), &mut rng);
            let report = record_orbit(&map, &x0, 2000).and_then(|mut trace| {
                truncate_at_convergence(&mut trace, &u, 20);
                empirical_rate(&hilbert_distances(&trace, &u))
            });
            let report = match report {
                Ok(r) => r,
                Err(e) => {
                    bound.check(false, || format!("{:?}: {e}", m.matrix().rows()));
                    continue;
                }
            };
            let theta = if corrupt { report.theta_hat + 0.5 } else { report.theta_hat };
            match jb.certificate() {
                Some(b) => bound.check(theta <= b + 0.05, || {
                    format!("{:?} from {x0:?}: theta_hat {theta} > bound {b} + 0.05", m.matrix().rows())
                }),
                None => bound.skip(),
            }
            linear.check(report.classification == RateClass::Linear, || {
                format!("{:?} from {x0:?}: classified {}", m.matrix().rows(), report.classification)
            });
        }
    }
    out.push(bound);
    out.push(linear);

    let mut t = ctx.tally("arctan_orbit_sublinear");
    for b in BuiltinMap::ALL {
        let map: MapModel = b.into();
        let r = PositiveVector::new(b.reference_start().to_vec())
            .and_then(|x0| record_orbit(&map, &x0, 1000))
            .and_then(|trace| empirical_rate(&hilbert_distances(&trace, &PositiveVector::ones(2))))
            .map(|r| r.classification == RateClass::Sublinear);
        t.check_result(r, || b.tag().to_string());
    }
    out.push(t);
    out
}

fn topical(ctx: &Ctx) -> Vec<Tally> {
    let mut out = Vec::new();
    let mut rng = ctx.rng(0);
    let maps: Vec<_> = (0..20)
        .map(|k| {
            let dim = 2 + k % 5;
            match k % 3 {
                0 => random::topical_map(dim, &mut rng),
                1 => random::min_max_with_fixed_point(dim, &mut rng).0,
                _ => random::mdp_with_fixed_point(dim, &mut rng).0,
            }
        })
        .collect();
    let point = |dim: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect() };

    let mut t = ctx.tally("sup_norm_nonexpansive");
    let mut rng = ctx.rng(1);
    for k in 0..1000 {
        let f = &maps[k % maps.len()];
        let (x, y) = (point(f.dim(), &mut rng), point(f.dim(), &mut rng));
        let r = f.eval(&x).and_then(|fx| {
            let fy = f.eval(&y)?;
            Ok(sup_dist(&fx, &fy) <= sup_dist(&x, &y) + 1e-12)
        });
        t.check_result(r, || format!("{f:?} at {x:?}, {y:?}"));
    }
    out.push(t);

    let mut t = ctx.tally("additively_homogeneous");
    let mut rng = ctx.rng(2);
    for f in &maps {
        for _ in 0..20 {
            let x = point(f.dim(), &mut rng);
            for c in [-5.0, 1.0, 10.0] {
                let xc: Vec<f64> = x.iter().map(|v| v + c).collect();
                let r = f.eval(&x).and_then(|fx| {
                    let fxc = f.eval(&xc)?;
                    Ok(fxc.iter().zip(&fx).all(|(a, b)| (a - b - c).abs() <= 1e-12 * (1.0 + a.abs())))
                });
                t.check_result(r, || format!("{f:?} at {x:?}, c={c}"));
            }
        }
    }
    out.push(t);

    let mut t = ctx.tally("cycle_time_start_independent");
    let mut rng = ctx.rng(3);
    let horizon = 200;
    for f in &maps {
        let (x, y) = (point(f.dim(), &mut rng), point(f.dim(), &mut rng));
        let r = cycle_time(f, &x, horizon).and_then(|cx| {
            let cy = cycle_time(f, &y, horizon)?;
            Ok(sup_dist(&cx, &cy) <= 2.0 * sup_dist(&x, &y) / horizon as f64 + 1e-12)
        });
        t.check_result(r, || format!("{f:?} from {x:?}, {y:?}"));
    }
    out.push(t);

    let mut t = ctx.tally("log_conjugate_bridge");
    let mut rng = ctx.rng(4);
    for _ in 0..50 {
        let dim = rng.gen_range(2..=6);
        let e = random::expr_map(dim, 2, ExprKinds::PIECEWISE, &mut rng);
        let tmap = e.log_conjugate();
        let model: MapModel = e.clone().into();
        for _ in 0..10 {
            let x = random::positive_vector(dim, 2.0, &mut rng);
            let r = model.eval(&x).and_then(|fx| {
                let lhs = tmap.eval(&x.ln())?;
                Ok(lhs.iter().zip(fx.as_slice()).all(|(a, b)| (a - b.ln()).abs() <= 1e-12 * (1.0 + a.abs())))
            });
            t.check_result(r, || format!("{e:?} at {x:?}"));
        }
    }
    out.push(t);

    let mut t = ctx.tally("km_success_implies_local_linear");
    let mut rng = ctx.rng(5);
    for k in 0..40 {
        let dim = rng.gen_range(2..=4);
        let f = if k % 2 == 0 {
            random::min_max_with_fixed_point(dim, &mut rng).0
        } else {
            random::mdp_with_fixed_point(dim, &mut rng).0
        };
        let x0 = point(dim, &mut rng);
        let km = match km_fixed_point(&f, &x0, &KmOptions::default()) {
            Ok(km) if km.converged => km,
            Ok(_) => {
                t.skip();
                continue;
            }
            Err(e) => {
                t.check(false, || format!("{f:?}: {e}"));
                continue;
            }
        };
        let r = f
            .averaged(KmOptions::default().lambda)
            .and_then(|g| verify_local_linear(&g, &km.point, &x0, &LocalLinearOptions::default()))
            .map(|lr| lr.m <= 256 && lr.gamma < 1.0);
        t.check_result(r, || format!("{f:?} from {x0:?}"));
    }
    out.push(t);
    out
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(seed: u64) -> VerifyOptions {
        VerifyOptions { seed, metric_trials: 500, fault: None }
    }

    #[test]
    fn suites_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn metrics_pass_and_are_deterministic() {
        let a = run(&[Suite::Metrics], &quick(1));
        assert!(a.passed(), "{:?}", a.failed().collect::<Vec<_>>());
        assert_eq!(a, run(&[Suite::Metrics], &quick(1)));
        assert!(a.properties.iter().all(|p| p.trials > 0));
    }

    #[test]
    fn corrupted_theta_is_caught() {
        let opts = VerifyOptions { fault: Some(Fault::CorruptTheta), ..quick(3) };
        let r = run(&[Suite::Rates], &opts);
        let failed: Vec<_> = r.failed().map(|p| p.name.as_str()).collect();
        assert_eq!(failed, ["rate_within_jacobian_bound"]);
    }

    #[test]
    fn scc_checker_accepts_chain() {
        let g = Digraph::from_arcs(2, [(0, 1)]).unwrap();
        assert!(scc_agrees_with_reachability(&g));
    }
}
