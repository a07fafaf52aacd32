//! Seeded generators for random test instances. Every generator draws from
//! a caller-supplied RNG; [`substream`] derives independent, reproducible
//! streams from one seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::PositiveVector;
use crate::linalg::Matrix;
use crate::maps::{Digraph, Expr, ExprMap, MapModel, MatrixMap, TensorEntry, TensorMap};
use crate::topical::{TopicalExpr, TopicalMap};

/// The `stream`-th independent ChaCha stream for `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `exp(U[−s, s]ⁿ)`.
pub fn positive_vector<R: Rng + ?Sized>(dim: usize, spread: f64, rng: &mut R) -> PositiveVector {
    PositiveVector::new((0..dim).map(|_| rng.gen_range(-spread..=spread).exp()).collect())
        .expect("exponentials are positive")
}

/// Random nonnegative matrix: each off-diagonal entry is nonzero with
/// probability `density`; rows that come out empty get one random entry.
pub fn matrix_map<R: Rng + ?Sized>(dim: usize, density: f64, rng: &mut R) -> MatrixMap {
    let mut a = Matrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            if rng.gen_bool(density) {
                a[(i, j)] = rng.gen_range(0.1..2.0);
            }
        }
        if a.row(i).iter().all(|&v| v == 0.0) {
            let j = rng.gen_range(0..dim);
            a[(i, j)] = rng.gen_range(0.1..2.0);
        }
    }
    MatrixMap::new(a).expect("rows are nonzero")
}

/// Random primitive matrix: a Hamiltonian cycle and a positive diagonal plus
/// random extra entries.
pub fn primitive_matrix<R: Rng + ?Sized>(dim: usize, density: f64, rng: &mut R) -> MatrixMap {
    let mut a = matrix_map(dim, density, rng).matrix().clone();
    let mut perm: Vec<usize> = (0..dim).collect();
    perm.shuffle(rng);
    for k in 0..dim {
        let (i, j) = (perm[k], perm[(k + 1) % dim]);
        if a[(i, j)] == 0.0 {
            a[(i, j)] = rng.gen_range(0.1..2.0);
        }
        if a[(k, k)] == 0.0 {
            a[(k, k)] = rng.gen_range(0.1..2.0);
        }
    }
    MatrixMap::new(a).expect("rows are nonzero")
}

/// Random sparse tensor of the given order with `per_row` entries per
/// first index.
pub fn tensor_map<R: Rng + ?Sized>(order: usize, dim: usize, per_row: usize, rng: &mut R) -> TensorMap {
    let mut entries = Vec::new();
    for i in 0..dim {
        for _ in 0..per_row.max(1) {
            let mut index = vec![i];
            index.extend((1..order).map(|_| rng.gen_range(0..dim)));
            entries.push(TensorEntry { index, value: rng.gen_range(0.1..2.0) });
        }
    }
    TensorMap::new(order, dim, entries).expect("every row has entries")
}

/// Which node kinds [`expr_map`] may use above the monomial leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExprKinds {
    pub sum: bool,
    pub max: bool,
    pub min: bool,
}

impl ExprKinds {
    pub const ALL: ExprKinds = ExprKinds { sum: true, max: true, min: true };
    pub const SMOOTH: ExprKinds = ExprKinds { sum: true, max: false, min: false };
    pub const PIECEWISE: ExprKinds = ExprKinds { sum: false, max: true, min: true };
}

pub fn monomial<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Expr {
    let support = rng.gen_range(1..=dim.min(3));
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.shuffle(rng);
    let weights: Vec<f64> = (0..support).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut exps = vec![0.0; dim];
    for (k, w) in weights.iter().enumerate() {
        exps[idx[k]] = w / total;
    }
    // force an exact unit sum
    let s: f64 = exps.iter().sum();
    exps[idx[0]] += 1.0 - s;
    Expr::Monomial { coef: rng.gen_range(0.2..2.0), exps }
}

fn expr_node<R: Rng + ?Sized>(dim: usize, depth: usize, kinds: ExprKinds, rng: &mut R) -> Expr {
    let mut ops = Vec::new();
    if kinds.sum {
        ops.push(0);
    }
    if kinds.max {
        ops.push(1);
    }
    if kinds.min {
        ops.push(2);
    }
    if depth == 0 || ops.is_empty() || rng.gen_bool(0.3) {
        return monomial(dim, rng);
    }
    let children: Vec<Expr> = (0..rng.gen_range(2..=3)).map(|_| expr_node(dim, depth - 1, kinds, rng)).collect();
    match ops[rng.gen_range(0..ops.len())] {
        0 => Expr::Sum(children),
        1 => Expr::Max(children),
        _ => Expr::Min(children),
    }
}

pub fn expr_map<R: Rng + ?Sized>(dim: usize, depth: usize, kinds: ExprKinds, rng: &mut R) -> ExprMap {
    ExprMap::new((0..dim).map(|_| expr_node(dim, depth, kinds, rng)).collect()).expect("generated expressions are valid")
}

/// One of the model kinds above, chosen uniformly.
pub fn map_model<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> MapModel {
    match rng.gen_range(0..3) {
        0 => matrix_map(dim, 0.5, rng).into(),
        1 => tensor_map(rng.gen_range(2..=4), dim, 2, rng).into(),
        _ => expr_map(dim, 2, ExprKinds::ALL, rng).into(),
    }
}

pub fn digraph<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Digraph {
    let mut g = Digraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(p) {
                g.add_arc(i, j);
            }
        }
    }
    g
}

/// A random probability vector with the given number of nonzero entries.
pub fn stochastic_row<R: Rng + ?Sized>(dim: usize, support: usize, rng: &mut R) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.shuffle(rng);
    let mut row = vec![0.0; dim];
    for &j in &idx[..support.clamp(1, dim)] {
        row[j] = rng.gen_range(0.05..1.0);
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    let s: f64 = row.iter().sum();
    row[idx[0]] += 1.0 - s;
    row
}

/// A random additively homogeneous min-max map with a known fixed point `u`:
/// each coordinate is `min` over 1–2 groups of `max` over 1–3 affine terms
/// with stochastic rows, offsets chosen so that exactly one group attains
/// `u_i` and the others lie strictly above it.
pub fn min_max_with_fixed_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> (TopicalMap, Vec<f64>) {
    let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut coords = Vec::with_capacity(dim);
    for i in 0..dim {
        let groups = rng.gen_range(1..=2);
        let tight = rng.gen_range(0..groups);
        let mut mins = Vec::new();
        for g in 0..groups {
            let slack = if g == tight { 0.0 } else { rng.gen_range(0.1..1.0) };
            let terms = rng.gen_range(1..=3);
            let top = rng.gen_range(0..terms);
            let maxes: Vec<TopicalExpr> = (0..terms)
                .map(|t| {
                    let a = stochastic_row(dim, rng.gen_range(1..=dim), rng);
                    let au: f64 = a.iter().zip(&u).map(|(x, y)| x * y).sum();
                    let gap = if t == top { 0.0 } else { rng.gen_range(0.1..1.0) };
                    TopicalExpr::affine(a, u[i] + slack - gap - au)
                })
                .collect();
            mins.push(TopicalExpr::Max(maxes));
        }
        coords.push(TopicalExpr::Min(mins));
    }
    (TopicalMap::from_exprs(coords).expect("stochastic rows"), u)
}

/// A random action table (value-iteration operator) with a known fixed
/// point: every state has 1–3 actions; one action per state is tight at `u`
/// and the others have negative slack.
pub fn mdp_with_fixed_point<R: Rng + ?Sized>(states: usize, rng: &mut R) -> (TopicalMap, Vec<f64>) {
    let u: Vec<f64> = (0..states).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let mut coords = Vec::with_capacity(states);
    for s in 0..states {
        let actions = rng.gen_range(1..=3);
        let tight = rng.gen_range(0..actions);
        let terms = (0..actions)
            .map(|a| {
                let p = stochastic_row(states, rng.gen_range(1..=states), rng);
                let pu: f64 = p.iter().zip(&u).map(|(x, y)| x * y).sum();
                let slack = if a == tight { 0.0 } else { rng.gen_range(0.1..1.0) };
                TopicalExpr::affine(p, u[s] - slack - pu)
            })
            .collect();
        coords.push(TopicalExpr::Max(terms));
    }
    (TopicalMap::from_exprs(coords).expect("stochastic rows"), u)
}

/// Random min-max map with stochastic rows and no planted fixed point.
pub fn topical_map<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> TopicalMap {
    let coords = (0..dim)
        .map(|_| {
            let groups = (0..rng.gen_range(1..=2))
                .map(|_| {
                    TopicalExpr::Max(
                        (0..rng.gen_range(1..=3))
                            .map(|_| TopicalExpr::affine(stochastic_row(dim, rng.gen_range(1..=dim), rng), rng.gen_range(-2.0..2.0)))
                            .collect(),
                    )
                })
                .collect();
            TopicalExpr::Min(groups)
        })
        .collect();
    TopicalMap::from_exprs(coords).expect("stochastic rows")
}
