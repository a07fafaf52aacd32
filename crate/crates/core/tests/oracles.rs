//! Library results against independent oracles: finite differences,
//! brute-force reachability, nalgebra's eigensolver and bisection.

use nalgebra::DMatrix;
use nlpf::cone::{hilbert, PositiveVector};
use nlpf::iterate::{solve, SolveOptions};
use nlpf::linalg::{eig_moduli, Matrix};
use nlpf::maps::{BuiltinMap, Digraph, MapModel, TensorMap};
use nlpf::random::{self, substream, ExprKinds};
use nlpf::structure::{cw_number, scc};
use rand::Rng;

fn example_tensor() -> MapModel {
    TensorMap::parse_text("3 2\n1 1 1 1\n1 2 2 2\n2 1 2 1\n").unwrap().into()
}

fn central_difference(map: &MapModel, x: &[f64], j: usize) -> Vec<f64> {
    let h = 1e-6 * x[j];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[j] += h;
    xm[j] -= h;
    let fp = map.eval(&PositiveVector::new(xp).unwrap()).unwrap();
    let fm = map.eval(&PositiveVector::new(xm).unwrap()).unwrap();
    fp.as_slice().iter().zip(fm.as_slice()).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

#[test]
fn tensor_jacobian_by_hand() {
    let j = example_tensor().jacobian(&PositiveVector::ones(2)).unwrap();
    let s3 = 3f64.sqrt();
    let want = [[1.0 / s3, 2.0 / s3], [0.5, 0.5]];
    for i in 0..2 {
        for k in 0..2 {
            assert!((j[(i, k)] - want[i][k]).abs() < 1e-14);
        }
    }
}

#[test]
fn smooth_jacobians_match_finite_differences() {
    let mut rng = substream(21, 0);
    let mut maps: Vec<MapModel> = vec![example_tensor(), BuiltinMap::ArctanAveraging.into()];
    for dim in 2..=6 {
        maps.push(random::matrix_map(dim, 0.6, &mut rng).into());
        maps.push(random::tensor_map(rng.gen_range(2..=4), dim, 3, &mut rng).into());
        maps.push(random::expr_map(dim, 3, ExprKinds::SMOOTH, &mut rng).into());
    }
    for map in &maps {
        for _ in 0..10 {
            let x = random::positive_vector(map.dim(), 1.0, &mut rng);
            let jac = map.jacobian(&x).unwrap();
            for j in 0..map.dim() {
                let fd = central_difference(map, x.as_slice(), j);
                for (i, v) in fd.iter().enumerate() {
                    let scale = jac[(i, j)].abs().max(1e-3);
                    assert!((v - jac[(i, j)]).abs() / scale < 1e-5, "{map:?} at {x:?}: ({i},{j}) {v} vs {}", jac[(i, j)]);
                }
            }
        }
    }
}

fn closure(n: usize, arcs: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(i, j) in arcs {
        r[i][j] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

fn check_scc(n: usize, arcs: &[(usize, usize)]) {
    let g = Digraph::from_arcs(n, arcs.iter().copied()).unwrap();
    let classes = scc(&g);
    let r = closure(n, arcs);
    let mut owner = vec![None; n];
    for (c, class) in classes.iter().enumerate() {
        assert!(class.windows(2).all(|w| w[0] < w[1]));
        for &v in class {
            assert!(owner[v].replace(c).is_none(), "vertex {v} listed twice");
        }
    }
    let owner: Vec<usize> = owner.into_iter().map(|o| o.expect("every vertex classified")).collect();
    for i in 0..n {
        for j in 0..n {
            assert_eq!(owner[i] == owner[j], r[i][j] && r[j][i], "{arcs:?}: vertices {i}, {j}");
        }
    }
    for &(i, j) in arcs {
        assert!(owner[i] <= owner[j], "{arcs:?}: arc {i}->{j} goes backwards");
    }
}

#[test]
fn scc_exhaustive_up_to_four_vertices() {
    for n in 1..=4usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let arcs: Vec<_> = pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &a)| a).collect();
            check_scc(n, &arcs);
        }
    }
}

#[test]
fn scc_random_up_to_six_vertices() {
    let mut rng = substream(22, 0);
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let p = rng.gen_range(0.05..0.7);
        let arcs: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|_| rng.gen_bool(p)).collect();
        check_scc(n, &arcs);
    }
}

fn nalgebra_moduli(a: &Matrix) -> Vec<f64> {
    let n = a.dim();
    let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
    let mut v: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.norm()).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

#[test]
fn eigen_moduli_match_nalgebra() {
    let mut rng = substream(23, 0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let a = Matrix::from_rows(rows).unwrap();
        let ours = eig_moduli(&a).unwrap();
        let theirs = nalgebra_moduli(&a);
        let scale = theirs[0].max(1.0);
        for (x, y) in ours.iter().zip(&theirs) {
            assert!((x - y).abs() <= 1e-8 * scale, "{:?}: {ours:?} vs {theirs:?}", a.rows());
        }
    }
}

/// `ρ(A) < β` iff `(A/β)^k → 0`; decided by repeated squaring.
fn radius_below(a: &DMatrix<f64>, beta: f64) -> bool {
    let mut p = a / beta;
    for _ in 0..60 {
        p = &p * &p;
        let m = p.amax();
        if m < 1e-200 {
            return true;
        }
        if m > 1e200 {
            return false;
        }
    }
    p.amax() < 1.0
}

fn bisection_radius(a: &Matrix) -> f64 {
    let n = a.dim();
    let m = DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
    let (mut lo, mut hi) = (0.0, (0..n).map(|i| a.row(i).iter().sum::<f64>()).fold(0.0, f64::max) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radius_below(&m, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn cw_number_matches_bisection_for_matrices() {
    let mut rng = substream(24, 0);
    for _ in 0..30 {
        let dim = rng.gen_range(2..=6);
        let m = random::primitive_matrix(dim, 0.4, &mut rng);
        let oracle = bisection_radius(m.matrix());
        let model: MapModel = m.clone().into();
        let cw = cw_number(&model, &(0..dim).collect::<Vec<_>>()).unwrap();
        assert!((cw.value - oracle).abs() <= 1e-8 * oracle, "{:?}: {} vs {oracle}", m.matrix().rows(), cw.value);
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn tensor_eigenpair_matches_bisection() {
    let t = bisect(|t| 2.0 * t * t * t + t - 1.0, 0.0, 1.0);
    assert!((t - 0.589_754_512_301_458_4).abs() < 1e-15);
    let map = example_tensor();
    let r = solve(&map, &PositiveVector::ones(2), &SolveOptions::default()).unwrap();
    assert!(r.converged);
    let u = r.eigenvector.as_slice();
    assert!((u[1] / u[0] - t).abs() < 1e-8);
    assert!((r.eigenvalue() - t.powf(-0.5)).abs() < 1e-8);
}

#[test]
fn matrix_eigenvector_matches_nalgebra() {
    let mut rng = substream(25, 0);
    for _ in 0..20 {
        let dim = rng.gen_range(2..=6);
        let m = random::primitive_matrix(dim, 0.5, &mut rng);
        let a = m.matrix();
        let model: MapModel = m.clone().into();
        let r = solve(&model, &PositiveVector::ones(dim), &SolveOptions::default()).unwrap();
        assert!(r.converged);
        let dm = DMatrix::from_fn(dim, dim, |i, j| a[(i, j)]);
        let rho = nalgebra_moduli(a)[0];
        assert!((r.eigenvalue() - rho).abs() <= 1e-8 * rho);
        // A u = ρ u checked through nalgebra's product
        let u = nalgebra::DVector::from_column_slice(r.eigenvector.as_slice());
        let au = &dm * &u;
        let v = PositiveVector::new(au.iter().copied().collect()).unwrap();
        assert!(hilbert(&v, &r.eigenvector).unwrap() < 1e-9);
    }
}
