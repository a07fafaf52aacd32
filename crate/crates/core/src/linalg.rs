//! Small dense square matrices and a nonsymmetric eigenvalue solver.
//!
//! The solver balances the matrix, reduces it to upper Hessenberg form with
//! Householder reflections and then runs Francis double-shift QR sweeps with
//! deflation. It returns eigenvalues as `(re, im)` pairs; only their moduli
//! are used elsewhere in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense `n × n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidModel("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!(
                    "matrix must be square: row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("row {} has non-finite entry {v}", i + 1)));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// The principal submatrix on `idx`.
    pub fn principal(&self, idx: &[usize]) -> Matrix {
        let k = idx.len();
        let mut out = Matrix::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Largest dimension accepted by [`eigenvalues`].
pub const MAX_EIG_DIM: usize = 256;

/// All eigenvalues of `a` as `(re, im)` pairs, in no particular order.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>> {
    let n = a.dim();
    if n > MAX_EIG_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue solver accepts n ≤ {MAX_EIG_DIM}, got {n}"
        )));
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(&mut h)
}

/// Eigenvalue moduli in nonincreasing order.
pub fn eig_moduli(a: &Matrix) -> Result<Vec<f64>> {
    let mut m: Vec<f64> = eigenvalues(a)?.into_iter().map(|(re, im)| re.hypot(im)).collect();
    m.sort_by(|x, y| y.total_cmp(x));
    Ok(m)
}

/// Diagonal similarity scaling that evens out row and column norms.
fn balance(a: &mut Matrix) {
    const RADIX: f64 = 2.0;
    let n = a.dim();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// In-place Householder reduction to upper Hessenberg form.
fn hessenberg(a: &mut Matrix) {
    let n = a.dim();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let len = n - k - 1;
        let norm = (k + 1..n).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        for (t, i) in (k + 1..n).enumerate() {
            v[t] = a[(i, k)];
        }
        v[0] -= alpha;
        let vnorm = v[..len].iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for x in &mut v[..len] {
            *x /= vnorm;
        }
        // A <- H A
        for j in 0..n {
            let s: f64 = (0..len).map(|t| v[t] * a[(k + 1 + t, j)]).sum();
            for t in 0..len {
                a[(k + 1 + t, j)] -= 2.0 * v[t] * s;
            }
        }
        // A <- A H
        for i in 0..n {
            let s: f64 = (0..len).map(|t| a[(i, k + 1 + t)] * v[t]).sum();
            for t in 0..len {
                a[(i, k + 1 + t)] -= 2.0 * s * v[t];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Destroys `a`.
fn hqr(a: &mut Matrix) -> Result<Vec<(f64, f64)>> {
    let n = a.dim();
    let eps = f64::EPSILON;
    let max_sweeps = 100 * n.max(1);
    let mut sweeps = 0usize;
    let mut out: Vec<Option<(f64, f64)>> = vec![None; n];

    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut t = 0.0;
    let mut nn = n as isize - 1;
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // look for a negligible subdiagonal element
            let mut l = nu;
            while l > 0 {
                let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[(l, l - 1)].abs() <= eps * s {
                    a[(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[(nu, nu)];
            if l == nu {
                out[nu] = Some((x + t, 0.0));
                nn -= 1;
                break;
            }
            let mut y = a[(nu - 1, nu - 1)];
            let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
            if l == nu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    out[nu - 1] = Some((x + z, 0.0));
                    out[nu] = Some((if z != 0.0 { x - w / z } else { x + z }, 0.0));
                } else {
                    out[nu] = Some((x + p, -z));
                    out[nu - 1] = Some((x + p, z));
                }
                nn -= 2;
                break;
            }

            if sweeps >= max_sweeps {
                let found = out.iter().flatten().map(|(re, im)| re.hypot(*im)).collect();
                return Err(Error::EigenNoConvergence { found });
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 0..=nu {
                    a[(i, i)] -= x;
                }
                let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            sweeps += 1;

            // look for two consecutive small subdiagonal elements
            let mut m = nu - 2;
            let (mut p, mut q, mut r);
            loop {
                let z = a[(m, m)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
                q = a[(m + 1, m + 1)] - z - rr - ss;
                r = a[(m + 2, m + 1)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in m..nu - 1 {
                a[(i + 2, i)] = 0.0;
                if i != m {
                    a[(i + 2, i - 1)] = 0.0;
                }
            }
            // double QR step on rows l..=nn and columns m..=nn
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[(k, k - 1)];
                    q = a[(k + 1, k - 1)];
                    r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[(k, k - 1)] = -a[(k, k - 1)];
                        }
                    } else {
                        a[(k, k - 1)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                        if k + 1 != nu {
                            pp += r * a[(k + 2, j)];
                            a[(k + 2, j)] -= pp * z;
                        }
                        a[(k + 1, j)] -= pp * y;
                        a[(k, j)] -= pp * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                        if k + 1 != nu {
                            pp += z * a[(i, k + 2)];
                            a[(i, k + 2)] -= pp * r;
                        }
                        a[(i, k + 1)] -= pp * q;
                        a[(i, k)] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(out.into_iter().map(|e| e.expect("every eigenvalue slot is filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn symmetric_two_by_two() {
        let got = eig_moduli(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!(close(&got, &[3.0, 1.0], 1e-12), "{got:?}");
    }

    #[test]
    fn permutation_has_unit_moduli() {
        let got = eig_moduli(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!(close(&got, &[1.0, 1.0], 1e-12), "{got:?}");
        let cyc = eig_moduli(&m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]])).unwrap();
        assert!(close(&cyc, &[1.0, 1.0, 1.0], 1e-12), "{cyc:?}");
    }

    #[test]
    fn identity() {
        let got = eig_moduli(&Matrix::identity(3)).unwrap();
        assert!(close(&got, &[1.0, 1.0, 1.0], 1e-14));
    }

    #[test]
    fn rotation_block_gives_complex_pair() {
        let ev = eigenvalues(&m(&[&[0.0, -2.0], &[2.0, 0.0]])).unwrap();
        assert!(ev.iter().all(|(re, im)| re.abs() < 1e-14 && (im.abs() - 2.0).abs() < 1e-14));
    }

    #[test]
    fn cubic_against_characteristic_polynomial() {
        // upper triangular plus a coupling: eigenvalues of
        // [[4,1,0],[0,2,1],[0,0,-3]] are 4, 2, -3
        let got = eig_moduli(&m(&[&[4.0, 1.0, 0.0], &[0.0, 2.0, 1.0], &[0.0, 0.0, -3.0]])).unwrap();
        assert!(close(&got, &[4.0, 3.0, 2.0], 1e-12), "{got:?}");
    }

    #[test]
    fn rejects_oversized_input() {
        assert!(matches!(eigenvalues(&Matrix::zeros(257)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn principal_submatrix() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        assert_eq!(a.principal(&[0, 2]).rows(), vec![vec![1.0, 3.0], vec![7.0, 9.0]]);
    }
}
