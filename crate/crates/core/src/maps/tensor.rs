//! Sparse nonnegative tensors and their degree-one eigenvalue maps
//! `f(x)_i = (Σ A[i, i₂, …, i_m] x_{i₂} ⋯ x_{i_m})^{1/(m-1)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::Digraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    /// 0-indexed, length = order.
    pub index: Vec<usize>,
    pub value: f64,
}

/// An order-`m` tensor on `n` coordinates stored as a sorted coordinate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMap {
    order: usize,
    dim: usize,
    entries: Vec<TensorEntry>,
    /// `entries[row_start[i]..row_start[i + 1]]` have first index `i`.
    row_start: Vec<usize>,
}

impl TensorMap {
    /// Builds the map from 0-indexed entries. Duplicate indices are summed.
    pub fn new(order: usize, dim: usize, entries: Vec<TensorEntry>) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidModel(format!("tensor order must be at least 2, got {order}")));
        }
        if dim == 0 {
            return Err(Error::InvalidModel("tensor dimension must be positive".into()));
        }
        let mut entries = entries;
        for e in &entries {
            if e.index.len() != order {
                return Err(Error::InvalidModel(format!(
                    "entry {:?} has {} indices, expected {order}",
                    e.index,
                    e.index.len()
                )));
            }
            if let Some(&i) = e.index.iter().find(|&&i| i >= dim) {
                return Err(Error::InvalidModel(format!("index {} out of range 1..={dim}", i + 1)));
            }
            if !(e.value.is_finite() && e.value > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "coefficient {} at {:?} must be positive and finite",
                    e.value,
                    one_based(&e.index)
                )));
            }
        }
        entries.sort_by(|a, b| a.index.cmp(&b.index));
        let mut merged: Vec<TensorEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.index == e.index => last.value += e.value,
                _ => merged.push(e),
            }
        }
        let mut row_start = vec![0; dim + 1];
        for e in &merged {
            row_start[e.index[0] + 1] += 1;
        }
        for i in 0..dim {
            row_start[i + 1] += row_start[i];
        }
        if let Some(i) = (0..dim).find(|&i| row_start[i] == row_start[i + 1]) {
            return Err(Error::InvalidModel(format!(
                "coordinate {} has no entries; the map would vanish there",
                i + 1
            )));
        }
        Ok(Self { order, dim, entries: merged, row_start })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    fn row(&self, i: usize) -> &[TensorEntry] {
        &self.entries[self.row_start[i]..self.row_start[i + 1]]
    }

    fn row_sum(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i)
            .iter()
            .map(|e| e.value * e.index[1..].iter().map(|&j| x[j]).product::<f64>())
            .sum()
    }

    pub(crate) fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        let p = 1.0 / (self.order - 1) as f64;
        (0..self.dim).map(|i| self.row_sum(i, x).powf(p)).collect()
    }

    pub(crate) fn jacobian_raw(&self, x: &[f64]) -> Matrix {
        let n = self.dim;
        let p = 1.0 / (self.order - 1) as f64;
        let mut jac = Matrix::zeros(n);
        for i in 0..n {
            let s = self.row_sum(i, x);
            let outer = p * s.powf(p - 1.0);
            for e in self.row(i) {
                let tail = &e.index[1..];
                for (pos, &j) in tail.iter().enumerate() {
                    let others: f64 = tail
                        .iter()
                        .enumerate()
                        .filter(|&(q, _)| q != pos)
                        .map(|(_, &k)| x[k])
                        .product();
                    jac[(i, j)] += outer * e.value * others;
                }
            }
        }
        jac
    }

    /// Arc `i → j` iff some entry with first index `i` has `j` among its
    /// trailing indices.
    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::empty(self.dim);
        for e in &self.entries {
            for &j in &e.index[1..] {
                g.add_arc(e.index[0], j);
            }
        }
        g
    }

    /// The tensor with every index restricted to `keep` and renumbered.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &j) in keep.iter().enumerate() {
            pos[j] = k;
        }
        let entries: Vec<TensorEntry> = self
            .entries
            .iter()
            .filter(|e| e.index.iter().all(|&i| pos[i] != usize::MAX))
            .map(|e| TensorEntry { index: e.index.iter().map(|&i| pos[i]).collect(), value: e.value })
            .collect();
        Self::new(self.order, keep.len(), entries).map_err(|_| Error::NotInteriorPreserving)
    }

    /// Parses the whitespace-separated text format: a header line `m n`
    /// followed by one `i₁ … i_m value` line per entry (1-indexed).
    /// `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_err = |message: String| Error::Parse { line: lineno + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match header {
                None => {
                    if fields.len() != 2 {
                        return Err(line_err(format!("expected header \"m n\", found {line:?}")));
                    }
                    let m = fields[0].parse().map_err(|_| line_err(format!("bad order {:?}", fields[0])))?;
                    let n = fields[1].parse().map_err(|_| line_err(format!("bad dimension {:?}", fields[1])))?;
                    header = Some((m, n));
                }
                Some((m, n)) => {
                    if fields.len() != m + 1 {
                        return Err(line_err(format!("expected {m} indices and a value, found {} fields", fields.len())));
                    }
                    let mut index = Vec::with_capacity(m);
                    for f in &fields[..m] {
                        let i: usize = f.parse().map_err(|_| line_err(format!("bad index {f:?}")))?;
                        if i == 0 || i > n {
                            return Err(line_err(format!("index {i} out of range 1..={n}")));
                        }
                        index.push(i - 1);
                    }
                    let value: f64 =
                        fields[m].parse().map_err(|_| line_err(format!("bad value {:?}", fields[m])))?;
                    if !(value.is_finite() && value > 0.0) {
                        return Err(line_err(format!("coefficient {value} must be positive and finite")));
                    }
                    entries.push(TensorEntry { index, value });
                }
            }
        }
        let (m, n) = header.ok_or(Error::Parse { line: 1, message: "missing header \"m n\"".into() })?;
        Self::new(m, n, entries)
    }

    /// Inverse of [`TensorMap::parse_text`], one entry per line in sorted order.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.order, self.dim);
        for e in &self.entries {
            for i in &e.index {
                s.push_str(&format!("{} ", i + 1));
            }
            s.push_str(&format!("{:?}\n", e.value));
        }
        s
    }
}

fn one_based(idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|i| i + 1).collect()
}
