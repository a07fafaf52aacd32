use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A directed graph on vertices `0..n` with sorted, duplicate-free
/// adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digraph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![Vec::new(); n] }
    }

    pub fn complete(n: usize) -> Self {
        Self { n, adj: vec![(0..n).collect(); n] }
    }

    pub fn from_arcs(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (i, j) in arcs {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("arc ({i}, {j}) out of range for n = {n}")));
            }
            g.add_arc(i, j);
        }
        Ok(g)
    }

    /// Arc `i → j` whenever `a[i][j] > 0`.
    pub fn from_pattern(a: &Matrix) -> Self {
        let n = a.dim();
        let adj = (0..n).map(|i| (0..n).filter(|&j| a[(i, j)] > 0.0).collect()).collect();
        Self { n, adj }
    }

    pub fn add_arc(&mut self, i: usize, j: usize) {
        if let Err(pos) = self.adj[i].binary_search(&j) {
            self.adj[i].insert(pos, j);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
    }

    pub fn arc_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }
}

impl fmt::Display for Digraph {
    /// Arcs are printed 1-indexed, e.g. `{1→2, 2→1}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (i, j)) in self.arcs().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}→{}", i + 1, j + 1)?;
        }
        write!(f, "}}")
    }
}
