//! Combinatorial structure of a map: the classes (strongly connected
//! components) of its digraph, final and basic classes, Collatz–Wielandt
//! numbers of the restrictions `f_J = P_J f P_J`, the eigenvector existence
//! test, type K and the period of the recurrent part.

use serde::{Deserialize, Serialize};

use crate::cone::{ratio_max, ratio_min};
use crate::error::{Error, Result};
use crate::maps::{Digraph, MapModel};

/// Relative tolerance for deciding that a class is basic.
pub const BASIC_RTOL: f64 = 1e-8;

/// Relative bracket width at which a Collatz–Wielandt estimate counts as
/// converged.
pub const CW_GAP_RTOL: f64 = 1e-10;

/// Strongly connected components in topological order: every arc between
/// two different classes goes from an earlier class to a later one. Each
/// class is sorted.
pub fn scc(g: &Digraph) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut classes = Vec::new();
    let mut next = 0;
    // explicit DFS stack of (vertex, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            let succ = g.successors(v);
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut class = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    class.push(w);
                    if w == v {
                        break;
                    }
                }
                class.sort_unstable();
                classes.push(class);
            }
        }
    }
    // Tarjan emits sinks first
    classes.reverse();
    classes
}

/// Estimate of `r(f_J) = inf_x max_{j∈J} f_J(x)_j / x_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwEstimate {
    /// The upper end of the final bracket.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Whether `f_J` maps the open orthant of `ℝ^J` into itself. When it
    /// does not, `value` is an inf-max bound rather than a spectral radius.
    pub interior_preserving: bool,
}

/// Maximum iterations for [`cw_number`].
pub const CW_MAX_ITERS: usize = 100_000;

/// Collatz–Wielandt number of the restriction `P_J f P_J` to the sorted,
/// 0-indexed coordinate set `class`.
///
/// The estimate iterates the shifted map `f_J + s·id`, which has the same
/// eigenvectors as `f_J` but no periodic orbits, and brackets `r(f_J)`
/// between the smallest and largest coordinate ratios of `f_J`.
pub fn cw_number(map: &MapModel, class: &[usize]) -> Result<CwEstimate> {
    let n = map.dim();
    if class.is_empty() {
        return Err(Error::InvalidArgument("empty coordinate set".into()));
    }
    if class.windows(2).any(|w| w[0] >= w[1]) || class[class.len() - 1] >= n {
        return Err(Error::InvalidArgument("coordinate set must be sorted, distinct and in range".into()));
    }
    let restricted = |x: &[f64]| -> Result<Vec<f64>> {
        let mut full = vec![0.0; n];
        for (&j, &v) in class.iter().zip(x) {
            full[j] = v;
        }
        let y = map.eval_nonneg(&full)?;
        Ok(class.iter().map(|&j| y[j]).collect())
    };
    let mut x = vec![1.0; class.len()];
    let mut fx = restricted(&x)?;
    check_finite(&fx)?;
    let interior_preserving = fx.iter().all(|&v| v > 0.0);
    if class.len() == 1 {
        let r = fx[0];
        return Ok(CwEstimate { value: r, lower: r, upper: r, converged: true, iterations: 0, interior_preserving });
    }
    let shift = ratio_max(&fx, &x).max(f64::MIN_POSITIVE);
    let mut upper = ratio_max(&fx, &x);
    let mut lower = ratio_min(&fx, &x);
    let mut stall = 0;
    let mut iterations = 0;
    while iterations < CW_MAX_ITERS {
        if upper - lower <= CW_GAP_RTOL * upper {
            break;
        }
        let mut y: Vec<f64> = fx.iter().zip(&x).map(|(f, v)| f + shift * v).collect();
        let s = y.iter().copied().fold(0.0, f64::max);
        y.iter_mut().for_each(|v| *v /= s);
        if y.iter().any(|&v| v < 1e-250) {
            // the orbit is escaping to the boundary; the upper ratio has
            // already settled
            break;
        }
        x = y;
        fx = restricted(&x)?;
        check_finite(&fx)?;
        iterations += 1;
        let new_upper = ratio_max(&fx, &x).min(upper);
        let new_lower = ratio_min(&fx, &x).max(lower);
        if (upper - new_upper).abs() <= 1e-15 * upper && (new_lower - lower).abs() <= 1e-15 * upper.max(1e-300) {
            stall += 1;
            if stall >= 50 {
                upper = new_upper;
                lower = new_lower;
                break;
            }
        } else {
            stall = 0;
        }
        upper = new_upper;
        lower = new_lower;
    }
    Ok(CwEstimate {
        value: upper,
        lower,
        upper,
        converged: upper - lower <= CW_GAP_RTOL * upper,
        iterations,
        interior_preserving,
    })
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("map produced a non-finite value".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecomposition {
    /// 0-indexed classes in topological order.
    pub classes: Vec<Vec<usize>>,
    pub is_final: Vec<bool>,
    pub cw: Vec<CwEstimate>,
    pub is_basic: Vec<bool>,
    pub r_global: f64,
}

impl ClassDecomposition {
    pub fn cw_numbers(&self) -> Vec<f64> {
        self.cw.iter().map(|c| c.value).collect()
    }

    pub fn final_classes(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&k| self.is_final[k]).collect()
    }

    pub fn basic_classes(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&k| self.is_basic[k]).collect()
    }

    /// The class containing vertex `v`.
    pub fn class_of(&self, v: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&v))
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.classes.len() == 1
    }
}

/// Classes, final/basic flags and per-class Collatz–Wielandt numbers.
pub fn classify(map: &MapModel) -> Result<ClassDecomposition> {
    let g = map.digraph();
    classify_with(map, &g)
}

fn classify_with(map: &MapModel, g: &Digraph) -> Result<ClassDecomposition> {
    let classes = scc(g);
    let mut owner = vec![0; g.vertex_count()];
    for (k, c) in classes.iter().enumerate() {
        for &v in c {
            owner[v] = k;
        }
    }
    let is_final = (0..classes.len())
        .map(|k| classes[k].iter().all(|&v| g.successors(v).iter().all(|&w| owner[w] == k)))
        .collect();
    let cw = classes.iter().map(|c| cw_number(map, c)).collect::<Result<Vec<_>>>()?;
    let r_global = cw.iter().map(|c| c.value).fold(0.0, f64::max);
    let is_basic = cw.iter().map(|c| (c.value - r_global).abs() <= BASIC_RTOL * r_global).collect();
    Ok(ClassDecomposition { classes, is_final, cw, is_basic, r_global })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceCertificate {
    pub exists: bool,
    /// Indices into [`ClassDecomposition::classes`].
    pub basic: Vec<usize>,
    pub finals: Vec<usize>,
    /// Set when the map lies outside the class where the criterion is an
    /// equivalence.
    pub warning: Option<String>,
}

/// A positive eigenvector exists iff the basic classes are exactly the final
/// classes. For maps that are not multiplicatively convex only the
/// "if" direction is backed by theory and a warning is attached.
pub fn has_positive_eigenvector(map: &MapModel) -> Result<ExistenceCertificate> {
    Ok(existence_from(map, &classify(map)?))
}

pub fn existence_from(map: &MapModel, d: &ClassDecomposition) -> ExistenceCertificate {
    let basic = d.basic_classes();
    let finals = d.final_classes();
    let warning = (!map.is_multiplicatively_convex()).then(|| {
        "map is not multiplicatively convex; only \"basic = final ⇒ eigenvector\" is guaranteed".to_string()
    });
    ExistenceCertificate { exists: basic == finals, basic, finals, warning }
}

/// Every vertex of the digraph carries a self-loop.
pub fn is_type_k(map: &MapModel) -> bool {
    let g = map.digraph();
    (0..g.vertex_count()).all(|i| g.has_arc(i, i))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodReport {
    pub period: usize,
    /// Least common multiple of the cyclicities of the nontrivial classes.
    pub lcm_of_cyclicities: usize,
    /// Vertices lying on no cycle; excluded from the period.
    pub transient: Vec<usize>,
    pub warning: Option<String>,
}

/// Gcd of the cycle lengths of a strongly connected class (`0` when the class
/// is a single vertex without a self-loop).
pub fn cyclicity(g: &Digraph, class: &[usize]) -> usize {
    let n = g.vertex_count();
    let mut inside = vec![false; n];
    class.iter().for_each(|&v| inside[v] = true);
    let mut level = vec![usize::MAX; n];
    let root = class[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut d = 0;
    while let Some(v) = queue.pop_front() {
        for &w in g.successors(v).iter().filter(|&&w| inside[w]) {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            } else {
                d = gcd(d, (level[v] + 1).abs_diff(level[w]));
            }
        }
    }
    d
}

/// Smallest `p ≥ 1` such that the `p`-th boolean power of the digraph has a
/// self-loop at every vertex that lies on a cycle.
pub fn period(map: &MapModel) -> Result<PeriodReport> {
    period_of(&map.digraph())
}

/// Largest period search bound accepted by [`period_of`].
pub const MAX_PERIOD_SEARCH: usize = 1 << 20;

pub fn period_of(g: &Digraph) -> Result<PeriodReport> {
    let n = g.vertex_count();
    let mut lcm_all = 1;
    let mut transient = Vec::new();
    let mut recurrent: Vec<(Vec<usize>, usize)> = Vec::new();
    for class in scc(g) {
        let d = cyclicity(g, &class);
        if d == 0 {
            transient.extend(&class);
        } else {
            lcm_all = lcm(lcm_all, d);
            recurrent.push((class, d));
        }
    }
    transient.sort_unstable();
    let warning = (!transient.is_empty()).then(|| {
        let list: Vec<String> = transient.iter().map(|v: &usize| (v + 1).to_string()).collect();
        format!("vertices {} lie on no cycle; period covers the recurrent part only", list.join(", "))
    });
    if recurrent.is_empty() {
        return Ok(PeriodReport { period: 1, lcm_of_cyclicities: 1, transient, warning });
    }
    // every closed-walk length that is a multiple of the cyclicity and at
    // least n² occurs, so this bound always contains the answer
    let bound = lcm_all.saturating_mul(n * n + 1);
    if bound > MAX_PERIOD_SEARCH {
        return Err(Error::Unsupported(format!("period search bound {bound} too large")));
    }
    let mut ok = vec![true; bound + 1];
    ok[0] = false;
    for (class, _) in &recurrent {
        let mut inside = vec![false; n];
        class.iter().for_each(|&v| inside[v] = true);
        for &v in class {
            let lengths = closed_walk_lengths(g, &inside, v, bound);
            for (p, flag) in ok.iter_mut().enumerate().skip(1) {
                *flag &= lengths[p];
            }
        }
    }
    let period = (1..=bound).find(|&p| ok[p]).ok_or_else(|| Error::Numerical("no period found within the search bound".into()))?;
    Ok(PeriodReport { period, lcm_of_cyclicities: lcm_all, transient, warning })
}

/// `out[ℓ]` is true iff a closed walk of length `ℓ` through `v` exists.
fn closed_walk_lengths(g: &Digraph, inside: &[bool], v: usize, bound: usize) -> Vec<bool> {
    let n = g.vertex_count();
    let mut out = vec![false; bound + 1];
    let mut frontier = vec![false; n];
    frontier[v] = true;
    let mut next = vec![false; n];
    for slot in out.iter_mut().skip(1) {
        next.iter_mut().for_each(|b| *b = false);
        for u in (0..n).filter(|&u| frontier[u]) {
            for &w in g.successors(u) {
                if inside[w] {
                    next[w] = true;
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        *slot = frontier[v];
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::TensorMap;

    fn arcs(n: usize, list: &[(usize, usize)]) -> Digraph {
        Digraph::from_arcs(n, list.iter().map(|&(i, j)| (i - 1, j - 1))).unwrap()
    }

    fn matrix(rows: &[&[f64]]) -> MapModel {
        MapModel::matrix(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn tensor() -> MapModel {
        TensorMap::parse_text("3 2\n1 1 1 1\n1 2 2 2\n2 1 2 1\n").unwrap().into()
    }

    #[test]
    fn scc_examples() {
        assert_eq!(scc(&arcs(3, &[(1, 2), (2, 1), (2, 3), (3, 3)])), vec![vec![0, 1], vec![2]]);
        assert_eq!(scc(&Digraph::empty(3)).len(), 3);
        assert_eq!(scc(&Digraph::complete(4)), vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn scc_is_topological() {
        let g = arcs(5, &[(5, 4), (4, 3), (3, 4), (3, 1), (1, 2), (2, 1)]);
        let classes = scc(&g);
        let pos = |v: usize| classes.iter().position(|c| c.contains(&v)).unwrap();
        for (i, j) in g.arcs() {
            assert!(pos(i) <= pos(j));
        }
    }

    #[test]
    fn cw_examples() {
        let a = matrix(&[&[1.0, 1.0], &[0.0, 2.0]]);
        assert_eq!(cw_number(&a, &[1]).unwrap().value, 2.0);
        let b = matrix(&[&[2.0, 1.0], &[0.0, 1.0]]);
        let est = cw_number(&b, &[0, 1]).unwrap();
        assert!((est.value - 2.0).abs() < 1e-10, "{est:?}");

        let t = 0.589_754_512_301_458_4_f64;
        let est = cw_number(&tensor(), &[0, 1]).unwrap();
        assert!(est.converged);
        assert!((est.value - t.powf(-0.5)).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn cw_of_periodic_class_converges() {
        let p = matrix(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        let est = cw_number(&p, &[0, 1, 2]).unwrap();
        assert!(est.converged && (est.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn classify_examples() {
        let d = classify(&matrix(&[&[1.0, 1.0], &[0.0, 2.0]])).unwrap();
        assert_eq!(d.classes, vec![vec![0], vec![1]]);
        assert_eq!(d.is_final, vec![false, true]);
        assert_eq!(d.cw_numbers(), vec![1.0, 2.0]);
        assert_eq!(d.is_basic, vec![false, true]);
        assert_eq!(d.r_global, 2.0);

        let d = classify(&matrix(&[&[2.0, 1.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(d.final_classes(), vec![1]);
        assert_eq!(d.basic_classes(), vec![0]);

        let d = classify(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!(d.is_strongly_connected() && d.is_final[0] && d.is_basic[0]);
        assert!((d.r_global - 1.0).abs() < 1e-12);
    }

    #[test]
    fn existence_examples() {
        assert!(has_positive_eigenvector(&matrix(&[&[1.0, 1.0], &[0.0, 2.0]])).unwrap().exists);
        assert!(!has_positive_eigenvector(&matrix(&[&[2.0, 1.0], &[0.0, 1.0]])).unwrap().exists);
        let c = has_positive_eigenvector(&tensor()).unwrap();
        assert!(c.exists && c.warning.is_none());
    }

    #[test]
    fn type_k_examples() {
        assert!(!is_type_k(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]])));
        assert!(is_type_k(&matrix(&[&[2.0, 1.0], &[1.0, 2.0]])));
        assert!(is_type_k(&tensor()));
    }

    #[test]
    fn period_examples() {
        assert_eq!(period(&matrix(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap().period, 2);
        assert_eq!(period(&matrix(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap().period, 1);
        // 3-cycle with a loop at vertex 1: cyclicity 1, but vertices 2 and 3
        // have no closed walks of length 1 or 2
        let r = period_of(&arcs(3, &[(1, 2), (2, 3), (3, 1), (1, 1)])).unwrap();
        assert_eq!(r.lcm_of_cyclicities, 1);
        assert_eq!(r.period, 3);
    }

    #[test]
    fn period_ignores_transient_vertices() {
        let r = period_of(&arcs(3, &[(1, 2), (2, 3), (3, 2)])).unwrap();
        assert_eq!(r.period, 2);
        assert_eq!(r.transient, vec![0]);
        assert!(r.warning.is_some());
    }

    #[test]
    fn cyclicity_examples() {
        let g = arcs(4, &[(1, 2), (2, 3), (3, 4), (4, 1), (2, 1)]);
        assert_eq!(cyclicity(&g, &[0, 1, 2, 3]), 2);
        assert_eq!(cyclicity(&Digraph::empty(1), &[0]), 0);
    }
}
