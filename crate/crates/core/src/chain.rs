//! Transition matrices, target distributions and the undirected support graph.

use std::collections::VecDeque;
use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{ChainError, Result};
use crate::tol::{TOL_SOLVE, TOL_STOCH};

/// A square, nonnegative, row-stochastic matrix.
///
/// Construction checks nonnegativity and row sums. Irreducibility is not a
/// construction invariant; analysis routines check it where they need it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix(DMatrix<f64>);

impl TransitionMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(ChainError::NonFinite { row: i, col: j });
                }
                if v < -TOL_STOCH {
                    return Err(ChainError::NegativeEntry { row: i, col: j, value: v });
                }
                if v < 0.0 {
                    m[(i, j)] = 0.0;
                }
            }
        }
        for (i, row) in m.row_iter().enumerate() {
            let sum = row.sum();
            if (sum - 1.0).abs() > TOL_STOCH {
                return Err(ChainError::NotStochastic { row: i, sum });
            }
        }
        if m.nrows() == 0 {
            return Err(ChainError::InvalidArgument("empty state space".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Strong connectivity of the directed support `p_ij > 0`.
    pub fn is_irreducible(&self) -> bool {
        support_strongly_connected(&self.0)
    }

    pub fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.n() {
            Err(ChainError::InvalidState { index: state, n: self.n() })
        } else {
            Ok(())
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        (&self.0 - &other.0).amax()
    }
}

impl Index<(usize, usize)> for TransitionMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// A strictly positive probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(DVector<f64>);

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(ChainError::InvalidDistribution("empty".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(ChainError::InvalidDistribution(format!(
                "weight {i} = {w} is not strictly positive"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > TOL_STOCH {
            return Err(ChainError::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Ok(Self(DVector::from_vec(weights)))
    }

    /// Normalizes positive weights to sum to one.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(ChainError::InvalidDistribution("weights do not have a positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    /// `π(f) = Σ f(i) π_i`.
    pub fn expectation(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok(f.iter().zip(self.0.iter()).map(|(a, b)| a * b).sum())
    }
}

impl Index<usize> for Distribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Undirected simple graph on `0..n`; adjacency lists are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainGraph {
    adjacency: Vec<Vec<usize>>,
}

impl ChainGraph {
    pub fn empty(n: usize) -> Self {
        Self { adjacency: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(ChainError::InvalidState { index: a.max(b), n });
            }
            if a == b {
                return Err(ChainError::InvalidArgument(format!("self-loop at {a}")));
            }
            g.add_edge(a, b);
        }
        Ok(g)
    }

    fn add_edge(&mut self, a: usize, b: usize) {
        if let Err(pos) = self.adjacency[a].binary_search(&b) {
            self.adjacency[a].insert(pos, b);
        }
        if let Err(pos) = self.adjacency[b].binary_search(&a) {
            self.adjacency[b].insert(pos, a);
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nbrs)| nbrs.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }
}

/// Stochasticity, irreducibility and reversibility diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub is_stochastic: bool,
    pub is_irreducible: bool,
    pub is_reversible: bool,
    pub max_row_sum_error: f64,
    /// `max |π_i p_ij − π_j p_ji|`; absent when no distribution was supplied.
    pub max_detailed_balance_error: Option<f64>,
}

/// Checks a raw square matrix against an optional target distribution.
///
/// Irreducibility is decided on the exact support (`> 0`), never numerically.
pub fn validate_chain(
    matrix: &DMatrix<f64>,
    pi: Option<&Distribution>,
    tol: f64,
) -> Result<ValidationReport> {
    check_square(matrix)?;
    let n = matrix.nrows();
    if let Some(pi) = pi {
        check_len(n, pi.len())?;
    }
    for i in 0..n {
        for j in 0..n {
            let v = matrix[(i, j)];
            if !v.is_finite() {
                return Err(ChainError::NonFinite { row: i, col: j });
            }
            if v < -tol {
                return Err(ChainError::NegativeEntry { row: i, col: j, value: v });
            }
        }
    }
    let max_row_sum_error = matrix
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let is_stochastic = max_row_sum_error <= tol;
    let is_irreducible = support_strongly_connected(matrix);
    let max_detailed_balance_error = pi.map(|pi| detailed_balance_error(matrix, pi));
    let is_reversible = max_detailed_balance_error.is_some_and(|e| e <= tol);
    Ok(ValidationReport {
        is_stochastic,
        is_irreducible,
        is_reversible,
        max_row_sum_error,
        max_detailed_balance_error,
    })
}

fn detailed_balance_error(matrix: &DMatrix<f64>, pi: &Distribution) -> f64 {
    let n = matrix.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi[i] * matrix[(i, j)] - pi[j] * matrix[(j, i)]).abs());
        }
    }
    worst
}

/// Whether `P` satisfies detailed balance with respect to `π` within `tol`.
pub fn is_reversible(p: &TransitionMatrix, pi: &Distribution, tol: f64) -> bool {
    pi.len() == p.n() && detailed_balance_error(p.matrix(), pi) <= tol
}

/// `‖πP − π‖_∞`.
pub fn invariance_residual(p: &TransitionMatrix, pi: &Distribution) -> Result<f64> {
    check_len(p.n(), pi.len())?;
    let row = pi.vector().transpose() * p.matrix();
    Ok((row - pi.vector().transpose()).amax())
}

/// Errors unless `πP = π` within `tol`.
pub fn check_invariant(p: &TransitionMatrix, pi: &Distribution, tol: f64) -> Result<()> {
    let residual = invariance_residual(p, pi)?;
    if residual > tol {
        Err(ChainError::NotInvariant { residual })
    } else {
        Ok(())
    }
}

/// Stationary distribution with the default residual tolerance.
pub fn stationary_distribution(p: &TransitionMatrix) -> Result<Distribution> {
    stationary_distribution_with_tol(p, TOL_SOLVE)
}

/// Solves `(Pᵀ − I)π = 0` with the last equation replaced by `Σπ_i = 1`.
pub fn stationary_distribution_with_tol(p: &TransitionMatrix, tol: f64) -> Result<Distribution> {
    if !p.is_irreducible() {
        return Err(ChainError::Reducible);
    }
    let n = p.n();
    let mut a = p.matrix().transpose() - DMatrix::<f64>::identity(n, n);
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or(ChainError::Singular("stationary balance equations"))?;
    let pi = Distribution::from_weights(x.as_slice())?;
    let residual = invariance_residual(p, &pi)?;
    if residual > tol {
        return Err(ChainError::NotInvariant { residual });
    }
    Ok(pi)
}

/// Undirected graph with edge `{i, j}` iff `p_ij > 0` or `p_ji > 0`, `i ≠ j`.
pub fn support_graph(p: &TransitionMatrix) -> ChainGraph {
    let n = p.n();
    let mut g = ChainGraph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if p[(i, j)] > 0.0 || p[(j, i)] > 0.0 {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// True iff the graph contains no cycle (forest), via union-find.
pub fn is_acyclic(g: &ChainGraph) -> bool {
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (a, b) in g.edges() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// Degree-one vertices in ascending order.
pub fn find_leaves(g: &ChainGraph) -> Vec<usize> {
    (0..g.n()).filter(|&v| g.degree(v) == 1).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(ChainError::NotSquare { rows: n, cols: bad.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(ChainError::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        Err(ChainError::NotSquare { rows: m.nrows(), cols: m.ncols() })
    } else {
        Ok(())
    }
}

fn support_strongly_connected(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n == 0 {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                let entry = if forward { m[(v, w)] } else { m[(w, v)] };
                if entry > 0.0 && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path3() -> TransitionMatrix {
        TransitionMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    fn cycle3() -> TransitionMatrix {
        TransitionMatrix::from_rows(&[
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn validate_symmetric_two_state() {
        let m = DMatrix::from_element(2, 2, 0.5);
        let pi = Distribution::uniform(2).unwrap();
        let r = validate_chain(&m, Some(&pi), TOL_STOCH).unwrap();
        assert!(r.is_stochastic && r.is_irreducible && r.is_reversible);
        assert_eq!(r.max_row_sum_error, 0.0);
        assert_eq!(r.max_detailed_balance_error, Some(0.0));
    }

    #[test]
    fn validate_identity_is_reducible() {
        let m = DMatrix::<f64>::identity(2, 2);
        let r = validate_chain(&m, None, TOL_STOCH).unwrap();
        assert!(r.is_stochastic);
        assert!(!r.is_irreducible);
        assert!(!r.is_reversible);
    }

    #[test]
    fn validate_two_state_reversible() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.5]);
        let pi = Distribution::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let r = validate_chain(&m, Some(&pi), TOL_STOCH).unwrap();
        assert!(r.is_reversible);
    }

    #[test]
    fn validate_errors() {
        let m = DMatrix::from_row_slice(2, 2, &[1.1, -0.1, 0.5, 0.5]);
        assert!(matches!(
            validate_chain(&m, None, TOL_STOCH),
            Err(ChainError::NegativeEntry { row: 0, col: 1, .. })
        ));
        let m = DMatrix::from_element(2, 2, 0.5);
        let pi = Distribution::uniform(3).unwrap();
        assert!(matches!(
            validate_chain(&m, Some(&pi), TOL_STOCH),
            Err(ChainError::DimensionMismatch { .. })
        ));
        let m = DMatrix::from_row_slice(2, 2, &[0.6, 0.6, 0.5, 0.5]);
        let r = validate_chain(&m, None, TOL_STOCH).unwrap();
        assert!(!r.is_stochastic);
        assert_abs_diff_eq!(r.max_row_sum_error, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn transition_matrix_rejects_bad_rows() {
        assert!(matches!(
            TransitionMatrix::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]),
            Err(ChainError::NotStochastic { row: 0, .. })
        ));
        assert!(matches!(
            TransitionMatrix::from_rows(&[vec![1.0, 0.0]]),
            Err(ChainError::NotSquare { .. })
        ));
    }

    #[test]
    fn stationary_examples() {
        let p = TransitionMatrix::new(DMatrix::from_element(2, 2, 0.5)).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-14);

        let p = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        assert_abs_diff_eq!(pi[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 2.0 / 3.0, epsilon = 1e-14);

        let pi = stationary_distribution(&path3()).unwrap();
        for (got, want) in pi.as_slice().iter().zip([0.25, 0.5, 0.25]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn stationary_rejects_reducible() {
        let p = TransitionMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(stationary_distribution(&p), Err(ChainError::Reducible));
    }

    #[test]
    fn support_graphs() {
        assert_eq!(support_graph(&path3()).edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(support_graph(&cycle3()).edges(), vec![(0, 1), (0, 2), (1, 2)]);
        let two = TransitionMatrix::new(DMatrix::from_element(2, 2, 0.5)).unwrap();
        assert_eq!(support_graph(&two).edges(), vec![(0, 1)]);
    }

    #[test]
    fn acyclicity_and_leaves() {
        let path = support_graph(&path3());
        let cyc = support_graph(&cycle3());
        let star = ChainGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(is_acyclic(&path));
        assert!(!is_acyclic(&cyc));
        assert!(is_acyclic(&star));
        assert_eq!(find_leaves(&path), vec![0, 2]);
        assert_eq!(find_leaves(&star), vec![1, 2, 3]);
        assert!(find_leaves(&cyc).is_empty());
    }

    #[test]
    fn graph_rejects_self_loops() {
        assert!(ChainGraph::from_edges(2, &[(1, 1)]).is_err());
        assert!(ChainGraph::from_edges(2, &[(0, 2)]).is_err());
    }
}
