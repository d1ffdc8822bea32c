//! Divergence-free cycle perturbations that keep `π` invariant.
//!
//! A circulation `γ` (antisymmetric, zero row and column sums) added to the
//! edge-flow matrix `π_i p_ij` yields `p'_ij = p_ij + ε γ_ij / π_i`. Row sums
//! and `πP' = π` are preserved algebraically; only nonnegativity bounds `ε`.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::chain::{check_len, ChainGraph, Distribution, TransitionMatrix};
use crate::error::{ChainError, Result};

/// Entries pushed toward zero that land within this distance are snapped to 0.
const SNAP: f64 = 1e-14;

/// A unit circulation around one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleFlow {
    cycle: Vec<usize>,
    gamma: DMatrix<f64>,
}

impl CycleFlow {
    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn n(&self) -> usize {
        self.gamma.nrows()
    }

    /// The same circulation carrying `factor` units of flow.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { cycle: self.cycle.clone(), gamma: &self.gamma * factor }
    }

    /// Circulation in the opposite direction.
    pub fn reversed(&self) -> Self {
        let mut cycle = self.cycle.clone();
        cycle.reverse();
        Self { cycle, gamma: -&self.gamma }
    }
}

/// Builds `γ` with `+1` along `v_t → v_{t+1}` (wrapping) and `−1` against it.
pub fn cycle_flow(n: usize, cycle: &[usize]) -> Result<CycleFlow> {
    if cycle.len() < 3 {
        return Err(ChainError::InvalidArgument(format!(
            "a cycle needs at least 3 vertices, got {}",
            cycle.len()
        )));
    }
    let mut seen = vec![false; n];
    for &v in cycle {
        if v >= n {
            return Err(ChainError::InvalidState { index: v, n });
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(ChainError::RepeatedState);
        }
    }
    let mut gamma = DMatrix::zeros(n, n);
    for (t, &from) in cycle.iter().enumerate() {
        let to = cycle[(t + 1) % cycle.len()];
        gamma[(from, to)] = 1.0;
        gamma[(to, from)] = -1.0;
    }
    Ok(CycleFlow { cycle: cycle.to_vec(), gamma })
}

/// One cycle of the graph, or `None` for a forest.
///
/// Depth-first search from the lowest-index vertex with neighbors in
/// ascending order; the first back edge closes the cycle, which is then
/// rotated to start at its smallest vertex.
pub fn find_cycle(g: &ChainGraph) -> Option<Vec<usize>> {
    let order: Vec<Vec<usize>> = (0..g.n()).map(|v| g.neighbors(v).to_vec()).collect();
    let roots: Vec<usize> = (0..g.n()).collect();
    dfs_cycle(&order, &roots).map(|mut c| {
        let pos = c.iter().enumerate().min_by_key(|(_, v)| **v).map(|(i, _)| i).unwrap_or(0);
        c.rotate_left(pos);
        c
    })
}

/// A cycle found by depth-first search with shuffled roots and neighbor
/// orders, in a random direction.
pub(crate) fn random_cycle<R: Rng + ?Sized>(g: &ChainGraph, rng: &mut R) -> Option<Vec<usize>> {
    let order: Vec<Vec<usize>> = (0..g.n())
        .map(|v| {
            let mut nbrs = g.neighbors(v).to_vec();
            nbrs.shuffle(rng);
            nbrs
        })
        .collect();
    let mut roots: Vec<usize> = (0..g.n()).collect();
    roots.shuffle(rng);
    dfs_cycle(&order, &roots).map(|mut c| {
        if rng.gen_bool(0.5) {
            c.reverse();
        }
        c
    })
}

fn dfs_cycle(order: &[Vec<usize>], roots: &[usize]) -> Option<Vec<usize>> {
    let n = order.len();
    let mut visited = vec![false; n];
    let mut on_path = vec![usize::MAX; n];
    for &root in roots {
        if visited[root] {
            continue;
        }
        // frames: (vertex, parent, next neighbor index)
        let mut path: Vec<usize> = vec![root];
        let mut frames: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        visited[root] = true;
        on_path[root] = 0;
        while let Some(frame) = frames.last_mut() {
            let (v, parent, idx) = *frame;
            if idx == order[v].len() {
                frames.pop();
                path.pop();
                on_path[v] = usize::MAX;
                continue;
            }
            frame.2 += 1;
            let w = order[v][idx];
            if w == parent {
                continue;
            }
            if on_path[w] != usize::MAX {
                return Some(path[on_path[w]..].to_vec());
            }
            if !visited[w] {
                visited[w] = true;
                on_path[w] = path.len();
                path.push(w);
                frames.push((w, v, 0));
            }
        }
    }
    None
}

/// Largest `ε ≥ 0` keeping every `p_ij + ε γ_ij / π_i` nonnegative.
pub fn max_epsilon(p: &TransitionMatrix, pi: &Distribution, flow: &CycleFlow) -> Result<f64> {
    check_len(p.n(), pi.len())?;
    check_len(p.n(), flow.n())?;
    let n = p.n();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let g = flow.gamma[(i, j)];
            if g < 0.0 {
                best = best.min(p[(i, j)] * pi[i] / -g);
            }
        }
    }
    Ok(best)
}

/// `p'_ij = p_ij + ε γ_ij / π_i` for `0 ≤ ε ≤ max_epsilon`.
pub fn perturb(
    p: &TransitionMatrix,
    pi: &Distribution,
    flow: &CycleFlow,
    epsilon: f64,
) -> Result<TransitionMatrix> {
    let max = max_epsilon(p, pi, flow)?;
    if !(epsilon >= 0.0 && epsilon <= max * (1.0 + 1e-12)) {
        return Err(ChainError::EpsilonOutOfRange { epsilon, max });
    }
    let n = p.n();
    let mut out = p.matrix().clone();
    for i in 0..n {
        for j in 0..n {
            let g = flow.gamma[(i, j)];
            if g == 0.0 {
                continue;
            }
            let v = p[(i, j)] + epsilon * g / pi[i];
            out[(i, j)] = if g < 0.0 && v < SNAP { 0.0 } else { v };
        }
    }
    TransitionMatrix::new(out)
}
