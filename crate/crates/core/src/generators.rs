//! Constructors for the chain families used in tests, demos and the CLI.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{check_len, ChainGraph, Distribution, TransitionMatrix};
use crate::error::{ChainError, Result};

/// Conductances and random target weights are drawn from this range.
pub const WEIGHT_RANGE: (f64, f64) = (0.5, 2.0);

/// Seeded generator used by every random family.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Path,
    Star,
    Cycle,
    RandomTree,
    /// Metropolis walk on a random connected graph with a random target.
    Metropolis,
}

impl std::str::FromStr for Family {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(Self::Path),
            "star" => Ok(Self::Star),
            "cycle" => Ok(Self::Cycle),
            "random-tree" | "random_tree" => Ok(Self::RandomTree),
            "metropolis" => Ok(Self::Metropolis),
            other => Err(ChainError::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

/// Everything needed to rebuild one generated chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpecSeed {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
}

impl ChainSpecSeed {
    pub fn build(&self) -> Result<(TransitionMatrix, Distribution)> {
        match self.family {
            Family::Path => path_chain(self.n),
            Family::Star => star_chain(self.n),
            Family::Cycle => cycle_chain(self.n),
            Family::RandomTree => random_tree_chain(self.n, self.seed),
            Family::Metropolis => random_metropolis_chain(self.n, self.seed),
        }
    }
}

fn require_states(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(ChainError::InvalidArgument(format!("need at least {min} states, got {n}")))
    } else {
        Ok(())
    }
}

/// Birth–death walk on `0..n` reflecting at both ends, zero diagonal.
pub fn path_chain(n: usize) -> Result<(TransitionMatrix, Distribution)> {
    require_states(n, 2)?;
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    conductance_chain(&ChainGraph::from_edges(n, &edges)?, &vec![1.0; n - 1])
}

/// Simple random walk on a star centered at state 0.
pub fn star_chain(n: usize) -> Result<(TransitionMatrix, Distribution)> {
    require_states(n, 2)?;
    let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
    conductance_chain(&ChainGraph::from_edges(n, &edges)?, &vec![1.0; n - 1])
}

/// Symmetric nearest-neighbour walk on the `n`-cycle.
pub fn cycle_chain(n: usize) -> Result<(TransitionMatrix, Distribution)> {
    require_states(n, 3)?;
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    conductance_chain(&ChainGraph::from_edges(n, &edges)?, &vec![1.0; n])
}

/// Random walk with edge conductances: `p_ij = c_ij / Σ_k c_ik`,
/// `π_i ∝ Σ_k c_ik`. `conductances` follows `graph.edges()` order.
pub fn conductance_chain(
    graph: &ChainGraph,
    conductances: &[f64],
) -> Result<(TransitionMatrix, Distribution)> {
    let edges = graph.edges();
    check_len(edges.len(), conductances.len())?;
    if !graph.is_connected() {
        return Err(ChainError::InvalidArgument("graph is disconnected".into()));
    }
    if let Some(c) = conductances.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(ChainError::InvalidArgument(format!("conductance {c} is not positive")));
    }
    let n = graph.n();
    let mut c = DMatrix::zeros(n, n);
    for (&(a, b), &w) in edges.iter().zip(conductances) {
        c[(a, b)] = w;
        c[(b, a)] = w;
    }
    let totals: Vec<f64> = c.row_iter().map(|r| r.sum()).collect();
    let p = DMatrix::from_fn(n, n, |i, j| c[(i, j)] / totals[i]);
    Ok((TransitionMatrix::new(p)?, Distribution::from_weights(&totals)?))
}

/// Decodes a Prüfer sequence over `0..n` (length `n − 2`) into tree edges.
pub fn prufer_decode(sequence: &[usize], n: usize) -> Result<Vec<(usize, usize)>> {
    require_states(n, 2)?;
    check_len(n - 2, sequence.len())?;
    let mut degree = vec![1usize; n];
    for &v in sequence {
        if v >= n {
            return Err(ChainError::InvalidState { index: v, n });
        }
        degree[v] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in sequence {
        let leaf = leaves.pop_first().expect("a tree always has a leaf");
        edges.push((leaf.min(v), leaf.max(v)));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.insert(v);
        }
    }
    let a = leaves.pop_first().expect("two vertices remain");
    let b = leaves.pop_first().expect("two vertices remain");
    edges.push((a, b));
    Ok(edges)
}

/// Uniform random labelled tree via a random Prüfer sequence.
pub fn random_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ChainGraph> {
    require_states(n, 2)?;
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    ChainGraph::from_edges(n, &prufer_decode(&seq, n)?)
}

fn random_weights<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| rng.gen_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1)).collect()
}

/// Conductance walk on a uniform random tree; reversible, zero diagonal.
pub fn random_tree_chain(n: usize, seed: u64) -> Result<(TransitionMatrix, Distribution)> {
    let mut rng = seeded_rng(seed);
    let tree = random_tree(n, &mut rng)?;
    let c = random_weights(n - 1, &mut rng);
    conductance_chain(&tree, &c)
}

/// Random tree plus between 1 and `max(1, n/2)` extra edges, so the support
/// always contains a cycle.
pub fn random_cyclic_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ChainGraph> {
    require_states(n, 3)?;
    let tree = random_tree(n, rng)?;
    let mut missing: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !tree.has_edge(a, b))
        .collect();
    missing.shuffle(rng);
    let extra = rng.gen_range(1..=(n / 2).max(1)).min(missing.len());
    let mut edges = tree.edges();
    edges.extend_from_slice(&missing[..extra]);
    ChainGraph::from_edges(n, &edges)
}

/// Conductance walk on [`random_cyclic_graph`]; reversible, zero diagonal.
pub fn random_cyclic_chain(n: usize, seed: u64) -> Result<(TransitionMatrix, Distribution)> {
    let mut rng = seeded_rng(seed);
    let g = random_cyclic_graph(n, &mut rng)?;
    let c = random_weights(g.edge_count(), &mut rng);
    conductance_chain(&g, &c)
}

/// Metropolis–Hastings kernel with uniform-neighbour proposals.
///
/// Acceptance is `min(1, π_j deg_i / (π_i deg_j))`; rejected mass stays on
/// the diagonal.
pub fn metropolis_chain(g: &ChainGraph, pi: &Distribution) -> Result<TransitionMatrix> {
    check_len(g.n(), pi.len())?;
    if !g.is_connected() {
        return Err(ChainError::InvalidArgument("graph is disconnected".into()));
    }
    let n = g.n();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let deg_i = g.degree(i) as f64;
        let mut moved = 0.0;
        for &j in g.neighbors(i) {
            let deg_j = g.degree(j) as f64;
            let accept = ((pi[j] * deg_i) / (pi[i] * deg_j)).min(1.0);
            p[(i, j)] = accept / deg_i;
            moved += p[(i, j)];
        }
        p[(i, i)] = (1.0 - moved).max(0.0);
    }
    TransitionMatrix::new(p)
}

/// Metropolis kernel on a random connected graph with cycles and a random
/// target drawn from [`WEIGHT_RANGE`].
pub fn random_metropolis_chain(n: usize, seed: u64) -> Result<(TransitionMatrix, Distribution)> {
    let mut rng = seeded_rng(seed);
    let g = random_cyclic_graph(n, &mut rng)?;
    let pi = Distribution::from_weights(&random_weights(n, &mut rng))?;
    Ok((metropolis_chain(&g, &pi)?, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{find_leaves, is_acyclic, stationary_distribution, support_graph, validate_chain};
    use crate::tol::TOL_STOCH;
    use approx::assert_abs_diff_eq;

    #[test]
    fn path_three() {
        let (p, pi) = path_chain(3).unwrap();
        let want = TransitionMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(p, want);
        assert_eq!(pi.as_slice(), &[0.25, 0.5, 0.25]);
        let (p, pi) = path_chain(2).unwrap();
        assert_eq!(p.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(pi.as_slice(), &[0.5, 0.5]);
        assert!(path_chain(1).is_err());
    }

    #[test]
    fn cycles() {
        let (p, pi) = cycle_chain(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(p[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }
        assert_eq!(pi.as_slice(), &[1.0 / 3.0; 3]);
        let (p4, pi4) = cycle_chain(4).unwrap();
        assert!(!is_acyclic(&support_graph(&p4)));
        let r = validate_chain(p4.matrix(), Some(&pi4), TOL_STOCH).unwrap();
        assert!(r.is_reversible);
        assert!(cycle_chain(2).is_err());
    }

    #[test]
    fn prufer_known_sequence() {
        // classic example: sequence [3, 3, 3, 4] on 6 vertices
        let edges = prufer_decode(&[3, 3, 3, 4], 6).unwrap();
        let g = ChainGraph::from_edges(6, &edges).unwrap();
        assert_eq!(g.edges(), vec![(0, 3), (1, 3), (2, 3), (3, 4), (4, 5)]);
    }

    #[test]
    fn random_trees_are_trees() {
        for seed in 0..50 {
            let (p, pi) = random_tree_chain(7, seed).unwrap();
            let g = support_graph(&p);
            assert!(is_acyclic(&g));
            assert_eq!(g.edge_count(), 6);
            assert!(g.is_connected());
            let r = validate_chain(p.matrix(), Some(&pi), TOL_STOCH).unwrap();
            assert!(r.is_stochastic && r.is_irreducible && r.is_reversible);
            assert!((0..7).all(|i| p[(i, i)] == 0.0));
            let leaves = find_leaves(&g).len();
            assert!((2..=6).contains(&leaves));
        }
        let (p, _) = random_tree_chain(2, 99).unwrap();
        assert_eq!(p.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn random_tree_is_deterministic() {
        assert_eq!(random_tree_chain(6, 7).unwrap(), random_tree_chain(6, 7).unwrap());
    }

    #[test]
    fn cyclic_chains_have_cycles() {
        for seed in 0..30 {
            let (p, _) = random_cyclic_chain(3 + (seed as usize % 6), seed).unwrap();
            assert!(!is_acyclic(&support_graph(&p)));
        }
    }

    #[test]
    fn metropolis_examples() {
        let tri = ChainGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = metropolis_chain(&tri, &Distribution::uniform(3).unwrap()).unwrap();
        assert_eq!(p, cycle_chain(3).unwrap().0);

        let star = ChainGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let pi = Distribution::new(vec![0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]).unwrap();
        let p = metropolis_chain(&star, &pi).unwrap();
        let r = validate_chain(p.matrix(), Some(&pi), TOL_STOCH).unwrap();
        assert!(r.is_reversible);
        let solved = stationary_distribution(&p).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(solved[i], pi[i], epsilon = 1e-10);
        }

        let split = ChainGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(metropolis_chain(&split, &Distribution::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn spec_seed_builds() {
        for family in ["path", "star", "cycle", "random-tree", "metropolis"] {
            let spec = ChainSpecSeed { family: family.parse().unwrap(), n: 5, seed: 3 };
            let (p, pi) = spec.build().unwrap();
            let r = validate_chain(p.matrix(), Some(&pi), TOL_STOCH).unwrap();
            assert!(r.is_stochastic && r.is_irreducible && r.is_reversible, "{family}");
        }
        assert!("tree".parse::<Family>().is_err());
    }
}
