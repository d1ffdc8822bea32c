//! The "uniformly better" order between kernels sharing a target `π`.
//!
//! `P'` weakly dominates `P` when `ν(f, P', π) ≤ ν(f, P, π)` for every `f`,
//! i.e. when `M_P − M_P'` is positive semidefinite on the centered subspace.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::analysis::{commute_time, pair_function, project, variance_form, VarianceForm};
use crate::chain::{check_len, support_graph, ChainGraph, Distribution, TransitionMatrix};
use crate::error::{ChainError, Result};
use crate::generators::{metropolis_chain, seeded_rng};
use crate::perturbation::{cycle_flow, max_epsilon, perturb, random_cycle};
use crate::tol::{TOL_PSD, TOL_SOLVE};

/// Outcome of comparing a new kernel against an old one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceVerdict {
    pub weakly_dominates: bool,
    pub strictly_better: bool,
    /// Least eigenvalue of the projected `M_old − M_new`.
    pub min_eigenvalue: f64,
    /// Greatest eigenvalue of the projected `M_old − M_new`.
    pub max_eigenvalue: f64,
    /// A centered function attaining the extreme eigenvalue: the worst
    /// direction on a violation, the best direction on strict improvement.
    pub witness: Option<Vec<f64>>,
}

pub fn dominance_compare(
    new: &TransitionMatrix,
    old: &TransitionMatrix,
    pi: &Distribution,
) -> Result<DominanceVerdict> {
    check_len(new.n(), old.n())?;
    let new_form = variance_form(new, pi)?;
    let old_form = variance_form(old, pi)?;
    Ok(compare_forms(&new_form, &old_form))
}

pub(crate) fn compare_forms(new: &VarianceForm, old: &VarianceForm) -> DominanceVerdict {
    let basis = old.basis();
    if basis.nrows() == 0 {
        return DominanceVerdict {
            weakly_dominates: true,
            strictly_better: false,
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            witness: None,
        };
    }
    let diff = old.matrix() - new.matrix();
    let eig = SymmetricEigen::new(project(&diff, basis));
    let (min_idx, min_eigenvalue) = extreme(&eig.eigenvalues, |a, b| a < b);
    let (max_idx, max_eigenvalue) = extreme(&eig.eigenvalues, |a, b| a > b);
    let weakly_dominates = min_eigenvalue >= -TOL_PSD;
    let strictly_better = weakly_dominates && max_eigenvalue > TOL_PSD;
    let expand = |idx: usize| -> Vec<f64> {
        let v = basis.transpose() * eig.eigenvectors.column(idx);
        v.as_slice().to_vec()
    };
    let witness = if !weakly_dominates {
        Some(expand(min_idx))
    } else if strictly_better {
        Some(expand(max_idx))
    } else {
        None
    };
    DominanceVerdict { weakly_dominates, strictly_better, min_eigenvalue, max_eigenvalue, witness }
}

fn extreme(values: &nalgebra::DVector<f64>, better: impl Fn(f64, f64) -> bool) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, best.1) {
            best = (i, v);
        }
    }
    best
}

/// Necessary condition for weak dominance: no commute time grows.
///
/// The commute time `C_ij` is `⟨Z f_ij, f_ij⟩_π`, so weak dominance within
/// `TOL_PSD` bounds its growth by `TOL_PSD · ‖f_ij‖² / 2`; that bound plus a
/// solve tolerance is the slack allowed per pair.
pub fn commute_dominance_check(
    new: &TransitionMatrix,
    old: &TransitionMatrix,
    pi: &Distribution,
) -> Result<bool> {
    check_len(new.n(), old.n())?;
    check_len(new.n(), pi.len())?;
    let n = new.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let c_new = commute_time(new, i, j)?;
            let c_old = commute_time(old, i, j)?;
            let f = pair_function(i, j, pi)?;
            let norm2: f64 = f.iter().map(|v| v * v).sum();
            let slack = 0.5 * TOL_PSD * norm2 + TOL_SOLVE * c_old.max(1.0);
            if c_new > c_old + slack {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Fraction of each candidate's feasible range that is actually used.
const STEP_RANGE: (f64, f64) = (0.25, 1.0);

/// Randomized search for a `π`-invariant kernel that is uniformly better.
///
/// Each trial draws one candidate, with equal probability, from: a
/// circulation along a random support cycle; a convex mixture with another
/// `π`-invariant kernel; or a move of diagonal mass onto a symmetric
/// off-diagonal pair. Returns the first strict improvement.
pub fn improvement_search(
    p: &TransitionMatrix,
    pi: &Distribution,
    budget: usize,
    seed: u64,
) -> Result<Option<TransitionMatrix>> {
    if budget == 0 {
        return Err(ChainError::InvalidArgument("budget must be positive".into()));
    }
    let base_form = variance_form(p, pi)?;
    let graph = support_graph(p);
    let partners = mixing_partners(p, pi)?;
    let mut rng = seeded_rng(seed);

    for _ in 0..budget {
        let candidate = match rng.gen_range(0..3) {
            0 => cycle_candidate(p, pi, &graph, &mut rng)?,
            1 => Some(mixture_candidate(p, &partners, &mut rng)?),
            _ => diagonal_candidate(p, pi, &mut rng)?,
        };
        let Some(candidate) = candidate else { continue };
        if candidate.max_abs_diff(p) <= 1e-12 {
            continue;
        }
        let verdict = compare_forms(&variance_form(&candidate, pi)?, &base_form);
        if verdict.weakly_dominates && verdict.strictly_better {
            return Ok(Some(candidate));
        }
    }
    Ok(None)
}

/// Other kernels with stationary `π`: independent sampling, the two-step
/// kernel, the time reversal and Metropolis on the complete graph.
fn mixing_partners(p: &TransitionMatrix, pi: &Distribution) -> Result<Vec<DMatrix<f64>>> {
    let n = p.n();
    let independent = DMatrix::from_fn(n, n, |_, j| pi[j]);
    let two_step = p.matrix() * p.matrix();
    let reversal = DMatrix::from_fn(n, n, |i, j| pi[j] * p[(j, i)] / pi[i]);
    let complete: Vec<(usize, usize)> =
        (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
    let metropolis = metropolis_chain(&ChainGraph::from_edges(n, &complete)?, pi)?;
    Ok(vec![independent, two_step, reversal, metropolis.into_matrix()])
}

fn step<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(STEP_RANGE.0..=STEP_RANGE.1)
}

fn cycle_candidate<R: Rng + ?Sized>(
    p: &TransitionMatrix,
    pi: &Distribution,
    graph: &ChainGraph,
    rng: &mut R,
) -> Result<Option<TransitionMatrix>> {
    let Some(cycle) = random_cycle(graph, rng) else { return Ok(None) };
    let flow = cycle_flow(p.n(), &cycle)?;
    let max = max_epsilon(p, pi, &flow)?;
    if !(max > 0.0 && max.is_finite()) {
        return Ok(None);
    }
    let eps = step(rng) * max;
    perturb(p, pi, &flow, eps).map(Some)
}

fn mixture_candidate<R: Rng + ?Sized>(
    p: &TransitionMatrix,
    partners: &[DMatrix<f64>],
    rng: &mut R,
) -> Result<TransitionMatrix> {
    let q = &partners[rng.gen_range(0..partners.len())];
    let t = step(rng);
    let mixed = p.matrix() * (1.0 - t) + q * t;
    TransitionMatrix::new(renormalize(mixed))
}

fn diagonal_candidate<R: Rng + ?Sized>(
    p: &TransitionMatrix,
    pi: &Distribution,
    rng: &mut R,
) -> Result<Option<TransitionMatrix>> {
    let n = p.n();
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let available = (pi[i] * p[(i, i)]).min(pi[j] * p[(j, j)]);
    if available <= 0.0 {
        return Ok(None);
    }
    let flow = step(rng) * available;
    let mut m = p.matrix().clone();
    m[(i, i)] = (m[(i, i)] - flow / pi[i]).max(0.0);
    m[(j, j)] = (m[(j, j)] - flow / pi[j]).max(0.0);
    m[(i, j)] += flow / pi[i];
    m[(j, i)] += flow / pi[j];
    TransitionMatrix::new(renormalize(m)).map(Some)
}

/// Removes round-off drift in row sums by adjusting the largest entry.
fn renormalize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in m.row_iter_mut() {
        let drift = row.sum() - 1.0;
        let (idx, _) = row.iter().enumerate().fold((0, f64::MIN), |acc, (k, &v)| {
            if v > acc.1 {
                (k, v)
            } else {
                acc
            }
        });
        row[idx] -= drift;
    }
    m
}
