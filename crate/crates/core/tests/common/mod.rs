//! Independent oracles and chain families shared by the integration tests.
//!
//! None of these routines touch the fundamental matrix or the LU solves used
//! by the library: hitting times and race probabilities come from iterating
//! the chain, variances from spectral decompositions or autocovariance sums.
#![allow(dead_code)]

use chainvar::generators::{random_cyclic_chain, random_metropolis_chain, random_tree_chain};
use chainvar::{cycle_flow, find_cycle, max_epsilon, perturb, support_graph, Distribution, TransitionMatrix};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `E_i T_j = Σ_{t≥0} P_i(T_j > t)`, summed until the surviving mass is
/// negligible.
pub fn series_hitting_time(p: &TransitionMatrix, i: usize, j: usize) -> f64 {
    if i == j {
        return 0.0;
    }
    let n = p.n();
    let mut mass = DVector::<f64>::zeros(n);
    mass[i] = 1.0;
    let mut total = 0.0;
    for _ in 0..2_000_000 {
        let alive: f64 = mass.sum();
        if alive < 1e-16 {
            break;
        }
        total += alive;
        let mut next = p.matrix().transpose() * &mass;
        next[j] = 0.0;
        mass = next;
    }
    total
}

/// `P_k(T_a < T_b)` by repeated substitution of the harmonic equations.
pub fn iterated_hit_before(p: &TransitionMatrix, a: usize, b: usize) -> Vec<f64> {
    let n = p.n();
    let mut u = vec![0.0; n];
    u[a] = 1.0;
    for _ in 0..1_000_000 {
        let mut next = u.clone();
        let mut change: f64 = 0.0;
        for k in (0..n).filter(|&k| k != a && k != b) {
            next[k] = (0..n).map(|l| p[(k, l)] * u[l]).sum();
            change = change.max((next[k] - u[k]).abs());
        }
        u = next;
        if change < 1e-16 {
            break;
        }
    }
    u
}

/// Asymptotic variance of a reversible chain from the spectrum of
/// `D^{1/2} P D^{-1/2}`: `Σ_{λ≠1} (1+λ)/(1−λ) ⟨f, φ⟩²`.
pub fn spectral_variance(p: &TransitionMatrix, pi: &Distribution, f: &[f64]) -> f64 {
    let n = p.n();
    let s = DMatrix::from_fn(n, n, |i, j| (pi[i] / pi[j]).sqrt() * p[(i, j)]);
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let g = DVector::from_fn(n, |i, _| f[i] * pi[i].sqrt());
    let mut total = 0.0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if (lambda - 1.0).abs() < 1e-9 {
            continue;
        }
        let c = eig.eigenvectors.column(k).dot(&g);
        total += (1.0 + lambda) / (1.0 - lambda) * c * c;
    }
    total
}

/// `Var_π(f) + 2 Σ_{t=1}^{T} Cov_π(f(X_0), f(X_t))` for aperiodic chains.
pub fn autocovariance_variance(p: &TransitionMatrix, pi: &Distribution, f: &[f64], terms: usize) -> f64 {
    let n = p.n();
    let mean: f64 = (0..n).map(|i| pi[i] * f[i]).sum();
    let g = DVector::from_fn(n, |i, _| f[i] - mean);
    let weighted = DVector::from_fn(n, |i, _| pi[i] * g[i]);
    let mut pt_g = g.clone();
    let mut total = weighted.dot(&g);
    for _ in 0..terms {
        pt_g = p.matrix() * pt_g;
        total += 2.0 * weighted.dot(&pt_g);
    }
    total
}

pub fn path3() -> (TransitionMatrix, Distribution) {
    chainvar::generators::path_chain(3).unwrap()
}

pub fn cycle3() -> (TransitionMatrix, Distribution) {
    chainvar::generators::cycle_chain(3).unwrap()
}

pub fn two_state() -> (TransitionMatrix, Distribution) {
    (
        TransitionMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
        Distribution::uniform(2).unwrap(),
    )
}

/// The 3-cycle walk with every forward entry raised by `shift` and every
/// backward entry lowered by it.
pub fn shifted_cycle3(shift: f64) -> TransitionMatrix {
    let (p, pi) = cycle3();
    let flow = cycle_flow(3, &[0, 1, 2]).unwrap();
    perturb(&p, &pi, &flow, shift * pi[0]).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Tree,
    Metropolis,
    Perturbed,
}

/// Member `k` of the mixed identity-test family: sizes cycle through 3..=8
/// and kinds through tree / Metropolis / perturbed conductance chains.
pub fn mixed_chain(k: u64) -> (Kind, TransitionMatrix, Distribution) {
    let n = 3 + (k as usize % 6);
    let seed = 1000 + k;
    match k % 3 {
        0 => {
            let (p, pi) = random_tree_chain(n, seed).unwrap();
            (Kind::Tree, p, pi)
        }
        1 => {
            let (p, pi) = random_metropolis_chain(n, seed).unwrap();
            (Kind::Metropolis, p, pi)
        }
        _ => {
            let (p, pi) = random_cyclic_chain(n, seed).unwrap();
            let cycle = find_cycle(&support_graph(&p)).unwrap();
            let flow = cycle_flow(n, &cycle).unwrap();
            let eps = 0.7 * max_epsilon(&p, &pi, &flow).unwrap();
            (Kind::Perturbed, perturb(&p, &pi, &flow, eps).unwrap(), pi)
        }
    }
}
