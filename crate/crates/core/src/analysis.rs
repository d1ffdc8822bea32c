//! Fundamental matrix, asymptotic variance and hitting-time quantities.
//!
//! Every quantity here comes from a dense LU solve. Hitting times are solved
//! per target on the `(n−1)×(n−1)` system rather than read off `Z`, so the
//! relation between `Z` and expected hitting times can be checked across two
//! independent routes.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain::{check_invariant, check_len, Distribution, TransitionMatrix};
use crate::error::{ChainError, Result};
use crate::tol::TOL_SOLVE;

/// `⟨f, g⟩_π = Σ f(i) g(i) π_i`.
pub fn pi_inner(f: &[f64], g: &[f64], pi: &Distribution) -> Result<f64> {
    check_len(pi.len(), f.len())?;
    check_len(pi.len(), g.len())?;
    Ok(f.iter()
        .zip(g)
        .zip(pi.as_slice())
        .map(|((a, b), w)| a * b * w)
        .sum())
}

/// `f − π(f)`.
pub fn center(f: &[f64], pi: &Distribution) -> Result<Vec<f64>> {
    let mean = pi.expectation(f)?;
    Ok(f.iter().map(|v| v - mean).collect())
}

/// `Z = (I − P + Π)⁻¹ − Π` together with the distribution it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalMatrix {
    entries: DMatrix<f64>,
    pi: Distribution,
}

impl FundamentalMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn pi(&self) -> &Distribution {
        &self.pi
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// `Z f` for a plain vector.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n(), f.len())?;
        let v = &self.entries * DVector::from_column_slice(f);
        Ok(v.as_slice().to_vec())
    }

    /// `⟨Z f, f⟩_π`.
    pub fn form(&self, f: &[f64]) -> Result<f64> {
        pi_inner(&self.apply(f)?, f, &self.pi)
    }

    /// Asymptotic variance of `f`; `f` is centered first.
    pub fn variance(&self, f: &[f64]) -> Result<f64> {
        let g = center(f, &self.pi)?;
        Ok(2.0 * self.form(&g)? - pi_inner(&g, &g, &self.pi)?)
    }
}

pub fn fundamental_matrix(p: &TransitionMatrix, pi: &Distribution) -> Result<FundamentalMatrix> {
    check_len(p.n(), pi.len())?;
    if !p.is_irreducible() {
        return Err(ChainError::Reducible);
    }
    check_invariant(p, pi, TOL_SOLVE)?;
    let n = p.n();
    let stationary_rows = stationary_rows(pi);
    let a = DMatrix::<f64>::identity(n, n) - p.matrix() + &stationary_rows;
    let inverse = a
        .lu()
        .try_inverse()
        .ok_or(ChainError::Singular("I - P + Pi"))?;
    Ok(FundamentalMatrix { entries: inverse - stationary_rows, pi: pi.clone() })
}

/// The rank-one matrix `Π` whose rows all equal `π`.
fn stationary_rows(pi: &Distribution) -> DMatrix<f64> {
    let n = pi.len();
    DMatrix::from_fn(n, n, |_, j| pi[j])
}

/// `ν(f, P, π) = 2⟨Z f̄, f̄⟩_π − ⟨f̄, f̄⟩_π` with `f̄ = f − π(f)`.
pub fn asymptotic_variance(f: &[f64], p: &TransitionMatrix, pi: &Distribution) -> Result<f64> {
    check_len(p.n(), f.len())?;
    fundamental_matrix(p, pi)?.variance(f)
}

/// Symmetric matrix `M = D_π Z + Zᵀ D_π − D_π` with `fᵀ M f = ν(f)` for
/// centered `f`, plus an orthonormal basis of the centered subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceForm {
    matrix: DMatrix<f64>,
    pi: Distribution,
    /// `(n−1)×n`; rows are orthonormal and orthogonal to `π`.
    basis: DMatrix<f64>,
}

impl VarianceForm {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pi(&self) -> &Distribution {
        &self.pi
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `fᵀ M f`; equals `ν(f)` only for centered `f`.
    pub fn evaluate(&self, f: &[f64]) -> Result<f64> {
        check_len(self.matrix.nrows(), f.len())?;
        let v = DVector::from_column_slice(f);
        Ok(v.dot(&(&self.matrix * &v)))
    }

    /// `B M Bᵀ`, the form in centered-subspace coordinates.
    pub fn projected(&self) -> DMatrix<f64> {
        project(&self.matrix, &self.basis)
    }
}

pub(crate) fn project(m: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = basis * m * basis.transpose();
    symmetrize(&mut out);
    out
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn variance_form(p: &TransitionMatrix, pi: &Distribution) -> Result<VarianceForm> {
    let z = fundamental_matrix(p, pi)?;
    let d = DMatrix::from_diagonal(pi.vector());
    let dz = &d * z.entries();
    // A + Aᵀ is bitwise symmetric in floating point.
    let matrix = &dz + dz.transpose() - &d;
    Ok(VarianceForm { matrix, pi: pi.clone(), basis: centered_basis(pi) })
}

/// Orthonormal basis of `{f : Σ π_i f_i = 0}` by modified Gram–Schmidt over
/// `π, e_0, …, e_{n−1}`, discarding the `π` direction.
pub fn centered_basis(pi: &Distribution) -> DMatrix<f64> {
    let n = pi.len();
    let mut accepted: Vec<DVector<f64>> = vec![pi.vector().normalize()];
    for k in 0..n {
        if accepted.len() == n {
            break;
        }
        let mut v = DVector::<f64>::zeros(n);
        v[k] = 1.0;
        // two passes keep orthogonality at machine precision
        for _ in 0..2 {
            for q in &accepted {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            accepted.push(v / norm);
        }
    }
    let rows: Vec<_> = accepted[1..].iter().map(|v| v.transpose()).collect();
    DMatrix::from_rows(&rows)
}

/// Expected hitting times `h_i = E_i T_j`, with `h_j = 0`.
pub fn hitting_times(p: &TransitionMatrix, target: usize) -> Result<Vec<f64>> {
    p.check_state(target)?;
    if !p.is_irreducible() {
        return Err(ChainError::Reducible);
    }
    let others: Vec<usize> = (0..p.n()).filter(|&k| k != target).collect();
    let m = others.len();
    let a = DMatrix::from_fn(m, m, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        delta - p[(others[r], others[c])]
    });
    let sol = a
        .lu()
        .solve(&DVector::from_element(m, 1.0))
        .ok_or(ChainError::Singular("hitting-time system"))?;
    let mut h = vec![0.0; p.n()];
    for (r, &k) in others.iter().enumerate() {
        h[k] = sol[r];
    }
    Ok(h)
}

/// Table of all expected hitting times, entry `(i, j) = E_i T_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingTimeTable {
    pub expected: Vec<Vec<f64>>,
}

impl HittingTimeTable {
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.expected[from][to]
    }
}

pub fn hitting_time_table(p: &TransitionMatrix) -> Result<HittingTimeTable> {
    let n = p.n();
    let mut expected = vec![vec![0.0; n]; n];
    for j in 0..n {
        for (row, h) in expected.iter_mut().zip(hitting_times(p, j)?) {
            row[j] = h;
        }
    }
    Ok(HittingTimeTable { expected })
}

/// `E_π T_j = Σ_i π_i E_i T_j`.
pub fn mean_hitting_from_stationary(
    p: &TransitionMatrix,
    pi: &Distribution,
    target: usize,
) -> Result<f64> {
    check_len(p.n(), pi.len())?;
    pi.expectation(&hitting_times(p, target)?)
}

/// `E_i T_j + E_j T_i`.
pub fn commute_time(p: &TransitionMatrix, i: usize, j: usize) -> Result<f64> {
    distinct(p, &[i, j])?;
    Ok(hitting_times(p, j)?[i] + hitting_times(p, i)?[j])
}

/// `u_k = P_k(T_first < T_second)` for every start `k`.
pub fn hit_before_probability(p: &TransitionMatrix, first: usize, second: usize) -> Result<Vec<f64>> {
    distinct(p, &[first, second])?;
    let interior: Vec<usize> = (0..p.n()).filter(|&k| k != first && k != second).collect();
    let mut u = vec![0.0; p.n()];
    u[first] = 1.0;
    let m = interior.len();
    if m == 0 {
        return Ok(u);
    }
    let a = DMatrix::from_fn(m, m, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        delta - p[(interior[r], interior[c])]
    });
    let b = DVector::from_fn(m, |r, _| p[(interior[r], first)]);
    let sol = a
        .lu()
        .solve(&b)
        .ok_or(ChainError::Singular("absorbing-boundary system"))?;
    for (r, &k) in interior.iter().enumerate() {
        u[k] = sol[r];
    }
    Ok(u)
}

/// `P_i(T_j < T_i⁺)`: leave `i` and reach `j` before coming back.
pub fn return_race_probability(p: &TransitionMatrix, i: usize, j: usize) -> Result<f64> {
    let u = hit_before_probability(p, j, i)?;
    Ok((0..p.n()).map(|k| p[(i, k)] * u[k]).sum())
}

/// Centered indicator pair: `−1/π_i` at `i`, `+1/π_j` at `j`.
pub fn pair_function(i: usize, j: usize, pi: &Distribution) -> Result<Vec<f64>> {
    let n = pi.len();
    for &s in &[i, j] {
        if s >= n {
            return Err(ChainError::InvalidState { index: s, n });
        }
    }
    if i == j {
        return Err(ChainError::RepeatedState);
    }
    let mut f = vec![0.0; n];
    f[i] = -1.0 / pi[i];
    f[j] = 1.0 / pi[j];
    Ok(f)
}

/// Closed form of `⟨Z g, g⟩_π` for `g = a·f_ij + b·f_jk` in terms of commute
/// times and race probabilities:
///
/// `a²C_ij + b²C_jk − ab[P_k(T_i<T_j) C_ij + P_i(T_k<T_j) C_jk]`
///
/// where `C_xy = E_x T_y + E_y T_x`. The cross terms enter with a minus sign:
/// for `a = b = 1` the combination collapses to `f_ik`, whose form is `C_ik`.
#[allow(clippy::too_many_arguments)]
pub fn pair_quadratic_form(
    p: &TransitionMatrix,
    pi: &Distribution,
    i: usize,
    j: usize,
    k: usize,
    a: f64,
    b: f64,
) -> Result<f64> {
    check_len(p.n(), pi.len())?;
    distinct(p, &[i, j, k])?;
    let c_ij = commute_time(p, i, j)?;
    let c_jk = commute_time(p, j, k)?;
    let k_hits_i_first = hit_before_probability(p, i, j)?[k];
    let i_hits_k_first = hit_before_probability(p, k, j)?[i];
    Ok(a * a * c_ij + b * b * c_jk - a * b * (k_hits_i_first * c_ij + i_hits_k_first * c_jk))
}

fn distinct(p: &TransitionMatrix, states: &[usize]) -> Result<()> {
    for (idx, &s) in states.iter().enumerate() {
        p.check_state(s)?;
        if states[..idx].contains(&s) {
            return Err(ChainError::RepeatedState);
        }
    }
    Ok(())
}
