//! Leaf-peeling certificates for reversible chains on trees.
//!
//! For a reversible `P` whose support graph is a tree and whose diagonal has
//! at most one nonzero entry, any `P'` with `ν(f, P', π) ≤ ν(f, P, π)` for all
//! `f` equals `P`. The certifier replays that argument numerically: it
//! repeatedly takes a residual leaf `i` with `p_ii = 0` and neighbour `j`,
//! checks that the commute time between them is unchanged, that `P'` has no
//! transitions between `i` and the rest of the residual tree, and that row and
//! column `i` of `P'` match `P`, then deletes `i`.

use serde::Serialize;

use crate::analysis::commute_time;
use crate::chain::{
    check_invariant, is_acyclic, is_reversible, support_graph, Distribution, TransitionMatrix,
};
use crate::dominance::{dominance_compare, improvement_search};
use crate::error::{ChainError, Result};
use crate::tol::{TOL_CERT, TOL_SOLVE, TOL_STOCH};

/// Which hypotheses of the tree unimprovability result hold for a chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreconditionReport {
    pub is_reversible: bool,
    pub is_irreducible: bool,
    pub is_acyclic: bool,
    /// States with `p_ii > 0`.
    pub nonzero_diagonal: Vec<usize>,
    pub diagonal_ok: bool,
    pub failures: Vec<String>,
}

impl PreconditionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn check_preconditions(p: &TransitionMatrix, pi: &Distribution) -> PreconditionReport {
    let mut failures = Vec::new();
    let reversible = pi.len() == p.n() && is_reversible(p, pi, TOL_STOCH);
    if pi.len() != p.n() {
        failures.push(format!("distribution has {} states, chain has {}", pi.len(), p.n()));
    } else if !reversible {
        failures.push("chain is not reversible with respect to the distribution".into());
    }
    let irreducible = p.is_irreducible();
    if !irreducible {
        failures.push("chain is reducible".into());
    }
    let acyclic = is_acyclic(&support_graph(p));
    if !acyclic {
        failures.push("support graph contains a cycle".into());
    }
    let nonzero_diagonal: Vec<usize> = (0..p.n()).filter(|&i| p[(i, i)] != 0.0).collect();
    let diagonal_ok = nonzero_diagonal.len() <= 1;
    if !diagonal_ok {
        failures.push(format!(
            "diagonal has {} nonzero entries (states {:?}); at most one is allowed",
            nonzero_diagonal.len(),
            nonzero_diagonal
        ));
    }
    PreconditionReport {
        is_reversible: reversible,
        is_irreducible: irreducible,
        is_acyclic: acyclic,
        nonzero_diagonal,
        diagonal_ok,
        failures,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `E_iT_j + E_jT_i` agrees between `P` and `P'`.
    CommuteTime,
    /// `p'_ik = p'_ki = 0` for residual `k` other than the neighbour.
    ForcedZero,
    /// `p'_ii = 0`.
    Diagonal,
    /// Remaining entries of row and column `i` agree with `P`.
    RowColumn,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::CommuteTime => "commute-time equality",
            Condition::ForcedZero => "forced zero",
            Condition::Diagonal => "diagonal condition",
            Condition::RowColumn => "row/column match",
        })
    }
}

/// One checked equality. For [`Condition::CommuteTime`] `(row, col)` is the
/// `(leaf, neighbour)` pair and the values are commute times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualityRecord {
    pub condition: Condition,
    pub row: usize,
    pub col: usize,
    pub under_p: f64,
    pub under_candidate: f64,
    pub gap: f64,
}

impl EqualityRecord {
    fn holds(&self) -> bool {
        self.gap <= TOL_CERT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeelStep {
    pub leaf: usize,
    pub neighbor: usize,
    pub established: Vec<EqualityRecord>,
}

impl PeelStep {
    pub fn max_gap(&self) -> f64 {
        self.established.iter().map(|r| r.gap).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Verdict {
    CertifiedEqual,
    /// `step` is 1-based; a step past the last peel refers to the final
    /// whole-matrix comparison.
    Violation { step: usize, condition: Condition, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateTrace {
    pub steps: Vec<PeelStep>,
    pub verdict: Verdict,
    /// Residual vertex count before each peel, followed by the final count.
    pub residual_graph_sizes: Vec<usize>,
    /// Whether the candidate weakly dominates `P` (re-checked here).
    pub candidate_dominates: bool,
    /// Least projected eigenvalue of `M_P − M_P'`, if the candidate is irreducible.
    pub min_eigenvalue: Option<f64>,
    /// `‖P − P'‖_max`.
    pub max_entry_gap: f64,
}

impl CertificateTrace {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedEqual
    }
}

fn commute_or_infinite(p: &TransitionMatrix, i: usize, j: usize) -> Result<f64> {
    match commute_time(p, i, j) {
        Err(ChainError::Reducible) | Err(ChainError::Singular(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

fn entry_record(
    condition: Condition,
    p: &TransitionMatrix,
    candidate: &TransitionMatrix,
    row: usize,
    col: usize,
) -> EqualityRecord {
    let (a, b) = (p[(row, col)], candidate[(row, col)]);
    EqualityRecord { condition, row, col, under_p: a, under_candidate: b, gap: (a - b).abs() }
}

/// Replays leaf peeling to show `candidate = P`, or reports the first
/// condition that fails.
pub fn peel_certify(
    p: &TransitionMatrix,
    candidate: &TransitionMatrix,
    pi: &Distribution,
) -> Result<CertificateTrace> {
    let pre = check_preconditions(p, pi);
    if !pre.passed() {
        return Err(ChainError::Preconditions(pre.failures.join("; ")));
    }
    if candidate.n() != p.n() {
        return Err(ChainError::DimensionMismatch { expected: p.n(), found: candidate.n() });
    }
    check_invariant(candidate, pi, TOL_SOLVE)?;

    let (candidate_dominates, min_eigenvalue) = match dominance_compare(candidate, p, pi) {
        Ok(v) => (v.weakly_dominates, Some(v.min_eigenvalue)),
        Err(ChainError::Reducible) | Err(ChainError::Singular(_)) => (false, None),
        Err(e) => return Err(e),
    };

    let n = p.n();
    let graph = support_graph(p);
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let mut steps = Vec::new();
    let mut residual_graph_sizes = Vec::new();
    let mut remaining = n;

    let finish = |steps, verdict, sizes| CertificateTrace {
        steps,
        verdict,
        residual_graph_sizes: sizes,
        candidate_dominates,
        min_eigenvalue,
        max_entry_gap: p.max_abs_diff(candidate),
    };

    while remaining > 1 {
        residual_graph_sizes.push(remaining);
        let step_no = steps.len() + 1;
        let Some(leaf) = (0..n).find(|&v| alive[v] && degree[v] == 1 && p[(v, v)] == 0.0) else {
            let verdict = Verdict::Violation {
                step: step_no,
                condition: Condition::Diagonal,
                reason: "no residual leaf with zero diagonal".into(),
            };
            return Ok(finish(steps, verdict, residual_graph_sizes));
        };
        let neighbor = graph
            .neighbors(leaf)
            .iter()
            .copied()
            .find(|&w| alive[w])
            .expect("a residual leaf has one live neighbour");

        let mut step = PeelStep { leaf, neighbor, established: Vec::new() };
        let mut failure = None;

        let c_p = commute_time(p, leaf, neighbor)?;
        let c_q = commute_or_infinite(candidate, leaf, neighbor)?;
        let commute = EqualityRecord {
            condition: Condition::CommuteTime,
            row: leaf,
            col: neighbor,
            under_p: c_p,
            under_candidate: c_q,
            gap: (c_p - c_q).abs(),
        };
        if !commute.holds() {
            failure = Some((Condition::CommuteTime, format!(
                "commute time between {leaf} and {neighbor} is {c_p} under P but {c_q} under the candidate"
            )));
        }
        step.established.push(commute);

        if failure.is_none() {
            for k in (0..n).filter(|&k| alive[k] && k != leaf && k != neighbor) {
                for (r, c) in [(leaf, k), (k, leaf)] {
                    let rec = entry_record(Condition::ForcedZero, p, candidate, r, c);
                    let ok = rec.holds();
                    step.established.push(rec);
                    if !ok && failure.is_none() {
                        failure = Some((Condition::ForcedZero, format!(
                            "entry ({r}, {c}) = {} must vanish",
                            candidate[(r, c)]
                        )));
                    }
                }
            }
        }

        if failure.is_none() {
            let rec = entry_record(Condition::Diagonal, p, candidate, leaf, leaf);
            if !rec.holds() {
                failure = Some((Condition::Diagonal, format!(
                    "entry ({leaf}, {leaf}) = {} must vanish",
                    candidate[(leaf, leaf)]
                )));
            }
            step.established.push(rec);
        }

        if failure.is_none() {
            for k in (0..n).filter(|&k| k == neighbor || !alive[k]) {
                for (r, c) in [(leaf, k), (k, leaf)] {
                    let rec = entry_record(Condition::RowColumn, p, candidate, r, c);
                    let ok = rec.holds();
                    step.established.push(rec);
                    if !ok && failure.is_none() {
                        failure = Some((Condition::RowColumn, format!(
                            "entry ({r}, {c}) is {} under P but {} under the candidate",
                            p[(r, c)],
                            candidate[(r, c)]
                        )));
                    }
                }
            }
        }

        steps.push(step);
        if let Some((condition, reason)) = failure {
            let verdict = Verdict::Violation { step: step_no, condition, reason };
            return Ok(finish(steps, verdict, residual_graph_sizes));
        }

        alive[leaf] = false;
        degree[leaf] = 0;
        degree[neighbor] -= 1;
        remaining -= 1;
    }
    residual_graph_sizes.push(remaining);

    let gap = p.max_abs_diff(candidate);
    let verdict = if gap <= TOL_CERT {
        Verdict::CertifiedEqual
    } else {
        Verdict::Violation {
            step: steps.len() + 1,
            condition: Condition::RowColumn,
            reason: format!("final comparison leaves an entry gap of {gap:e}"),
        }
    };
    Ok(finish(steps, verdict, residual_graph_sizes))
}

/// Result of searching for an improvement over a tree chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnimprovableReport {
    pub budget: usize,
    pub seed: u64,
    pub improvement_found: bool,
    pub message: String,
    /// Rows of the improving kernel, if one was found.
    pub candidate: Option<Vec<Vec<f64>>>,
    /// Peeling diagnostics for a found candidate.
    pub trace: Option<CertificateTrace>,
}

pub fn assert_unimprovable(
    p: &TransitionMatrix,
    pi: &Distribution,
    budget: usize,
    seed: u64,
) -> Result<UnimprovableReport> {
    let pre = check_preconditions(p, pi);
    if !pre.passed() {
        return Err(ChainError::Preconditions(pre.failures.join("; ")));
    }
    match improvement_search(p, pi, budget, seed)? {
        None => Ok(UnimprovableReport {
            budget,
            seed,
            improvement_found: false,
            message: format!("no improvement found in {budget} trials"),
            candidate: None,
            trace: None,
        }),
        Some(q) => {
            let trace = peel_certify(p, &q, pi)?;
            Ok(UnimprovableReport {
                budget,
                seed,
                improvement_found: true,
                message: "found a kernel that numerically dominates an acyclic chain; see trace".into(),
                candidate: Some(q.to_rows()),
                trace: Some(trace),
            })
        }
    }
}
