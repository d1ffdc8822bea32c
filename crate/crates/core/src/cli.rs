//! Command-line front end. Every command prints one JSON document.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{asymptotic_variance, center, hitting_time_table, pi_inner};
use crate::certify::{assert_unimprovable, check_preconditions, peel_certify};
use crate::chain::{
    check_invariant, find_leaves, is_acyclic, stationary_distribution_with_tol, support_graph,
    validate_chain, Distribution, TransitionMatrix,
};
use crate::dominance::dominance_compare;
use crate::error::ChainError;
use crate::generators::{ChainSpecSeed, Family};
use crate::io::{read_chain_file, ChainFile};
use crate::perturbation::{cycle_flow, find_cycle, max_epsilon, perturb};
use crate::simulate::{batch_means_variance, default_batch_length, sample_path};
use crate::tol::{TOL_SOLVE, TOL_STOCH};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_REDUCIBLE: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;

/// Overrides the linear-solve residual tolerance.
pub const TOL_ENV: &str = "CHAINVAR_TOL";

pub const DEFAULT_BUDGET: usize = 1000;
pub const DEFAULT_SEED: u64 = 0;
pub const MIN_SIMULATION_STEPS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "chainvar", version, about = "Exact asymptotic-variance analysis of finite Markov chains")]
pub struct Cli {
    /// Pretty-print the JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Include wall-clock time (`elapsed_ms`) in the output.
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validation, stationary distribution, support structure and hitting times.
    Analyze { chain: PathBuf },
    /// Asymptotic variance of a function.
    Variance {
        chain: PathBuf,
        /// Comma-separated values, a JSON array, or a file holding either.
        #[arg(long, allow_hyphen_values = true)]
        f: String,
    },
    /// Add a cycle circulation and compare against the input.
    Perturb {
        chain: PathBuf,
        /// Flow size, or `max` for the largest feasible value.
        #[arg(long, default_value = "max", allow_hyphen_values = true)]
        epsilon: String,
        /// Also write the perturbed chain file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for improvements of a tree chain, or certify a candidate equal to it.
    Certify {
        chain: PathBuf,
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Batch-means estimate from a simulated path, next to the exact value.
    Simulate {
        chain: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Defaults to ⌊√steps⌋.
        #[arg(long)]
        batch_length: Option<usize>,
    },
    /// Print a chain file for one of the built-in families.
    Generate {
        /// path | star | cycle | random-tree
        family: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        let code = match e {
            ChainError::Reducible => EXIT_REDUCIBLE,
            ChainError::Preconditions(_) => EXIT_PRECONDITION,
            ChainError::Singular(_) => EXIT_FAILURE,
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct CommandResult {
    pub command: &'static str,
    pub inputs: Value,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

/// Runs one command and returns the text for standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let tol = solve_tolerance()?;
    let started = Instant::now();
    let (command, inputs, outputs) = match &cli.command {
        Command::Generate { family, n, seed } => return generate(family, *n, *seed, cli.pretty),
        Command::Analyze { chain } => ("analyze", json!({ "chain": chain }), analyze(chain, tol)?),
        Command::Variance { chain, f } => {
            ("variance", json!({ "chain": chain, "f": f }), variance(chain, f, tol)?)
        }
        Command::Perturb { chain, epsilon, out } => (
            "perturb",
            json!({ "chain": chain, "epsilon": epsilon }),
            perturb_cmd(chain, epsilon, out.as_deref(), tol)?,
        ),
        Command::Certify { chain, candidate, budget, seed } => (
            "certify",
            json!({ "chain": chain, "candidate": candidate, "budget": budget, "seed": seed }),
            certify(chain, candidate.as_deref(), *budget, *seed, tol)?,
        ),
        Command::Simulate { chain, f, steps, seed, start, batch_length } => (
            "simulate",
            json!({ "chain": chain, "f": f, "steps": steps, "seed": seed, "start": start }),
            simulate(chain, f, *steps, *seed, *start, *batch_length, tol)?,
        ),
    };
    let result = CommandResult {
        command,
        inputs,
        outputs,
        elapsed_ms: cli.timing.then(|| started.elapsed().as_secs_f64() * 1e3),
    };
    Ok(to_json(&result, cli.pretty))
}

fn to_json<T: Serialize>(value: &T, pretty: bool) -> String {
    let out = if pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) };
    out.expect("command output serializes")
}

fn solve_tolerance() -> Result<f64, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
            _ => Err(CliError::input(format!("{TOL_ENV}={raw:?} is not a positive number"))),
        },
        Err(_) => Ok(TOL_SOLVE),
    }
}

struct LoadedChain {
    p: TransitionMatrix,
    pi: Distribution,
    pi_supplied: bool,
}

fn load_chain(path: &Path, tol: f64) -> Result<LoadedChain, CliError> {
    let file = read_chain_file(path).map_err(CliError::input)?;
    load_from_file(&file, tol).map_err(|e| CliError::new(e.code, format!("{}: {}", path.display(), e.message)))
}

fn load_from_file(file: &ChainFile, tol: f64) -> Result<LoadedChain, CliError> {
    let (p, pi) = file.to_chain()?;
    if !p.is_irreducible() {
        return Err(ChainError::Reducible.into());
    }
    let pi_supplied = pi.is_some();
    let pi = match pi {
        Some(pi) => {
            check_invariant(&p, &pi, tol)?;
            pi
        }
        None => stationary_distribution_with_tol(&p, tol)?,
    };
    Ok(LoadedChain { p, pi, pi_supplied })
}

/// Accepts `1,0,-1`, `[1, 0, -1]`, or a path to a file holding either.
pub fn parse_vector(raw: &str) -> Result<Vec<f64>, CliError> {
    fn inline(s: &str) -> Option<Vec<f64>> {
        let s = s.trim();
        if s.starts_with('[') {
            return serde_json::from_str(s).ok();
        }
        s.split(',').map(|t| t.trim().parse::<f64>().ok()).collect()
    }
    if let Some(v) = inline(raw) {
        return Ok(v);
    }
    let text = std::fs::read_to_string(raw)
        .map_err(|e| CliError::input(format!("cannot read function values from `{raw}`: {e}")))?;
    inline(&text).ok_or_else(|| CliError::input(format!("`{raw}` does not hold a list of numbers")))
}

fn check_function(f: &[f64], n: usize) -> Result<(), CliError> {
    if f.len() != n {
        return Err(CliError::input(format!("function has {} values, chain has {n} states", f.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(CliError::input("function values must be finite"));
    }
    Ok(())
}

fn analyze(path: &Path, tol: f64) -> Result<Value, CliError> {
    let c = load_chain(path, tol)?;
    let report = validate_chain(c.p.matrix(), Some(&c.pi), TOL_STOCH)?;
    let graph = support_graph(&c.p);
    let hitting = hitting_time_table(&c.p)?;
    Ok(json!({
        "validation": report,
        "pi": c.pi.as_slice(),
        "pi_supplied": c.pi_supplied,
        "edges": graph.edges(),
        "acyclic": is_acyclic(&graph),
        "leaves": find_leaves(&graph),
        "hitting_times": hitting.expected,
    }))
}

fn variance(path: &Path, f: &str, tol: f64) -> Result<Value, CliError> {
    let c = load_chain(path, tol)?;
    let f = parse_vector(f)?;
    check_function(&f, c.p.n())?;
    let nu = asymptotic_variance(&f, &c.p, &c.pi)?;
    let g = center(&f, &c.pi)?;
    Ok(json!({
        "nu": nu,
        "mean": c.pi.expectation(&f)?,
        "iid_variance": pi_inner(&g, &g, &c.pi)?,
        "pi": c.pi.as_slice(),
    }))
}

fn perturb_cmd(path: &Path, epsilon: &str, out: Option<&Path>, tol: f64) -> Result<Value, CliError> {
    let c = load_chain(path, tol)?;
    let graph = support_graph(&c.p);
    let Some(cycle) = find_cycle(&graph) else {
        return Err(CliError::new(
            EXIT_PRECONDITION,
            "support graph is acyclic: there is no cycle to carry a circulation, and a reversible \
             chain on a tree admits no uniformly better kernel with the same stationary distribution",
        ));
    };
    let flow = cycle_flow(c.p.n(), &cycle)?;
    let max = max_epsilon(&c.p, &c.pi, &flow)?;
    let eps = if epsilon.trim() == "max" {
        max
    } else {
        epsilon
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::input(format!("epsilon `{epsilon}` is neither a number nor `max`")))?
    };
    let q = perturb(&c.p, &c.pi, &flow, eps)?;
    let verdict = dominance_compare(&q, &c.p, &c.pi)?;
    let chain = ChainFile::from_chain(&q, Some(&c.pi));
    if let Some(out) = out {
        std::fs::write(out, chain.to_json(true))
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", out.display())))?;
    }
    Ok(json!({
        "cycle": cycle,
        "epsilon": eps,
        "epsilon_max": max,
        "chain": chain,
        "verdict": verdict,
    }))
}

fn certify(
    path: &Path,
    candidate: Option<&Path>,
    budget: usize,
    seed: u64,
    tol: f64,
) -> Result<Value, CliError> {
    let c = load_chain(path, tol)?;
    let pre = check_preconditions(&c.p, &c.pi);
    if !pre.passed() {
        return Err(CliError::new(EXIT_PRECONDITION, format!("preconditions failed: {}", pre.failures.join("; "))));
    }
    match candidate {
        None => {
            let report = assert_unimprovable(&c.p, &c.pi, budget, seed)?;
            Ok(json!({ "preconditions": pre, "search": report }))
        }
        Some(cand_path) => {
            let file = read_chain_file(cand_path).map_err(CliError::input)?;
            let (q, _) = file.to_chain()?;
            let verdict = match dominance_compare(&q, &c.p, &c.pi) {
                Ok(v) => Some(v),
                Err(ChainError::Reducible) => None,
                Err(e) => return Err(e.into()),
            };
            let trace = peel_certify(&c.p, &q, &c.pi)?;
            Ok(json!({ "preconditions": pre, "dominance": verdict, "certificate": trace }))
        }
    }
}

fn simulate(
    path: &Path,
    f: &str,
    steps: usize,
    seed: u64,
    start: usize,
    batch_length: Option<usize>,
    tol: f64,
) -> Result<Value, CliError> {
    if steps < MIN_SIMULATION_STEPS {
        return Err(CliError::input(format!("need at least {MIN_SIMULATION_STEPS} steps, got {steps}")));
    }
    let c = load_chain(path, tol)?;
    let f = parse_vector(f)?;
    check_function(&f, c.p.n())?;
    let exact = asymptotic_variance(&f, &c.p, &c.pi)?;
    let path = sample_path(&c.p, start, steps, seed)?;
    let b = batch_length.unwrap_or_else(|| default_batch_length(steps));
    let est = batch_means_variance(&path, &f, b)?;
    let z = (est.standard_error > 0.0).then(|| (est.estimate - exact) / est.standard_error);
    Ok(json!({ "estimate": est, "exact_nu": exact, "z_score": z }))
}

fn generate(family: &str, n: usize, seed: u64, pretty: bool) -> Result<String, CliError> {
    let family: Family = family.parse()?;
    if family == Family::Metropolis {
        return Err(CliError::input("family must be one of path, star, cycle, random-tree"));
    }
    let (p, pi) = ChainSpecSeed { family, n, seed }.build()?;
    Ok(ChainFile::from_chain(&p, Some(&pi)).to_json(pretty))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_parsing() {
        assert_eq!(parse_vector("1,0,-1").unwrap(), vec![1.0, 0.0, -1.0]);
        assert_eq!(parse_vector("[1, 2.5]").unwrap(), vec![1.0, 2.5]);
        assert_eq!(parse_vector("/nonexistent/file").unwrap_err().code, EXIT_INPUT);
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(ChainError::Reducible).code, EXIT_REDUCIBLE);
        assert_eq!(CliError::from(ChainError::Preconditions("x".into())).code, EXIT_PRECONDITION);
        assert_eq!(CliError::from(ChainError::RepeatedState).code, EXIT_INPUT);
    }

    #[test]
    fn generate_rejects_unknown_family() {
        assert_eq!(generate("wheel", 4, 0, false).unwrap_err().code, EXIT_INPUT);
    }
}
