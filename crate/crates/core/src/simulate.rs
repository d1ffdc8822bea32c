//! Trajectory sampling and batch-means estimates of the asymptotic variance.
//!
//! Paths are driven by ChaCha8 seeded through `seed_from_u64`, so a seed
//! determines the path on every platform.

use rand::Rng;
use serde::Serialize;

use crate::chain::TransitionMatrix;
use crate::error::{ChainError, Result};
use crate::generators::seeded_rng;

/// Fraction of the path discarded before batching.
pub const BURN_IN_FRACTION: f64 = 0.1;
pub const MIN_BATCHES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub estimate: f64,
    /// Zero only when every batch mean coincides.
    pub standard_error: f64,
    pub batches: usize,
    pub batch_length: usize,
    /// Number of path values supplied (including burn-in).
    pub steps: usize,
}

/// `steps` transitions from `start`; the result has `steps + 1` states.
pub fn sample_path(p: &TransitionMatrix, start: usize, steps: usize, seed: u64) -> Result<Vec<usize>> {
    p.check_state(start)?;
    if steps == 0 {
        return Err(ChainError::InvalidArgument("steps must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = p.to_rows();
    let mut rng = seeded_rng(seed);
    let mut path = Vec::with_capacity(steps + 1);
    let mut state = start;
    path.push(state);
    for _ in 0..steps {
        state = draw(&rows[state], rng.gen::<f64>());
        path.push(state);
    }
    Ok(path)
}

/// Inverse-CDF draw; falls back to the last positive entry when round-off
/// leaves the cumulative sum just below `u`.
fn draw(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in row.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Default batch length `⌊√steps⌋`.
pub fn default_batch_length(steps: usize) -> usize {
    ((steps as f64).sqrt().floor() as usize).max(1)
}

/// Batch-means estimate of `ν(f)` from one path.
///
/// The first 10% of the path is discarded; the rest is cut into full batches.
/// The estimate is `batch_length` times the sample variance of the batch
/// means, and its standard error uses the chi-square scaling
/// `estimate · √(2 / (batches − 1))`.
pub fn batch_means_variance(path: &[usize], f: &[f64], batch_length: usize) -> Result<VarianceEstimate> {
    if batch_length == 0 {
        return Err(ChainError::InvalidArgument("batch length must be positive".into()));
    }
    if path.len() < 2 * batch_length {
        return Err(ChainError::InsufficientData(format!(
            "path of length {} is shorter than two batches of {batch_length}",
            path.len()
        )));
    }
    if let Some(&bad) = path.iter().find(|&&s| s >= f.len()) {
        return Err(ChainError::InvalidState { index: bad, n: f.len() });
    }
    let burn = (path.len() as f64 * BURN_IN_FRACTION).floor() as usize;
    let kept = &path[burn..];
    let batches = kept.len() / batch_length;
    if batches < MIN_BATCHES {
        return Err(ChainError::InsufficientData(format!(
            "{batches} batches of length {batch_length}; need at least {MIN_BATCHES}"
        )));
    }
    let means: Vec<f64> = kept
        .chunks_exact(batch_length)
        .map(|chunk| chunk.iter().map(|&s| f[s]).sum::<f64>() / batch_length as f64)
        .collect();
    let a = means.len() as f64;
    let grand = means.iter().sum::<f64>() / a;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (a - 1.0);
    let estimate = batch_length as f64 * var;
    let standard_error = estimate * (2.0 / (a - 1.0)).sqrt();
    Ok(VarianceEstimate {
        estimate,
        standard_error,
        batches,
        batch_length,
        steps: path.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::cycle_chain;

    fn rotation() -> TransitionMatrix {
        TransitionMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn deterministic_paths() {
        assert_eq!(sample_path(&rotation(), 0, 3, 5).unwrap(), vec![0, 1, 2, 0]);
        let flip = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(sample_path(&flip, 0, 4, 0).unwrap(), vec![0, 1, 0, 1, 0]);
    }

    #[test]
    fn seeded_reproducibility() {
        let (p, _) = cycle_chain(5).unwrap();
        let a = sample_path(&p, 2, 500, 11).unwrap();
        assert_eq!(a, sample_path(&p, 2, 500, 11).unwrap());
        assert_ne!(a, sample_path(&p, 2, 500, 12).unwrap());
        assert!(sample_path(&p, 9, 10, 0).is_err());
        assert!(sample_path(&p, 0, 0, 0).is_err());
    }

    #[test]
    fn constant_function_has_zero_variance() {
        let (p, _) = cycle_chain(3).unwrap();
        let path = sample_path(&p, 0, 10_000, 1).unwrap();
        let est = batch_means_variance(&path, &[2.5; 3], 100).unwrap();
        assert!(est.estimate.abs() < 1e-20);
        assert!(est.standard_error.abs() < 1e-20);
    }

    #[test]
    fn rejects_short_paths() {
        let path = vec![0usize; 100];
        assert!(matches!(
            batch_means_variance(&path, &[1.0], 60),
            Err(ChainError::InsufficientData(_))
        ));
        assert!(matches!(
            batch_means_variance(&path, &[1.0], 12),
            Err(ChainError::InsufficientData(_))
        ));
        assert!(batch_means_variance(&path, &[1.0], 10).is_ok());
    }
}
