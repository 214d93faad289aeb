//! Monte Carlo collection and summary statistics.
//!
//! Every sample draws from its own counter-indexed stream, so results are
//! a pure function of `(master seed, sample index)` and identical across
//! thread counts and across the parallel and sequential drivers. Summaries
//! are computed sequentially over the ordered sample vector, which keeps
//! them bitwise reproducible.

use rand_chacha::ChaCha8Rng;

use crate::rng::sample_stream;

/// One side of an identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    /// Samples behind this estimate; zero for closed-form values.
    pub n: u64,
    /// Deterministic error allowance (discretization, truncation remainders,
    /// attribution). Statistical error is carried by `stderr`.
    pub bias_budget: f64,
}

impl EstimatorResult {
    pub fn from_values(values: &[f64], bias_budget: f64) -> Self {
        let (mean, stderr) = mean_stderr(values);
        Self { mean, stderr, n: values.len() as u64, bias_budget }
    }

    /// A closed-form side: no sampling error.
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0, n: 0, bias_budget: 0.0 }
    }

    pub fn with_bias(mut self, bias_budget: f64) -> Self {
        self.bias_budget = bias_budget;
        self
    }
}

/// Two-pass mean and standard error. A single sample has no dispersion
/// estimate and reports zero.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Collects `n` samples sequentially, one derived stream per index.
pub fn mc_collect_sequential<T, F>(n: u64, master_seed: u64, f: F) -> Vec<T>
where
    F: Fn(u64, &mut ChaCha8Rng) -> T,
{
    (0..n).map(|k| f(k, &mut sample_stream(master_seed, k))).collect()
}

/// Collects `n` samples, in parallel when the `parallel` feature is on.
/// Output order and content match the sequential driver exactly.
#[cfg(feature = "parallel")]
pub fn mc_collect<T, F>(n: u64, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(|k| f(k, &mut sample_stream(master_seed, k))).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn mc_collect<T, F>(n: u64, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    mc_collect_sequential(n, master_seed, f)
}

/// Mean estimate of a scalar sample function.
pub fn estimate<F>(n: u64, master_seed: u64, bias_budget: f64, f: F) -> EstimatorResult
where
    F: Fn(u64, &mut ChaCha8Rng) -> f64 + Sync,
{
    let values = mc_collect(n, master_seed, f);
    EstimatorResult::from_values(&values, bias_budget)
}

/// Splits a paired sample into per-side results plus the paired difference,
/// whose standard error is the right scale for paired identities.
pub fn paired_results(pairs: &[(f64, f64)]) -> (EstimatorResult, EstimatorResult, EstimatorResult) {
    let left: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let right: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    (
        EstimatorResult::from_values(&left, 0.0),
        EstimatorResult::from_values(&right, 0.0),
        EstimatorResult::from_values(&diff, 0.0),
    )
}
