use rayon::prelude::*;

use super::path::{sample_path, BrownianPath};
use crate::combinatorics::ModelParams;
use crate::error::{ensure, Result};
use crate::norms::pairwise_sum;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n_samples`.
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Mean and standard error of `samples`, summed in fixed pairwise order.
    pub fn from_samples(samples: &[f64], seed: u64) -> Self {
        let stats = SampleStats::new(samples);
        Self {
            mean: stats.mean,
            std_error: (stats.variance / samples.len() as f64).sqrt(),
            n_samples: samples.len(),
            seed,
        }
    }

    /// Frequency estimate with the binomial standard error.
    pub fn frequency(hits: usize, n: usize, seed: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_samples: n,
            seed,
        }
    }

    /// `|self - other|` in units of the combined standard error.
    pub fn z_score(&self, other: &MCEstimate) -> f64 {
        (self.mean - other.mean).abs() / self.std_error.hypot(other.std_error)
    }
}

/// Sample moments, with the standard error of the sample variance from the
/// fourth central moment: `√((m4 - s⁴) / n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub variance_std_error: f64,
}

impl SampleStats {
    pub fn new(samples: &[f64]) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let mean = pairwise_sum(samples) / nf;
        let dev2: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let dev4: Vec<f64> = dev2.iter().map(|x| x * x).collect();
        let m2 = pairwise_sum(&dev2) / nf;
        let m4 = pairwise_sum(&dev4) / nf;
        let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
        Self {
            n,
            mean,
            variance,
            variance_std_error: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        }
    }
}

/// Evaluates `f` on paths `0..n_paths` of the family keyed by `seed`, in
/// parallel, returning the values in path order.
pub fn map_paths<F>(params: &ModelParams, steps: usize, seed: u64, n_paths: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&BrownianPath) -> Result<f64> + Sync,
{
    ensure(n_paths >= 1, || "n_paths >= 1".to_string())?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|index| {
            let path = sample_path(params, steps, seed, index)?;
            f(&path)
        })
        .collect()
}

/// Like [`map_paths`] but `f` returns several values per path.
pub fn map_paths_multi<F>(
    params: &ModelParams,
    steps: usize,
    seed: u64,
    n_paths: usize,
    f: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&BrownianPath) -> Result<Vec<f64>> + Sync,
{
    ensure(n_paths >= 1, || "n_paths >= 1".to_string())?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|index| {
            let path = sample_path(params, steps, seed, index)?;
            f(&path)
        })
        .collect()
}

/// Number of grid steps meeting `Δt <= ε/10`: `ceil(10 T / ε)`.
pub fn default_steps(horizon: f64, epsilon: f64) -> usize {
    let m = 10.0 * horizon / epsilon;
    // tolerate decimal noise such as 10 / 0.01 = 999.9999999999999
    let r = m.round();
    if (m - r).abs() <= 1e-9 * r {
        r as usize
    } else {
        m.ceil() as usize
    }
    .max(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_small_sample() {
        let s = SampleStats::new(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        let e = MCEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 9);
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(e.seed, 9);
    }

    #[test]
    fn steps_rule() {
        assert_eq!(default_steps(1.0, 0.01), 1000);
        assert_eq!(default_steps(1.0, 0.04), 250);
        assert_eq!(default_steps(1.0, 0.003), 3334);
    }
}
