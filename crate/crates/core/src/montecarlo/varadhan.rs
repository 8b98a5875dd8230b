use std::f64::consts::PI;

use super::estimate::{default_steps, map_paths, MCEstimate};
use super::estimators::{centered_lt, gaussian_lt};
use crate::combinatorics::ModelParams;
use crate::error::{ensure, Result, SiltError};
use crate::expectations::RegularizationSpec;

/// Largest weight `exp(-g L)` accepted before reporting overflow.
pub const WEIGHT_LIMIT: f64 = 1e300;

/// Parameters of the lower-tail estimate `P(L_c <= -N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailExperiment {
    /// Threshold `N`.
    pub threshold: f64,
    /// Coupling `g` of the partition function this tail controls.
    pub g: f64,
    /// Rate `α ∈ (0, 2π/T)`.
    pub alpha: f64,
    /// Divergence constant `k`.
    pub k: f64,
    /// Rate constant `K` of `‖L_c - L(Λ)‖² <= K Λ ln²Λ`.
    pub big_k: f64,
}

impl TailExperiment {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let limit = 2.0 * PI / params.horizon();
        ensure(self.alpha > 0.0 && self.alpha < limit, || {
            format!("0 < alpha < 2π/T = {limit} (got {})", self.alpha)
        })?;
        ensure(self.threshold > self.k, || {
            format!("N > k (got N = {}, k = {})", self.threshold, self.k)
        })?;
        ensure(self.k >= 0.0 && self.big_k >= 0.0, || {
            format!("k, K >= 0 (got k = {}, K = {})", self.k, self.big_k)
        })?;
        Ok(())
    }

    /// `Λ = exp(-α(N - k))`.
    pub fn lambda(&self) -> f64 {
        (-self.alpha * (self.threshold - self.k)).exp()
    }
}

/// Both forms of the Chebyshev bound on `P(L_c <= -N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevBound {
    pub lambda: f64,
    /// `K α² / (1 - Tα/2π)² · exp(-α(N - k))`.
    pub bound: f64,
    /// `K Λ ln²Λ / (N - k - (T/2π)|ln Λ|)²`, before substituting `Λ`.
    pub intermediate: f64,
}

pub fn chebyshev_tail_bound(exp: &TailExperiment, params: &ModelParams) -> Result<ChebyshevBound> {
    exp.validate(params)?;
    let t = params.horizon();
    let lambda = exp.lambda();
    let excess = exp.threshold - exp.k;
    let shrink = 1.0 - t * exp.alpha / (2.0 * PI);
    let bound = exp.big_k * exp.alpha * exp.alpha / (shrink * shrink) * (-exp.alpha * excess).exp();
    let l = lambda.ln();
    let denom = excess - t / (2.0 * PI) * l.abs();
    let intermediate = exp.big_k * lambda * l * l / (denom * denom);
    Ok(ChebyshevBound {
        lambda,
        bound,
        intermediate,
    })
}

fn mollified(reg: &RegularizationSpec) -> Result<f64> {
    match *reg {
        RegularizationSpec::Gaussian { epsilon } | RegularizationSpec::Combined { epsilon, .. }
            if epsilon > 0.0 =>
        {
            Ok(epsilon)
        }
        _ => Err(SiltError::Precondition(format!(
            "Monte Carlo needs a Gaussian mollifier with epsilon > 0 (got {} regularization)",
            reg.name()
        ))),
    }
}

/// Centered local times of paths `0..n_paths`, on the grid `Δt = ε/10`.
pub fn centered_samples(
    params: &ModelParams,
    reg: &RegularizationSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    reg.validate(params.horizon())?;
    let eps = mollified(reg)?;
    let steps = default_steps(params.horizon(), eps);
    map_paths(params, steps, seed, n_paths, |path| centered_lt(path, reg, params))
}

/// Frequencies of `{L_c <= -N}` for several thresholds from one batch of
/// paths.
pub fn empirical_tail_curve(
    params: &ModelParams,
    reg: &RegularizationSpec,
    thresholds: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    ensure(params.dim() == 2, || format!("d = 2 (got d = {})", params.dim()))?;
    ensure(n_paths >= 10_000, || format!("n_paths >= 10^4 (got {n_paths})"))?;
    let samples = centered_samples(params, reg, n_paths, seed)?;
    Ok(thresholds
        .iter()
        .map(|&n| {
            let hits = samples.iter().filter(|&&x| x <= -n).count();
            MCEstimate::frequency(hits, n_paths, seed)
        })
        .collect())
}

/// Frequency of `{L_c <= -N}` with its binomial standard error.
pub fn empirical_tail(
    params: &ModelParams,
    reg: &RegularizationSpec,
    threshold: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MCEstimate> {
    Ok(empirical_tail_curve(params, reg, &[threshold], n_paths, seed)?[0])
}

/// Whether `g` is at or beyond the integrability limit `2π/T` in `d = 2`.
pub fn is_supercritical(params: &ModelParams, g: f64) -> bool {
    params.dim() == 2 && g >= 2.0 * PI / params.horizon()
}

/// Monte Carlo estimate of `Z = E exp(-g L)`.
///
/// In `d = 2`, `L` is the centered local time; in `d = 1` it is the
/// uncentered regularized local time, so every weight lies in `(0, 1]`.
/// Couplings `g >= 2π/T` are accepted (see [`is_supercritical`]). A weight
/// above [`WEIGHT_LIMIT`] is reported as [`SiltError::Overflow`].
pub fn partition_estimate(
    params: &ModelParams,
    g: f64,
    reg: &RegularizationSpec,
    n_paths: usize,
    seed: u64,
) -> Result<MCEstimate> {
    let d = params.dim();
    ensure(d == 1 || d == 2, || format!("d in {{1, 2}} (got d = {d})"))?;
    ensure(g.is_finite() && g >= 0.0, || format!("g >= 0 (got {g})"))?;
    ensure(n_paths >= 2, || format!("n_paths >= 2 (got {n_paths})"))?;
    reg.validate(params.horizon())?;
    let eps = mollified(reg)?;
    if g == 0.0 {
        return Ok(MCEstimate {
            mean: 1.0,
            std_error: 0.0,
            n_samples: n_paths,
            seed,
        });
    }
    let steps = default_steps(params.horizon(), eps);
    let weights = map_paths(params, steps, seed, n_paths, |path| {
        let l = if d == 2 {
            centered_lt(path, reg, params)?
        } else {
            gaussian_lt(path, eps, reg.lambda())?
        };
        let w = (-g * l).exp();
        if !(w <= WEIGHT_LIMIT) {
            return Err(SiltError::Overflow(format!(
                "exp(-g L) = exp({:e}) exceeds {WEIGHT_LIMIT:e}",
                -g * l
            )));
        }
        Ok(w)
    })?;
    Ok(MCEstimate::from_samples(&weights, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> ModelParams {
        ModelParams::new(2, 1.0, 1).unwrap()
    }

    #[test]
    fn spot_value() {
        let e = TailExperiment {
            threshold: 2.0,
            g: 1.0,
            alpha: PI,
            k: 0.0,
            big_k: 1.0,
        };
        let b = chebyshev_tail_bound(&e, &p2()).unwrap();
        let target = 4.0 * PI * PI * (-2.0 * PI).exp();
        assert!((b.bound - target).abs() <= 1e-12 * target);
        assert!((b.intermediate - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn alpha_at_limit_rejected() {
        let e = TailExperiment {
            threshold: 2.0,
            g: 1.0,
            alpha: 2.0 * PI,
            k: 0.0,
            big_k: 1.0,
        };
        assert!(chebyshev_tail_bound(&e, &p2()).is_err());
    }

    #[test]
    fn zero_coupling_is_one() {
        let z = partition_estimate(&p2(), 0.0, &RegularizationSpec::Gaussian { epsilon: 0.05 }, 10, 1)
            .unwrap();
        assert_eq!(z.mean, 1.0);
        assert_eq!(z.std_error, 0.0);
    }

    #[test]
    fn gap_only_rejected() {
        let e = partition_estimate(&p2(), 1.0, &RegularizationSpec::Gap { lambda: 0.1 }, 10, 1);
        assert!(matches!(e, Err(SiltError::Precondition(_))));
    }
}
