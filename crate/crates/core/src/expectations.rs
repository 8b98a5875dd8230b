//! Expectations of regularized self-intersection local times.
//!
//! Only the order-0 chaos coefficient contributes to the mean, so every
//! expectation reduces to the one-dimensional lag integral
//! `(2π)^{-d/2} ∫ (T-τ) (ε+τ)^{-d/2} dτ` over the admitted lags.

use std::f64::consts::PI;

use crate::combinatorics::ModelParams;
use crate::error::{ensure, Result, SiltError};

/// How the delta function or the time simplex is regularized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegularizationSpec {
    /// Mollify with a centered Gaussian of variance `epsilon`.
    Gaussian { epsilon: f64 },
    /// Drop the strip `t2 - t1 < lambda` from the time simplex.
    Gap { lambda: f64 },
    /// Zero every chaos kernel on `v - u < lambda`.
    Cut { lambda: f64 },
    /// Gaussian mollifier on the gapped simplex.
    Combined { epsilon: f64, lambda: f64 },
}

impl RegularizationSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Gap { .. } => "gap",
            Self::Cut { .. } => "cut",
            Self::Combined { .. } => "combined",
        }
    }

    /// Mollifier variance; zero for the variants without one.
    pub fn epsilon(&self) -> f64 {
        match *self {
            Self::Gaussian { epsilon } | Self::Combined { epsilon, .. } => epsilon,
            _ => 0.0,
        }
    }

    /// Gap width; zero for the pure Gaussian variant.
    pub fn lambda(&self) -> f64 {
        match *self {
            Self::Gap { lambda } | Self::Cut { lambda } | Self::Combined { lambda, .. } => lambda,
            Self::Gaussian { .. } => 0.0,
        }
    }

    /// Checks the parameters against a horizon. A Gaussian variance of zero
    /// is let through here; operations that need `ε > 0` check it themselves.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let eps = self.epsilon();
        let lam = self.lambda();
        ensure(eps.is_finite() && eps >= 0.0, || {
            format!("epsilon must be finite and >= 0, got {eps}")
        })?;
        ensure(lam.is_finite() && lam >= 0.0, || {
            format!("lambda must be finite and >= 0, got {lam}")
        })?;
        if let Self::Combined { epsilon, .. } = self {
            ensure(*epsilon > 0.0, || "combined regularization needs epsilon > 0".into())?;
        }
        if !matches!(self, Self::Gaussian { .. }) {
            ensure(lam > 0.0, || format!("{} regularization needs lambda > 0", self.name()))?;
            ensure(lam < horizon, || {
                format!("lambda must be < T = {horizon}, got {lam}")
            })?;
        }
        Ok(())
    }
}

/// `∫ s^{-q} ds` between `lo` and `hi`, grouped to limit cancellation.
fn power_integral(q: f64, lo: f64, hi: f64) -> f64 {
    if q == 1.0 {
        (hi / lo).ln()
    } else {
        let e = 1.0 - q;
        if lo == 0.0 {
            hi.powf(e) / e
        } else {
            lo.powf(e) * ((e * (hi / lo).ln()).exp_m1()) / e
        }
    }
}

/// `(2π)^{-d/2} ∫_{lag_min}^{T} (T-τ)(ε+τ)^{-d/2} dτ` in closed form.
fn lag_integral(params: &ModelParams, epsilon: f64, lag_min: f64) -> Result<f64> {
    let t = params.horizon();
    let q = params.half_dim();
    let lo = epsilon + lag_min;
    let hi = epsilon + t;
    if lag_min >= t {
        return Ok(0.0);
    }
    if lo == 0.0 && q >= 1.0 {
        return Err(SiltError::Divergent(format!(
            "lag integral diverges at zero lag for d = {}",
            params.dim()
        )));
    }
    // T - τ = (T + ε) - s with s = ε + τ
    let value = hi * power_integral(q, lo, hi) - power_integral(q - 1.0, lo, hi);
    Ok(value * (2.0 * PI).powf(-q))
}

/// Mean of the Gaussian-regularized local time `L_ε`.
///
/// `ε = 0` is admitted for `d = 1`, where the unregularized mean is finite.
pub fn expected_gaussian_lt(params: &ModelParams, epsilon: f64) -> Result<f64> {
    ensure(epsilon.is_finite() && epsilon >= 0.0, || {
        format!("epsilon must be finite and >= 0, got {epsilon}")
    })?;
    if params.dim() >= 2 && epsilon == 0.0 {
        return Err(SiltError::Precondition(format!(
            "epsilon = 0 diverges for d = {} (needs epsilon > 0)",
            params.dim()
        )));
    }
    lag_integral(params, epsilon, 0.0)
}

/// Mean of the gap-regularized local time `L(Λ)`. At `Λ = T` the domain is
/// empty and the value is zero.
pub fn expected_gap_lt(params: &ModelParams, lambda: f64) -> Result<f64> {
    let t = params.horizon();
    ensure(lambda.is_finite() && lambda > 0.0 && lambda <= t, || {
        format!("gap lambda must lie in (0, T = {t}], got {lambda}")
    })?;
    lag_integral(params, 0.0, lambda)
}

/// Mean of the local time with both a Gaussian mollifier and a gap.
pub fn expected_combined_lt(params: &ModelParams, epsilon: f64, lambda: f64) -> Result<f64> {
    let t = params.horizon();
    ensure(epsilon.is_finite() && epsilon >= 0.0, || {
        format!("epsilon must be finite and >= 0, got {epsilon}")
    })?;
    ensure(lambda.is_finite() && (0.0..=t).contains(&lambda), || {
        format!("lambda must lie in [0, T = {t}], got {lambda}")
    })?;
    if params.dim() >= 2 && epsilon == 0.0 && lambda == 0.0 {
        return Err(SiltError::Precondition(
            "epsilon and lambda both zero diverges for d >= 2".into(),
        ));
    }
    lag_integral(params, epsilon, lambda)
}

/// Dispatches on the regularization. The cut variant only modifies chaos
/// kernels of order one and higher, so it has no time-integral mean and is
/// rejected.
pub fn expected_lt(params: &ModelParams, reg: &RegularizationSpec) -> Result<f64> {
    reg.validate(params.horizon())?;
    match *reg {
        RegularizationSpec::Gaussian { epsilon } => expected_gaussian_lt(params, epsilon),
        RegularizationSpec::Gap { lambda } => expected_gap_lt(params, lambda),
        RegularizationSpec::Combined { epsilon, lambda } => {
            expected_combined_lt(params, epsilon, lambda)
        }
        RegularizationSpec::Cut { .. } => Err(SiltError::Precondition(
            "cut regularization acts on chaos kernels only; it has no order-0 mean".into(),
        )),
    }
}

/// Smallest `k >= 0` with `E(L(Λ)) <= k + (T/2π)|ln Λ|` in two dimensions.
pub fn divergence_constant_k(params: &ModelParams, lambda: f64) -> Result<f64> {
    ensure(params.dim() == 2, || {
        format!("divergence constant is defined for d = 2, got d = {}", params.dim())
    })?;
    ensure(lambda > 0.0 && lambda < 1.0, || {
        format!("lambda must lie in (0, 1), got {lambda}")
    })?;
    let t = params.horizon();
    ensure(lambda < t, || format!("lambda must be < T = {t}, got {lambda}"))?;
    Ok(((t * t.ln() - t + lambda) / (2.0 * PI)).max(0.0))
}
