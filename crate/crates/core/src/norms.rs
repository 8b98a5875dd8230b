//! L² norms of chaos kernels and the series built from them.
//!
//! For a kernel of order `2n` that depends only on `u = min` and `v = max`
//! of its arguments, the `2n - 2` inner arguments integrate out:
//!
//! `‖f‖² = ∫∫_{0<u<v<T} 2n(2n-1) (v-u)^{2n-2} f(u,v)² du dv`.
//!
//! Summing `(2𝐧)! ‖f/𝐧!‖²` over all multi-indices of total order `n` gives
//! `chaos_weight(d, n) · ‖f‖²`, which is how every series here is assembled.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::combinatorics::{chaos_weight_f64, chaos_weight_scaled, ModelParams};
use crate::error::{ensure, Result, SiltError};
use crate::expectations::{expected_gap_lt, expected_gaussian_lt, RegularizationSpec};
use crate::kernels::{self, KernelKind, Profile};
use crate::quadrature::{self, Anchor, QuadOptions};

/// Largest order accepted by the series routines.
pub const MAX_ORDER: u32 = 40;

const NORM_TOL: f64 = 1e-10;

/// One order of a chaos series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderTerm {
    pub n: u32,
    /// `Σ_{|𝐧|=n} (2𝐧)! ‖kernel_𝐧‖²`.
    pub contribution: f64,
    /// Term of the explicit majorant series, where one exists.
    pub majorant: Option<f64>,
}

/// Squared chaos distance between the truncated local time and its gap
/// regularization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosDistance {
    pub lambda: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub per_order: Vec<OrderTerm>,
    pub total: f64,
    /// Upper bound on the orders above `n_max`.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub lambda: f64,
    pub distance: f64,
    /// `distance / (T Λ ln²Λ)`.
    pub ratio: f64,
    pub truncation_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub horizon: f64,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Largest over smallest ratio.
    pub fn ratio_spread(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
        let min = self.rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max)
    }

    /// The boundedness predicate: spread of the ratio column at most `limit`.
    pub fn is_bounded(&self, limit: f64) -> bool {
        self.ratio_spread() <= limit
    }
}

/// Truncated variance series of a centered regularized local time.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSeries {
    pub per_order: Vec<OrderTerm>,
    pub total: f64,
    /// Geometric extrapolation of the omitted orders from the last two
    /// terms; `None` when they do not decrease. An estimate, not a bound.
    pub tail_estimate: Option<f64>,
}

fn check_norm_dim(d: usize) -> Result<()> {
    if d >= 3 {
        return Err(SiltError::Divergent(format!(
            "the strip integral of (v-u)^(2-d) diverges for d = {d}"
        )));
    }
    Ok(())
}

fn check_lambda(params: &ModelParams, lambda: f64) -> Result<()> {
    let t = params.horizon();
    ensure(lambda.is_finite() && lambda > 0.0 && lambda < t / 2.0, || {
        format!("0 < lambda < T/2 (got lambda = {lambda}, T = {t})")
    })
}

fn unit_breaks() -> Vec<f64> {
    quadrature::geometric_breaks(0.0, 1.0, Anchor::Lower, 0.0, 1e-14)
}

/// `‖n! ρ_{2𝐧}‖²` for any `𝐧` of total order `n`: the squared norm of the
/// order-`n` ρ profile with the `1/𝐧!` factor removed. Multiply by
/// `chaos_weight(d, n)` to get the order-`n` term of the chaos distance.
///
/// The strip `v - u < Λ` is split into the interior, where ρ is a function
/// of `v - u` alone, and the two end regions `v < Λ` and `u > T - Λ`, which
/// are mirror images of each other.
pub fn rho_l2_norm_sq(n: u32, params: &ModelParams, lambda: f64) -> Result<f64> {
    let d = params.dim();
    ensure(n >= 1, || "n >= 1".to_string())?;
    ensure(2 * n as usize + 2 > d, || format!("2n > d - 2 (got n = {n}, d = {d})"))?;
    check_norm_dim(d)?;
    check_lambda(params, lambda)?;
    let t = params.horizon();
    let prof = Profile::for_order(d, n);
    let opts = QuadOptions::relative(NORM_TOL);

    // interior: u ranges over an interval of length T - 2Λ + w at fixed w
    let interior = quadrature::integrate_fn(
        |s| {
            let g = kernels::rho_unit_interior(&prof, n, s);
            (t - 2.0 * lambda + lambda * s) * g * g
        },
        &unit_breaks(),
        &opts,
    )?
    .value;

    let boundary = quadrature::integrate(
        |s| {
            let hi = 1.0 - s;
            let pts = quadrature::geometric_breaks(0.0, hi, Anchor::Lower, 0.0, s.max(1e-14));
            let r = quadrature::integrate_fn(
                |x| {
                    let b = kernels::rho_unit_boundary(&prof, n, x, s);
                    b * b
                },
                &pts,
                &QuadOptions::relative(NORM_TOL * 1e-2),
            )?;
            Ok(r.value)
        },
        &unit_breaks(),
        &opts,
    )?
    .value;

    let c = prof.rho_unit_coef();
    let dd = d as f64;
    let combinatorial = (2 * n * (2 * n - 1)) as f64;
    Ok(combinatorial
        * c
        * c
        * (lambda.powf(3.0 - dd) * interior + 2.0 * lambda.powf(4.0 - dd) * boundary))
}

/// Majorant of the order-`n` distance term from the pointwise ρ bound,
/// integrated over the strip: `(2π)^{-d} (cw/4ⁿ) 2n(2n-1) / ((p-1)(p-2))²`
/// times `∫_0^Λ T w^{2-d} dw`. Requires `p = n + d/2 > 2`.
fn power_majorant(d: usize, n: u64, horizon: f64, lambda: f64, scaled_weight: f64) -> f64 {
    let p = n as f64 + d as f64 / 2.0;
    let k = 1.0 / ((p - 1.0) * (p - 2.0));
    let strip = horizon * lambda.powf(3.0 - d as f64) / (3.0 - d as f64);
    (2.0 * PI).powf(-(d as f64)) * scaled_weight * (2 * n * (2 * n - 1)) as f64 * k * k * strip
}

/// Majorant of the `d = 2, n = 1` term from `|ρ₂| <= |ln(v-u)| / 4π`.
fn log_majorant(horizon: f64, lambda: f64) -> f64 {
    let l = lambda.ln();
    2.0 * horizon * lambda * (l * l - 2.0 * l + 2.0) / (16.0 * PI * PI)
}

fn order_majorant(d: usize, n: u32, horizon: f64, lambda: f64) -> Option<f64> {
    let p = n as f64 + d as f64 / 2.0;
    if d == 2 && n == 1 {
        Some(log_majorant(horizon, lambda))
    } else if p > 2.0 && lambda < 1.0 {
        Some(power_majorant(
            d,
            n as u64,
            horizon,
            lambda,
            chaos_weight_scaled(d, n as u64),
        ))
    } else {
        None
    }
}

/// Sum of the majorant series over all orders above `n_max`: terms to
/// `n_max + 10⁵` explicitly, the rest by `Σ_{n>M} 4/(n - 5/2)² <= 4/(M - 5/2)`.
fn majorant_tail(d: usize, n_max: u32, horizon: f64, lambda: f64) -> f64 {
    const EXPLICIT: u64 = 100_000;
    let start = n_max as u64 + 1;
    let end = start + EXPLICIT;
    let mut weight = chaos_weight_scaled(d, start);
    let mut sum = 0.0;
    for n in start..end {
        sum += power_majorant(d, n, horizon, lambda, weight);
        weight *= (d as f64 / 2.0 + n as f64) / (n as f64 + 1.0);
    }
    let strip = horizon * lambda.powf(3.0 - d as f64) / (3.0 - d as f64);
    let remainder = (2.0 * PI).powf(-(d as f64)) * strip * 4.4 / ((end - 1) as f64 - 2.5);
    sum + remainder
}

/// Squared chaos distance `‖L^{(2N)} - L^{(2N)}(Λ)‖²` summed over orders
/// `max(N, 1)..=n_max` (plus the order-0 mean shift when `N = 0`), with a
/// rigorous bound on the omitted orders.
pub fn chaos_distance_sq(params: &ModelParams, lambda: f64, n_max: u32) -> Result<ChaosDistance> {
    let d = params.dim();
    check_norm_dim(d)?;
    check_lambda(params, lambda)?;
    ensure(lambda < 1.0, || format!("lambda < 1 (got {lambda})"))?;
    let n_min = params.truncation() as u32;
    ensure(n_max >= n_min + 2, || {
        format!("n_max >= N + 2 (got n_max = {n_max}, N = {n_min})")
    })?;
    ensure(n_max <= MAX_ORDER, || {
        format!("n_max <= {MAX_ORDER} (got {n_max})")
    })?;
    let t = params.horizon();
    let mut per_order = Vec::new();
    if n_min == 0 {
        let shift = expected_gaussian_lt(params, 0.0)? - expected_gap_lt(params, lambda)?;
        per_order.push(OrderTerm {
            n: 0,
            contribution: shift * shift,
            majorant: None,
        });
    }
    let orders: Vec<u32> = (n_min.max(1)..=n_max).collect();
    let norms: Vec<Result<f64>> = orders
        .par_iter()
        .map(|&n| rho_l2_norm_sq(n, params, lambda))
        .collect();
    for (&n, norm) in orders.iter().zip(norms) {
        per_order.push(OrderTerm {
            n,
            contribution: chaos_weight_f64(d, n) * norm?,
            majorant: order_majorant(d, n, t, lambda),
        });
    }
    let total = pairwise_sum(&per_order.iter().map(|o| o.contribution).collect::<Vec<_>>());
    Ok(ChaosDistance {
        lambda,
        n_min,
        n_max,
        per_order,
        total,
        truncation_bound: majorant_tail(d, n_max, t, lambda),
    })
}

/// Tabulates `D(Λ) / (T Λ ln²Λ)` over a strictly decreasing grid of at
/// least five gap widths spanning at least two decades.
pub fn rate_verification(params: &ModelParams, lambdas: &[f64], n_max: u32) -> Result<RateTable> {
    let t = params.horizon();
    ensure(lambdas.len() >= 5, || {
        format!("at least 5 lambdas (got {})", lambdas.len())
    })?;
    ensure(lambdas.windows(2).all(|w| w[1] < w[0]), || {
        "lambdas strictly decreasing".to_string()
    })?;
    ensure(
        lambdas.iter().all(|&l| l > 0.0 && l < t / 2.0),
        || format!("every lambda in (0, T/2) with T = {t}"),
    )?;
    let first = lambdas[0];
    let last = lambdas[lambdas.len() - 1];
    ensure(first / last >= 100.0 * (1.0 - 1e-12), || {
        format!("lambdas span at least two decades (got {first} .. {last})")
    })?;
    let rows: Vec<Result<RateRow>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let dist = chaos_distance_sq(params, lambda, n_max)?;
            let l = lambda.ln();
            Ok(RateRow {
                lambda,
                distance: dist.total,
                ratio: dist.total / (t * lambda * l * l),
                truncation_bound: dist.truncation_bound,
            })
        })
        .collect();
    Ok(RateTable {
        horizon: t,
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// `‖f‖²` over the whole simplex for the order-`n` profile of `kind`.
fn simplex_norm_sq(kind: KernelKind, d: usize, n: u32, t: f64) -> Result<f64> {
    let (scale, kinks) = match kind {
        KernelKind::PhiEps { epsilon } => (epsilon, vec![]),
        KernelKind::Gap { lambda } | KernelKind::Cut { lambda } => (lambda, vec![lambda]),
        _ => (0.0, vec![]),
    };
    let lam = match kind {
        KernelKind::Gap { lambda } => Some(lambda),
        _ => None,
    };
    let near_zero = if scale > 0.0 {
        quadrature::geometric_breaks(0.0, t, Anchor::Lower, scale, scale)
    } else {
        quadrature::geometric_breaks(0.0, t, Anchor::Lower, 0.0, 1e-14 * t)
    };
    let w_pts = quadrature::merge_breaks(0.0, t, &[near_zero, kinks]);
    let inner_tol = QuadOptions::relative(NORM_TOL * 1e-2).with_abs(1e-300);
    let res = quadrature::integrate(
        |w| {
            let hi = t - w;
            let mut cuts = vec![];
            if let Some(l) = lam {
                if w < l {
                    cuts.push(l - w);
                    cuts.push(t - l);
                }
            }
            let pts = quadrature::merge_breaks(0.0, hi, &[cuts]);
            let r = quadrature::integrate_fn(
                |u| {
                    let h = kernels::scaled_profile(kind, d, n, t, u, u + w);
                    h * h
                },
                &pts,
                &inner_tol,
            )?;
            Ok(r.value)
        },
        &w_pts,
        &QuadOptions::relative(NORM_TOL).with_abs(1e-300),
    )?;
    Ok((2 * n * (2 * n - 1)) as f64 * res.value)
}

/// Truncated chaos series `Σ_{n=1}^{n_max} chaos_weight(d,n) ‖f_n‖²` for the
/// variance of the centered regularized local time.
///
/// `d = 2` accepts the Gaussian (`ε > 0`) and gap regularizations. `d = 1`
/// additionally accepts `ε = 0` (no regularization) and the cut variant.
pub fn phi_centered_variance(
    params: &ModelParams,
    reg: &RegularizationSpec,
    n_max: u32,
) -> Result<ChaosSeries> {
    let d = params.dim();
    let t = params.horizon();
    if d >= 3 {
        return Err(SiltError::Precondition(format!(
            "variance series needs d in {{1, 2}} (got d = {d})"
        )));
    }
    ensure(n_max >= 3, || format!("n_max >= 3 (got {n_max})"))?;
    ensure(n_max <= MAX_ORDER, || format!("n_max <= {MAX_ORDER} (got {n_max})"))?;
    reg.validate(t)?;
    let kind = match *reg {
        RegularizationSpec::Gaussian { epsilon } => {
            if epsilon > 0.0 {
                KernelKind::PhiEps { epsilon }
            } else if d == 1 {
                KernelKind::Phi
            } else {
                return Err(SiltError::Precondition(
                    "d = 2 variance needs epsilon > 0".into(),
                ));
            }
        }
        RegularizationSpec::Gap { lambda } => {
            ensure(lambda < t / 2.0, || format!("lambda < T/2 (got {lambda})"))?;
            KernelKind::Gap { lambda }
        }
        RegularizationSpec::Cut { lambda } if d == 1 => {
            ensure(lambda < t / 2.0, || format!("lambda < T/2 (got {lambda})"))?;
            KernelKind::Cut { lambda }
        }
        _ => {
            return Err(SiltError::Precondition(format!(
                "{} regularization is not supported for the d = {d} variance series",
                reg.name()
            )))
        }
    };
    let orders: Vec<u32> = (1..=n_max).collect();
    let norms: Vec<Result<f64>> = orders
        .par_iter()
        .map(|&n| simplex_norm_sq(kind, d, n, t))
        .collect();
    let mut per_order = Vec::with_capacity(orders.len());
    for (&n, norm) in orders.iter().zip(norms) {
        per_order.push(OrderTerm {
            n,
            contribution: chaos_weight_f64(d, n) * norm?,
            majorant: None,
        });
    }
    let values: Vec<f64> = per_order.iter().map(|o| o.contribution).collect();
    let total = pairwise_sum(&values);
    let last = values[values.len() - 1];
    let prev = values[values.len() - 2];
    let tail_estimate = if prev > 0.0 && last < prev {
        let r = last / prev;
        Some(last * r / (1.0 - r))
    } else {
        None
    };
    Ok(ChaosSeries {
        per_order,
        total,
        tail_estimate,
    })
}

/// Fixed-order pairwise summation.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::{KernelPoint, MultiIndex};

    fn params(d: usize, t: f64) -> ModelParams {
        ModelParams::with_minimal_truncation(d, t).unwrap()
    }

    #[test]
    fn unit_forms_match_rho_kernel() {
        let t = 1.0;
        let lambda = 0.1;
        for d in 1..=2usize {
            for n in 1..=4u32 {
                let index = MultiIndex::along_first_axis(d, n).unwrap();
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                for &(u, v) in &[(0.5, 0.53), (0.02, 0.07), (0.0, 0.01), (0.95, 0.99), (0.93, 1.0)] {
                    let p = KernelPoint::new(u, v).unwrap();
                    let exact = kernels::rho_kernel(&index, &params(d, t), lambda, &p).unwrap();
                    let w: f64 = v - u;
                    let scaled = kernels::scaled_profile(KernelKind::Rho { lambda }, d, n, t, u, v);
                    let expect = exact * fact * w.powi(n as i32 - 1);
                    assert!(
                        (scaled - expect).abs() <= 1e-8 * expect.abs() + 1e-300,
                        "d={d} n={n} u={u} v={v}: {scaled} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn scaled_gap_and_phi_match_kernels() {
        let t = 1.0;
        let lambda = 0.1;
        for d in 1..=2usize {
            for n in 1..=4u32 {
                let index = MultiIndex::along_first_axis(d, n).unwrap();
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                for &(u, v) in &[(0.5, 0.53), (0.02, 0.07), (0.01, 0.3), (0.95, 0.99), (0.2, 0.9)] {
                    let p = KernelPoint::new(u, v).unwrap();
                    let w: f64 = v - u;
                    let m = fact * w.powi(n as i32 - 1);
                    let cases = [
                        (KernelKind::Gap { lambda }, kernels::gap_kernel(&index, &params(d, t), lambda, &p).unwrap()),
                        (KernelKind::Phi, kernels::phi_kernel(&index, &params(d, t), &p).unwrap()),
                        (
                            KernelKind::PhiEps { epsilon: 0.03 },
                            kernels::phi_eps_kernel(&index, &params(d, t), 0.03, &p).unwrap(),
                        ),
                        (KernelKind::Cut { lambda }, kernels::cut_kernel(&index, &params(d, t), lambda, &p).unwrap()),
                    ];
                    for (kind, exact) in cases {
                        let scaled = kernels::scaled_profile(kind, d, n, t, u, v);
                        assert!(
                            (scaled - exact * m).abs() <= 1e-8 * (exact * m).abs() + 1e-300,
                            "{kind:?} d={d} n={n} u={u} v={v}: {scaled} vs {}",
                            exact * m
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn log_term_below_majorant() {
        let p = params(2, 1.0);
        let norm = rho_l2_norm_sq(1, &p, 0.01).unwrap();
        assert!(norm <= log_majorant(1.0, 0.01));
    }

    #[test]
    fn three_dimensions_diverge() {
        let p = params(3, 1.0);
        assert!(matches!(
            rho_l2_norm_sq(2, &p, 0.01),
            Err(SiltError::Divergent(_))
        ));
    }

    #[test]
    fn order_cap() {
        let p = params(2, 1.0);
        assert!(chaos_distance_sq(&p, 0.01, 41).is_err());
        assert!(chaos_distance_sq(&p, 0.01, 2).is_err());
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let xs: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }
}
