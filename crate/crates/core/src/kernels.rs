//! Chaos kernels of the truncated and regularized local times.
//!
//! Every kernel of order `2n` depends on its arguments only through
//! `u = min` and `v = max`, and on the multi-index only through `n` and
//! `n!`. All of them are integrals of
//! `ψ(t1, t2) = (2π)^{-d/2} (-1/2)^n / n! · (t2 - t1)^{-(n + d/2)}`
//! over a region of `(t1, t2)` that contains `[u, v]`:
//!
//! | kernel | region                                   |
//! |--------|------------------------------------------|
//! | φ      | `(0, u) × (v, T)`                        |
//! | φ_ε    | same, with `t2 - t1` shifted by `ε`       |
//! | ρ      | `(0, u) × (v, T)` with `t2 - t1 < Λ`      |
//! | φ_Λ    | `(0, u) × (v, T)` with `t2 - t1 > Λ`      |
//! | cut    | φ on `v - u > Λ`, zero elsewhere          |

use std::f64::consts::PI;

use crate::combinatorics::{KernelPoint, ModelParams, MultiIndex};
use crate::error::{ensure, Result, SiltError};
use crate::quadrature::{self, Anchor, QuadOptions};

/// Subdivision budget shared by the cells of one oracle call.
pub const ORACLE_CELL_BUDGET: usize = 1_000_000;

/// Which kernel family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Phi,
    PhiEps { epsilon: f64 },
    Rho { lambda: f64 },
    Gap { lambda: f64 },
    Cut { lambda: f64 },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Phi => "phi",
            Self::PhiEps { .. } => "phi_eps",
            Self::Rho { .. } => "rho",
            Self::Gap { .. } => "gap",
            Self::Cut { .. } => "cut",
        }
    }
}

/// A kernel value together with where it was taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    /// Total order `n`; the kernel has `2n` arguments.
    pub order: u32,
    pub point: KernelPoint,
}

/// `(n, d)`-dependent constants of the kernel closed forms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Profile {
    /// `p = n + d/2`, the power of `1/(t2 - t1)` in ψ.
    pub p: f64,
    /// `2 - p`, the power in the doubly integrated closed forms.
    pub a: f64,
    /// `(2π)^{-d/2} (-1/2)^n / n!`.
    pub coef: f64,
    /// `p == 2`, i.e. `d = 2, n = 1`, where powers become logarithms.
    pub log: bool,
    half_d: f64,
}

impl Profile {
    /// Profile without the `1/n!` factor, indexed by total order only.
    pub(crate) fn for_order(d: usize, n: u32) -> Self {
        let p = n as f64 + d as f64 / 2.0;
        Self {
            p,
            a: 2.0 - p,
            coef: (2.0 * PI).powf(-(d as f64) / 2.0) * (-0.5f64).powi(n as i32),
            log: d == 2 && n == 1,
            half_d: d as f64 / 2.0,
        }
    }

    fn new(index: &MultiIndex, d: usize) -> Result<Self> {
        index.check_dim(d)?;
        let n = index.order();
        ensure(n >= 1, || {
            "kernel order n >= 1 (order 0 is the expectation)".to_string()
        })?;
        ensure(2 * n as usize + 2 > d, || {
            format!("2n > d - 2 (got n = {n}, d = {d})")
        })?;
        let mut prof = Self::for_order(d, n);
        prof.coef /= index.factorial_f64();
        Ok(prof)
    }

    /// Coefficient of the bracket in the φ closed form.
    fn phi_coef(&self) -> f64 {
        self.coef / ((self.p - 1.0) * (self.p - 2.0))
    }

    fn half_d(&self) -> f64 {
        self.half_d
    }

    /// Factor in front of [`rho_unit_interior`] and [`rho_unit_boundary`].
    pub(crate) fn rho_unit_coef(&self) -> f64 {
        if self.log {
            self.coef
        } else {
            self.coef / (self.p - 1.0)
        }
    }
}

/// `w^{n-1} ρ` in units of `rho_unit_coef · Λ^{1-d/2}`, interior case, as a
/// function of `s = w / Λ`.
pub(crate) fn rho_unit_interior(prof: &Profile, n: u32, s: f64) -> f64 {
    if prof.log {
        -(s.ln() + 1.0 - s)
    } else {
        let sn = s.powi(n as i32 - 1);
        (s.powf(1.0 - prof.half_d()) - sn) / (prof.p - 2.0) + sn * (s - 1.0)
    }
}

/// As [`rho_unit_interior`] for `v < Λ`, with `x = u / Λ`. The far end
/// `u > T - Λ` maps onto this case under `(u, v) -> (T - v, T - u)`.
pub(crate) fn rho_unit_boundary(prof: &Profile, n: u32, x: f64, s: f64) -> f64 {
    if prof.log {
        (x / s).ln_1p() - x
    } else {
        let sn = s.powi(n as i32 - 1);
        let ratio = (s / (x + s)).powi(n as i32 - 1);
        (s.powf(1.0 - prof.half_d()) - ratio * (x + s).powf(1.0 - prof.half_d())) / (prof.p - 2.0)
            - x * sn
    }
}

/// `(x - u)^a - x^a`, or `ln(x - u) - ln x` when `log`, without cancellation
/// for small `u / x`.
fn shift_difference(a: f64, log: bool, u: f64, x: f64) -> f64 {
    let l = (-u / x).ln_1p();
    if log {
        l
    } else {
        x.powf(a) * (a * l).exp_m1()
    }
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SiltError::Overflow(format!("{what} is not representable as f64")))
    }
}

fn check_point(point: &KernelPoint, params: &ModelParams) -> Result<()> {
    point.check_horizon(params.horizon())
}

fn check_lambda(lambda: f64, params: &ModelParams) -> Result<()> {
    let t = params.horizon();
    ensure(lambda.is_finite() && lambda > 0.0 && lambda < t / 2.0, || {
        format!("0 < lambda < T/2 (got lambda = {lambda}, T = {t})")
    })
}

/// Coefficient of the order-`2n` chaos term of `δ(B(t2) - B(t1))`; callers
/// apply the indicator `t1 <= u, v <= t2` themselves.
pub fn psi_coefficient(index: &MultiIndex, d: usize, t1: f64, t2: f64) -> Result<f64> {
    index.check_dim(d)?;
    ensure(t1 < t2, || format!("t1 < t2 (got t1 = {t1}, t2 = {t2})"))?;
    let n = index.order();
    let p = n as f64 + d as f64 / 2.0;
    let value = (2.0 * PI).powf(-(d as f64) / 2.0) * (-0.5f64).powi(n as i32)
        / index.factorial_f64()
        * (t2 - t1).powf(-p);
    finite(value, "psi coefficient")
}

/// Kernel `φ_{2n}` of the truncated local time.
pub fn phi_kernel(index: &MultiIndex, params: &ModelParams, point: &KernelPoint) -> Result<f64> {
    let prof = Profile::new(index, params.dim())?;
    check_point(point, params)?;
    phi_unchecked(&prof, params.horizon(), 0.0, point.u(), point.v())
}

fn phi_unchecked(prof: &Profile, t: f64, eps: f64, u: f64, v: f64) -> Result<f64> {
    if v - u + eps == 0.0 && prof.a <= 0.0 {
        return Err(SiltError::Precondition(format!(
            "u < v (kernel has a pole at u = v = {u})"
        )));
    }
    let bracket = shift_difference(prof.a, prof.log, u, v + eps)
        - shift_difference(prof.a, prof.log, u, t + eps);
    let value = if prof.log {
        -prof.coef * bracket
    } else {
        prof.phi_coef() * bracket
    };
    finite(value, "phi kernel")
}

/// Kernel `φ_{ε,2n}` of the Gaussian-regularized local time.
pub fn phi_eps_kernel(
    index: &MultiIndex,
    params: &ModelParams,
    epsilon: f64,
    point: &KernelPoint,
) -> Result<f64> {
    ensure(epsilon.is_finite() && epsilon > 0.0, || {
        format!("epsilon > 0 (got {epsilon})")
    })?;
    let prof = Profile::new(index, params.dim())?;
    check_point(point, params)?;
    phi_unchecked(&prof, params.horizon(), epsilon, point.u(), point.v())
}

/// Interior closed form of ρ for `w = v - u < Λ`.
fn rho_interior(prof: &Profile, lambda: f64, w: f64) -> f64 {
    if prof.log {
        -prof.coef * ((w / lambda).ln() + (lambda - w) / lambda)
    } else {
        let p = prof.p;
        prof.coef / (p - 1.0)
            * ((w.powf(prof.a) - lambda.powf(prof.a)) / (p - 2.0)
                + (w - lambda) * lambda.powf(1.0 - p))
    }
}

fn is_interior(t: f64, lambda: f64, u: f64, v: f64) -> bool {
    v >= lambda && u <= t - lambda
}

/// ρ near the origin, `v < Λ <= T - u`, where lags are cut by `t1 > 0`.
fn rho_near_origin(prof: &Profile, lambda: f64, u: f64, v: f64) -> f64 {
    let w = v - u;
    let l = (u / w).ln_1p();
    if prof.log {
        prof.coef * (l - u / lambda)
    } else {
        // w^a - v^a written through ln(v / w)
        let head = -w.powf(prof.a) * (prof.a * l).exp_m1();
        prof.coef / (prof.p - 1.0) * (head / (prof.p - 2.0) - u * lambda.powf(1.0 - prof.p))
    }
}

/// Kernel `ρ_{2n}`: φ restricted to lags `t2 - t1 < Λ`. Zero outside the
/// strip `v - u < Λ`. Points whose strip reaches past either end of `[0, T]`
/// use the clipped closed form; the far end mirrors the near one under
/// `(u, v) -> (T - v, T - u)`.
pub fn rho_kernel(
    index: &MultiIndex,
    params: &ModelParams,
    lambda: f64,
    point: &KernelPoint,
) -> Result<f64> {
    let prof = Profile::new(index, params.dim())?;
    check_lambda(lambda, params)?;
    check_point(point, params)?;
    rho_unchecked(&prof, params.horizon(), lambda, point.u(), point.v())
}

fn rho_unchecked(prof: &Profile, t: f64, lambda: f64, u: f64, v: f64) -> Result<f64> {
    let w = v - u;
    if w >= lambda {
        return Ok(0.0);
    }
    if w == 0.0 && prof.a <= 0.0 {
        return Err(SiltError::Precondition(format!(
            "u < v (kernel has a pole at u = v = {u})"
        )));
    }
    let value = if is_interior(t, lambda, u, v) {
        rho_interior(prof, lambda, w)
    } else if v < lambda {
        rho_near_origin(prof, lambda, u, v)
    } else {
        rho_near_origin(prof, lambda, t - v, t - u)
    };
    finite(value, "rho kernel")
}

/// φ - ρ near the origin, `v < Λ <= T - u`. The singular parts of the two
/// cancel exactly, leaving a form that is smooth in `v`.
fn gap_near_origin(prof: &Profile, t: f64, lambda: f64, u: f64) -> f64 {
    let l = (-u / t).ln_1p();
    if prof.log {
        prof.coef * (l + u / lambda)
    } else {
        -prof.phi_coef() * t.powf(prof.a) * (prof.a * l).exp_m1()
            + prof.coef / (prof.p - 1.0) * u * lambda.powf(1.0 - prof.p)
    }
}

/// Kernel `φ_{Λ,2n}` of the gap-regularized local time, `φ - Θ(Λ - w) ρ`.
/// Inside the strip the singular parts of φ and ρ are cancelled
/// analytically, so the value stays bounded as `v - u → 0`.
pub fn gap_kernel(
    index: &MultiIndex,
    params: &ModelParams,
    lambda: f64,
    point: &KernelPoint,
) -> Result<f64> {
    let prof = Profile::new(index, params.dim())?;
    check_lambda(lambda, params)?;
    check_point(point, params)?;
    gap_unchecked(&prof, params.horizon(), lambda, point.u(), point.v())
}

fn gap_unchecked(prof: &Profile, t: f64, lambda: f64, u: f64, v: f64) -> Result<f64> {
    let w = v - u;
    if w >= lambda {
        return phi_unchecked(prof, t, 0.0, u, v);
    }
    if v < lambda {
        return finite(gap_near_origin(prof, t, lambda, u), "gap kernel");
    }
    if u > t - lambda {
        return finite(gap_near_origin(prof, t, lambda, t - v), "gap kernel");
    }
    let value = if prof.log {
        prof.coef * (v.ln() + (t - u).ln() - t.ln() - lambda.ln() + (lambda - w) / lambda)
    } else {
        let a = prof.a;
        prof.phi_coef() * (t.powf(a) - v.powf(a) - (t - u).powf(a) + lambda.powf(a))
            - prof.coef / (prof.p - 1.0) * (w - lambda) * lambda.powf(1.0 - prof.p)
    };
    finite(value, "gap kernel")
}

/// Kernel of the cut regularization: φ where `v - u > Λ`, exactly zero
/// elsewhere (the Heaviside step is zero at the origin).
pub fn cut_kernel(
    index: &MultiIndex,
    params: &ModelParams,
    lambda: f64,
    point: &KernelPoint,
) -> Result<f64> {
    let prof = Profile::new(index, params.dim())?;
    check_lambda(lambda, params)?;
    check_point(point, params)?;
    if point.width() > lambda {
        phi_unchecked(&prof, params.horizon(), 0.0, point.u(), point.v())
    } else {
        Ok(0.0)
    }
}

/// Evaluates any kernel family at a point.
pub fn evaluate(
    kind: KernelKind,
    index: &MultiIndex,
    params: &ModelParams,
    point: &KernelPoint,
) -> Result<KernelValue> {
    let value = match kind {
        KernelKind::Phi => phi_kernel(index, params, point)?,
        KernelKind::PhiEps { epsilon } => phi_eps_kernel(index, params, epsilon, point)?,
        KernelKind::Rho { lambda } => rho_kernel(index, params, lambda, point)?,
        KernelKind::Gap { lambda } => gap_kernel(index, params, lambda, point)?,
        KernelKind::Cut { lambda } => cut_kernel(index, params, lambda, point)?,
    };
    Ok(KernelValue {
        value,
        order: index.order(),
        point: *point,
    })
}

/// Evaluates a kernel from its raw per-coordinate chaos orders `2n_i`.
/// Raw indices with an odd entry have no kernel and give exactly zero.
pub fn evaluate_raw(
    kind: KernelKind,
    raw: &[u32],
    params: &ModelParams,
    point: &KernelPoint,
) -> Result<KernelValue> {
    ensure(raw.len() == params.dim(), || {
        format!("raw index length equals d (got {}, d = {})", raw.len(), params.dim())
    })?;
    match MultiIndex::from_raw_even(raw) {
        Some(index) => evaluate(kind, &index, params, point),
        None => {
            check_point(point, params)?;
            Ok(KernelValue {
                value: 0.0,
                order: raw.iter().sum::<u32>(),
                point: *point,
            })
        }
    }
}

/// Right-hand side of the pointwise bound on `|ρ_{2n}(u, v)|`:
/// `|coef| / ((p-1)(p-2)) · (v-u)^{2-p}`, or `|ln(v-u)| / 4π` for the
/// logarithmic case. Requires `p > 2` outside that case (for `d = 1, n = 1`
/// the right-hand side is negative and bounds nothing) and
/// `v - u < min(Λ, 1)`, and `Λ < 1` in the logarithmic case.
pub fn rho_bound(index: &MultiIndex, d: usize, lambda: f64, point: &KernelPoint) -> Result<f64> {
    let prof = Profile::new(index, d)?;
    let w = point.width();
    ensure(w > 0.0, || format!("u < v (got u = v = {})", point.u()))?;
    ensure(w < lambda.min(1.0), || {
        format!("v - u < min(lambda, 1) (got v - u = {w}, lambda = {lambda})")
    })?;
    if prof.log {
        // for Λ >= 1 the bound can fail near the strip edge
        ensure(lambda < 1.0, || format!("lambda < 1 for the log bound (got {lambda})"))?;
        return Ok(w.ln().abs() / (4.0 * PI));
    }
    ensure(prof.p > 2.0, || {
        format!("n + d/2 > 2 for the power bound (got n = {}, d = {d})", index.order())
    })?;
    finite(prof.phi_coef().abs() * w.powf(prof.a), "rho bound")
}

/// An axis-aligned `(t1, t2)` rectangle, optionally cut by lag constraints
/// `min_lag < t2 - t1 < max_lag`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRectangle {
    pub t1_lo: f64,
    pub t1_hi: f64,
    pub t2_lo: f64,
    pub t2_hi: f64,
    pub min_lag: Option<f64>,
    pub max_lag: Option<f64>,
}

impl TimeRectangle {
    pub fn new(t1_lo: f64, t1_hi: f64, t2_lo: f64, t2_hi: f64) -> Result<Self> {
        ensure(t1_lo <= t1_hi && t2_lo <= t2_hi, || {
            format!("ordered rectangle bounds (got t1 in [{t1_lo}, {t1_hi}], t2 in [{t2_lo}, {t2_hi}])")
        })?;
        Ok(Self {
            t1_lo,
            t1_hi,
            t2_lo,
            t2_hi,
            min_lag: None,
            max_lag: None,
        })
    }

    /// Restricts to `t2 - t1 < lag` (the dark strip).
    pub fn with_max_lag(mut self, lag: f64) -> Self {
        self.max_lag = Some(lag);
        self
    }

    /// Restricts to `t2 - t1 > lag` (the light domain).
    pub fn with_min_lag(mut self, lag: f64) -> Self {
        self.min_lag = Some(lag);
        self
    }

    /// Domain defining φ at `point`: `(0, u) × (v, T)`.
    pub fn phi_domain(horizon: f64, point: &KernelPoint) -> Result<Self> {
        Self::new(0.0, point.u(), point.v(), horizon)
    }

    /// Domain defining ρ at `point`.
    pub fn rho_domain(horizon: f64, lambda: f64, point: &KernelPoint) -> Result<Self> {
        Ok(Self::phi_domain(horizon, point)?.with_max_lag(lambda))
    }

    /// Domain defining the gap kernel at `point`.
    pub fn light_domain(horizon: f64, lambda: f64, point: &KernelPoint) -> Result<Self> {
        Ok(Self::phi_domain(horizon, point)?.with_min_lag(lambda))
    }

    fn lag_range(&self, t1: f64) -> (f64, f64) {
        let mut lo = (self.t2_lo - t1).max(0.0);
        let mut hi = self.t2_hi - t1;
        if let Some(m) = self.min_lag {
            lo = lo.max(m);
        }
        if let Some(m) = self.max_lag {
            hi = hi.min(m);
        }
        (lo, hi)
    }

    /// True when the domain has zero area.
    pub fn is_empty(&self) -> bool {
        if self.t1_hi <= self.t1_lo || self.t2_hi <= self.t2_lo {
            return true;
        }
        // lag range is widest at one of the t1 ends or at a kink
        let probes = [self.t1_lo, self.t1_hi, 0.5 * (self.t1_lo + self.t1_hi)];
        let mut extra: Vec<f64> = probes.to_vec();
        for k in self.kinks() {
            if k > self.t1_lo && k < self.t1_hi {
                extra.push(k);
            }
        }
        extra.iter().all(|&t1| {
            let (lo, hi) = self.lag_range(t1);
            hi <= lo
        })
    }

    fn kinks(&self) -> Vec<f64> {
        let mut k = vec![self.t2_lo];
        if let Some(m) = self.min_lag {
            k.push(self.t2_lo - m);
            k.push(self.t2_hi - m);
        }
        if let Some(m) = self.max_lag {
            k.push(self.t2_hi - m);
            k.push(self.t2_lo - m);
        }
        k
    }
}

/// Integrates `ψ_{2n}` over `domain` by nested adaptive quadrature, outer in
/// `t1` and inner in the lag `τ = t2 - t1`, with geometric refinement toward
/// small lags. `tol` is the relative tolerance of the outer integral.
pub fn kernel_quadrature_oracle(
    index: &MultiIndex,
    params: &ModelParams,
    domain: &TimeRectangle,
    tol: f64,
) -> Result<f64> {
    oracle_impl(index, params, domain, 0.0, tol)
}

/// As [`kernel_quadrature_oracle`] with every lag shifted by `epsilon`,
/// which is the defining integral of `φ_ε`.
pub fn kernel_quadrature_oracle_shifted(
    index: &MultiIndex,
    params: &ModelParams,
    domain: &TimeRectangle,
    epsilon: f64,
    tol: f64,
) -> Result<f64> {
    ensure(epsilon.is_finite() && epsilon >= 0.0, || {
        format!("epsilon >= 0 (got {epsilon})")
    })?;
    oracle_impl(index, params, domain, epsilon, tol)
}

fn oracle_impl(
    index: &MultiIndex,
    params: &ModelParams,
    domain: &TimeRectangle,
    epsilon: f64,
    tol: f64,
) -> Result<f64> {
    ensure(tol > 0.0 && tol < 1.0, || format!("0 < tol < 1 (got {tol})"))?;
    if domain.is_empty() {
        return Ok(0.0);
    }
    let d = params.dim();
    let n = index.order();
    let p = n as f64 + d as f64 / 2.0;
    let coef = psi_coefficient(index, d, 0.0, 1.0)?;
    let inner_tol = (tol * 1e-2).max(1e-14);
    let mut cells = 0usize;

    let inner = |t1: f64, cells: &mut usize| -> Result<f64> {
        let (lo, hi) = domain.lag_range(t1);
        if hi <= lo {
            return Ok(0.0);
        }
        let base = lo + epsilon;
        let pts = if base > 0.0 {
            quadrature::geometric_breaks(lo, hi, Anchor::Lower, base, base)
        } else {
            quadrature::geometric_breaks(lo, hi, Anchor::Lower, 0.0, 1e-15 * (hi - lo))
        };
        let opts = QuadOptions::relative(inner_tol)
            .with_budget(ORACLE_CELL_BUDGET.saturating_sub(*cells).max(2));
        let r = quadrature::integrate_fn(|tau| (tau + epsilon).powf(-p), &pts, &opts)?;
        *cells += r.intervals;
        if *cells > ORACLE_CELL_BUDGET {
            return Err(SiltError::Quadrature(format!(
                "oracle exceeded {ORACLE_CELL_BUDGET} cells"
            )));
        }
        Ok(r.value)
    };

    // the smallest admissible lag is reached at the upper t1 end
    let (lag_at_hi, _) = domain.lag_range(domain.t1_hi);
    let base = lag_at_hi + epsilon;
    let span = domain.t1_hi - domain.t1_lo;
    let steep = quadrature::geometric_breaks(
        domain.t1_lo,
        domain.t1_hi,
        Anchor::Upper,
        base,
        if base > 0.0 { base } else { 1e-15 * span },
    );
    let pts = quadrature::merge_breaks(domain.t1_lo, domain.t1_hi, &[domain.kinks(), steep]);
    let opts = QuadOptions::relative(tol).with_budget(100_000);
    let res = quadrature::integrate(|t1| inner(t1, &mut cells), &pts, &opts)?;
    finite(coef * res.value, "oracle integral")
}

/// `w^{n-1} x^a` with `w = v - u <= x`, evaluated without forming `x^a`.
fn scaled_power(prof: &Profile, n: u32, w: f64, x: f64) -> f64 {
    if n == 1 {
        x.powf(prof.a)
    } else if w == 0.0 {
        0.0
    } else {
        ((n - 1) as f64 * w.ln() + prof.a * x.ln()).exp()
    }
}

/// `w^{n-1} ((x - u)^a - x^a)`, cancellation-free for small `u / x`.
fn scaled_shift_difference(prof: &Profile, n: u32, w: f64, u: f64, x: f64) -> f64 {
    let e = prof.a * (-u / x).ln_1p();
    if e.abs() < 1.0 {
        scaled_power(prof, n, w, x) * e.exp_m1()
    } else {
        scaled_power(prof, n, w, x - u) - scaled_power(prof, n, w, x)
    }
}

/// `(v - u)^{n-1} f(u, v)` for the order-`n` kernel profile `f` (the kernel
/// times `n!`), in a form that stays finite for large `n` at small `v - u`.
/// This is the quantity whose square enters the L² norms. Preconditions
/// are the caller's responsibility.
pub(crate) fn scaled_profile(
    kind: KernelKind,
    d: usize,
    n: u32,
    t: f64,
    u: f64,
    v: f64,
) -> f64 {
    let prof = Profile::for_order(d, n);
    let w = v - u;
    let phi = |eps: f64| -> f64 {
        if prof.log {
            -prof.coef
                * ((-u / (v + eps)).ln_1p() - (-u / (t + eps)).ln_1p())
        } else {
            prof.phi_coef()
                * (scaled_shift_difference(&prof, n, w, u, v + eps)
                    - scaled_shift_difference(&prof, n, w, u, t + eps))
        }
    };
    match kind {
        KernelKind::Phi => phi(0.0),
        KernelKind::PhiEps { epsilon } => phi(epsilon),
        KernelKind::Cut { lambda } => {
            if w > lambda {
                phi(0.0)
            } else {
                0.0
            }
        }
        KernelKind::Rho { lambda } => {
            if w >= lambda {
                return 0.0;
            }
            let (uu, vv) = if u > t - lambda { (t - v, t - u) } else { (u, v) };
            let s = w / lambda;
            let unit = if vv < lambda {
                rho_unit_boundary(&prof, n, uu / lambda, s)
            } else {
                rho_unit_interior(&prof, n, s)
            };
            prof.rho_unit_coef() * lambda.powf(1.0 - prof.half_d()) * unit
        }
        KernelKind::Gap { lambda } => {
            if w >= lambda {
                return phi(0.0);
            }
            // mirror the far end onto the near-zero case
            let (uu, vv) = if u > t - lambda { (t - v, t - u) } else { (u, v) };
            if prof.log {
                if vv < lambda {
                    prof.coef * (uu / lambda + (-uu / t).ln_1p())
                } else {
                    prof.coef
                        * (vv.ln() + (t - uu).ln() - t.ln() - lambda.ln() + (lambda - w) / lambda)
                }
            } else {
                let lam_term = (w / lambda).powi(n as i32 - 1) * lambda.powf(-prof.half_d());
                let tail = -scaled_shift_difference(&prof, n, w, uu, t);
                if vv < lambda {
                    prof.coef / (prof.p - 1.0) * (uu * lam_term - (-tail) / (prof.p - 2.0))
                } else {
                    prof.phi_coef()
                        * (tail + scaled_power(&prof, n, w, lambda) - scaled_power(&prof, n, w, vv))
                        - prof.coef / (prof.p - 1.0) * (w - lambda) * lam_term
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize) -> ModelParams {
        ModelParams::with_minimal_truncation(d, 1.0).unwrap()
    }

    fn idx(entries: &[u32]) -> MultiIndex {
        MultiIndex::new(entries.to_vec()).unwrap()
    }

    fn pt(u: f64, v: f64) -> KernelPoint {
        KernelPoint::new(u, v).unwrap()
    }

    #[test]
    fn psi_examples() {
        let z = psi_coefficient(&idx(&[0, 0]), 2, 0.0, 1.0).unwrap();
        assert!((z - 1.0 / (2.0 * PI)).abs() < 1e-16);
        let o = psi_coefficient(&idx(&[1, 0]), 2, 0.25, 0.75).unwrap();
        assert!((o + 1.0 / PI).abs() < 1e-15);
        assert!(psi_coefficient(&idx(&[1, 0]), 2, 0.5, 0.5).is_err());
    }

    #[test]
    fn log_phi_example() {
        let v = phi_kernel(&idx(&[1, 0]), &params(2), &pt(0.25, 0.5)).unwrap();
        let direct = -(0.5f64.ln() + 0.75f64.ln() - 0.25f64.ln()) / (4.0 * PI);
        assert!((v - direct).abs() < 1e-15);
        assert!((v + 0.0322659).abs() < 1e-7);
    }

    #[test]
    fn phi_vanishes_at_full_span() {
        let v = phi_kernel(&idx(&[1, 0]), &params(2), &pt(0.0, 1.0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rho_interior_log_example() {
        let v = rho_kernel(&idx(&[0, 1]), &params(2), 0.1, &pt(0.4, 0.45)).unwrap();
        let direct = (0.5 - 2f64.ln()) / (4.0 * PI);
        assert!((v - direct).abs() < 1e-15);
        assert!((v + 0.0153702).abs() < 1e-7);
    }

    #[test]
    fn rho_vanishes_on_strip_edge() {
        for d in 1..=3 {
            for n in 1..=3 {
                let i = MultiIndex::along_first_axis(d, n).unwrap();
                let r = rho_kernel(&i, &params(d), 0.125, &pt(0.25, 0.375)).unwrap();
                assert_eq!(r, 0.0);
            }
        }
    }

    #[test]
    fn gap_log_limit() {
        let target = -(0.5f64.ln() * 2.0 - 0.1f64.ln() + 1.0) / (4.0 * PI);
        let g = gap_kernel(&idx(&[1, 0]), &params(2), 0.1, &pt(0.5, 0.5 + 1e-9)).unwrap();
        assert!((g - target).abs() < 1e-8, "{g} {target}");
    }

    #[test]
    fn odd_raw_index_is_zero() {
        let v = evaluate_raw(KernelKind::Phi, &[1, 2], &params(2), &pt(0.2, 0.6)).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.order, 3);
        let e = evaluate_raw(KernelKind::Phi, &[2, 0], &params(2), &pt(0.2, 0.6)).unwrap();
        let direct = phi_kernel(&idx(&[1, 0]), &params(2), &pt(0.2, 0.6)).unwrap();
        assert_eq!(e.value, direct);
    }

    #[test]
    fn lambda_must_stay_below_half_horizon() {
        let e = rho_kernel(&idx(&[1]), &params(1), 0.5, &pt(0.1, 0.2)).unwrap_err();
        assert!(matches!(e, SiltError::Precondition(_)));
    }

    #[test]
    fn order_zero_rejected() {
        assert!(phi_kernel(&idx(&[0, 0]), &params(2), &pt(0.1, 0.2)).is_err());
    }

    #[test]
    fn rho_bound_log_example() {
        let b = rho_bound(&idx(&[1, 0]), 2, 0.1, &pt(0.3, 0.35)).unwrap();
        assert!((b - 0.05f64.ln().abs() / (4.0 * PI)).abs() < 1e-15);
        assert!((b - 0.2384).abs() < 1e-4);
        assert!(rho_bound(&idx(&[1]), 1, 0.1, &pt(0.3, 0.35)).is_err());
    }

    #[test]
    fn empty_domain_is_zero() {
        let dom = TimeRectangle::new(0.3, 0.3, 0.5, 1.0).unwrap();
        assert_eq!(
            kernel_quadrature_oracle(&idx(&[1, 0]), &params(2), &dom, 1e-9).unwrap(),
            0.0
        );
        let gapped = TimeRectangle::new(0.0, 0.1, 0.2, 0.3).unwrap().with_min_lag(0.5);
        assert!(gapped.is_empty());
    }
}
