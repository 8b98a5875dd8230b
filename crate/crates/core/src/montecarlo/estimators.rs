use std::f64::consts::PI;

use super::path::BrownianPath;
use crate::combinatorics::ModelParams;
use crate::error::{ensure, Result, SiltError};
use crate::expectations::{expected_combined_lt, expected_gaussian_lt, RegularizationSpec};
use crate::fastexp::exp_neg;

/// Slack on the `Δt <= ε/10` resolution rule, so that `ε / Δt` computed
/// from decimal inputs is not rejected for rounding.
const RESOLUTION_SLACK: f64 = 1e-9;

/// Gap rounded to the grid: `(k, kΔt)` with `k = round(Λ/Δt)`.
pub fn grid_gap(dt: f64, lambda: f64) -> (usize, f64) {
    let k = (lambda / dt).round() as usize;
    (k, k as f64 * dt)
}

fn check_resolution(path: &BrownianPath, epsilon: f64) -> Result<()> {
    ensure(epsilon.is_finite() && epsilon > 0.0, || {
        format!("epsilon > 0 (got {epsilon})")
    })?;
    let dt = path.dt();
    ensure(dt <= epsilon / 10.0 * (1.0 + RESOLUTION_SLACK), || {
        format!("dt <= epsilon/10 (got dt = {dt}, epsilon = {epsilon})")
    })
}

/// Trapezoid weight of grid point `i` out of `0..=m`.
#[inline(always)]
fn trap(i: usize, m: usize) -> f64 {
    if i == 0 || i == m {
        0.5
    } else {
        1.0
    }
}

#[inline(always)]
fn dist_sq<const D: usize>(coords: &[&[f64]; D], origin: &[f64; D], j: usize) -> f64 {
    let mut r2 = 0.0;
    for c in 0..D {
        let dx = coords[c][j] - origin[c];
        r2 += dx * dx;
    }
    r2
}

/// `Σ_{j=start}^{m} c_j exp(scale |B_j - origin|²)` with trapezoid weights
/// `c_j`, accumulated in eight interleaved lanes so the summation order is
/// fixed whatever the vector width.
#[inline(always)]
fn row_sum<const D: usize>(coords: &[&[f64]; D], origin: &[f64; D], start: usize, m: usize, scale: f64) -> f64 {
    let mut acc = [0.0f64; 8];
    // interior points j < m all carry weight 1
    let len = m - start;
    let body = len - len % 8;
    let mut j = start;
    while j < start + body {
        let mut r2 = [0.0f64; 8];
        for c in 0..D {
            let blk: &[f64; 8] = coords[c][j..j + 8].try_into().expect("block of 8");
            for lane in 0..8 {
                let dx = blk[lane] - origin[c];
                r2[lane] += dx * dx;
            }
        }
        for lane in 0..8 {
            acc[lane] += exp_neg(r2[lane] * scale);
        }
        j += 8;
    }
    for (lane, a) in acc.iter_mut().enumerate().take(len % 8) {
        *a += exp_neg(dist_sq(coords, origin, start + body + lane) * scale);
    }
    acc[len % 8] += 0.5 * exp_neg(dist_sq(coords, origin, m) * scale);
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline(always)]
fn pair_sum_body<const D: usize>(coords: &[&[f64]; D], m: usize, k: usize, scale: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..=m {
        if i + k > m {
            break;
        }
        let mut origin = [0.0; D];
        for c in 0..D {
            origin[c] = coords[c][i];
        }
        // lag exactly k enters with weight 1/2
        let mut row = 0.5 * trap(i + k, m) * exp_neg(dist_sq(coords, &origin, i + k) * scale);
        if i + k < m {
            row += row_sum(coords, &origin, i + k + 1, m, scale);
        }
        total += trap(i, m) * row;
    }
    total
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn pair_sum_avx512<const D: usize>(coords: &[&[f64]; D], m: usize, k: usize, scale: f64) -> f64 {
    pair_sum_body(coords, m, k, scale)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn pair_sum_avx2<const D: usize>(coords: &[&[f64]; D], m: usize, k: usize, scale: f64) -> f64 {
    pair_sum_body(coords, m, k, scale)
}

fn pair_sum_fixed<const D: usize>(coords: [&[f64]; D], m: usize, k: usize, scale: f64) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the CPU supports AVX-512F, checked just above.
            return unsafe { pair_sum_avx512(&coords, m, k, scale) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { pair_sum_avx2(&coords, m, k, scale) };
        }
    }
    pair_sum_body(&coords, m, k, scale)
}

/// Portable build of the pair sum, exposed so tests can compare it with the
/// dispatched one bit for bit.
#[doc(hidden)]
pub fn pair_sum_portable(path: &BrownianPath, k: usize, scale: f64) -> f64 {
    let m = path.steps();
    match path.dim() {
        1 => pair_sum_body(&[path.coordinate(0)], m, k, scale),
        2 => pair_sum_body(&[path.coordinate(0), path.coordinate(1)], m, k, scale),
        3 => pair_sum_body(
            &[path.coordinate(0), path.coordinate(1), path.coordinate(2)],
            m,
            k,
            scale,
        ),
        _ => pair_sum_dyn(path, k, scale),
    }
}

/// Weighted pair sum `Σ_{j-i >= k} w_ij c_i c_j exp(scale · |B_j - B_i|²)`,
/// with `w = 1/2` at lag exactly `k` and 1 beyond.
#[doc(hidden)]
pub fn pair_sum(path: &BrownianPath, k: usize, scale: f64) -> f64 {
    let m = path.steps();
    match path.dim() {
        1 => pair_sum_fixed([path.coordinate(0)], m, k, scale),
        2 => pair_sum_fixed([path.coordinate(0), path.coordinate(1)], m, k, scale),
        3 => pair_sum_fixed(
            [path.coordinate(0), path.coordinate(1), path.coordinate(2)],
            m,
            k,
            scale,
        ),
        _ => pair_sum_dyn(path, k, scale),
    }
}

fn pair_sum_dyn(path: &BrownianPath, k: usize, scale: f64) -> f64 {
    let m = path.steps();
    let d = path.dim();
    let mut total = 0.0;
    for i in 0..=m {
        if i + k > m {
            break;
        }
        let mut row = 0.0;
        for j in (i + k)..=m {
            let r2: f64 = (0..d)
                .map(|c| {
                    let dx = path.coordinate(c)[j] - path.coordinate(c)[i];
                    dx * dx
                })
                .sum();
            let w = if j == i + k { 0.5 } else { 1.0 };
            row += w * trap(j, m) * exp_neg(r2 * scale);
        }
        total += trap(i, m) * row;
    }
    total
}

/// Riemann sum for `∫∫_{t2 - t1 > Λ} δ_ε(B(t2) - B(t1)) dt1 dt2` on the path's
/// grid, with `δ_ε` the centered Gaussian density of variance `ε` per
/// coordinate.
///
/// Time weights are trapezoidal; the gap is rounded to `k = round(Λ/Δt)`
/// steps (see [`grid_gap`]) and pairs at lag exactly `kΔt` count one half,
/// which for `Λ = 0` is the diagonal. The sum is exact for a constant path.
pub fn gaussian_lt(path: &BrownianPath, epsilon: f64, lambda: f64) -> Result<f64> {
    check_resolution(path, epsilon)?;
    let t = path.horizon();
    ensure(lambda.is_finite() && (0.0..t).contains(&lambda), || {
        format!("0 <= lambda < T (got lambda = {lambda}, T = {t})")
    })?;
    let dt = path.dt();
    let (k, _) = grid_gap(dt, lambda);
    if k > path.steps() {
        return Ok(0.0);
    }
    let d = path.dim() as f64;
    let norm = (2.0 * PI * epsilon).powf(-d / 2.0);
    Ok(norm * dt * dt * pair_sum(path, k, -0.5 / epsilon))
}

/// The regularized local time minus its exact expectation. Requires a
/// Gaussian mollifier: `reg` is Gaussian or combined. For the combined
/// variant the expectation uses the grid-rounded gap.
pub fn centered_lt(path: &BrownianPath, reg: &RegularizationSpec, params: &ModelParams) -> Result<f64> {
    ensure(path.dim() == params.dim(), || {
        format!("path dimension equals d (got {}, d = {})", path.dim(), params.dim())
    })?;
    ensure(path.horizon() == params.horizon(), || {
        format!("path horizon equals T (got {}, T = {})", path.horizon(), params.horizon())
    })?;
    reg.validate(params.horizon())?;
    match *reg {
        RegularizationSpec::Gaussian { epsilon } => {
            let mean = expected_gaussian_lt(params, epsilon)?;
            Ok(gaussian_lt(path, epsilon, 0.0)? - mean)
        }
        RegularizationSpec::Combined { epsilon, lambda } => {
            let (_, grid_lambda) = grid_gap(path.dt(), lambda);
            let mean = expected_combined_lt(params, epsilon, grid_lambda)?;
            Ok(gaussian_lt(path, epsilon, lambda)? - mean)
        }
        _ => Err(SiltError::Precondition(format!(
            "path estimators need a Gaussian mollifier (got {} regularization)",
            reg.name()
        ))),
    }
}

/// Occupation-density estimate of the unregularized `d = 1` local time,
/// `L = ½ ∫ ℓ(x)² dx`, with `ℓ` the trapezoid-weighted occupation histogram
/// on bins `[jh, (j+1)h)`.
pub fn occupation_oracle_d1(path: &BrownianPath, bin_width: f64) -> Result<f64> {
    ensure(path.dim() == 1, || format!("d = 1 (got d = {})", path.dim()))?;
    ensure(bin_width.is_finite() && bin_width > 0.0, || {
        format!("bin_width > 0 (got {bin_width})")
    })?;
    let xs = path.coordinate(0);
    let m = path.steps();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let base = (lo / bin_width).floor() as i64;
    let top = (hi / bin_width).floor() as i64;
    let mut counts = vec![0.0f64; (top - base + 1) as usize];
    for (i, &x) in xs.iter().enumerate() {
        let b = (x / bin_width).floor() as i64 - base;
        counts[b as usize] += trap(i, m);
    }
    let dt = path.dt();
    let sq: f64 = counts.iter().map(|c| c * c).sum();
    Ok(0.5 * dt * dt / bin_width * sq)
}
