//! Globally adaptive Gauss-Kronrod (10/21 point) integration.
//!
//! Integrands are fallible so that nested integrations can propagate the
//! inner failure instead of smuggling a NaN through the outer rule. All
//! refinement decisions are sequential, so results are bit-reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Result, SiltError};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of live subintervals.
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol,
            max_intervals: 20_000,
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_budget(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self::relative(1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Number of subintervals in the final partition.
    pub intervals: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center)?;
    let mut res_k = WGK[10] * f_center;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x)?;
        let f2 = f(center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let error = rescale_error((res_k - res_g) * half, res_abs * half.abs(), res_asc * half.abs());
    if !value.is_finite() || !error.is_finite() {
        return Err(SiltError::Quadrature(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over `[points[0], points[last]]`, treating interior entries
/// of `points` as known breakpoints. `points` must be nondecreasing; repeated
/// entries are skipped.
pub fn integrate<F>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if points.len() < 2 {
        return Err(SiltError::Quadrature(
            "need at least two integration limits".into(),
        ));
    }
    if points.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(SiltError::Quadrature(format!(
            "breakpoints must be nondecreasing: {points:?}"
        )));
    }
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk21(&mut f, w[0], w[1])?);
            evaluations += 21;
        }
    }
    if heap.is_empty() {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
            evaluations: 0,
        });
    }
    let totals = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| {
        let mut parts: Vec<Segment> = heap.iter().chain(frozen.iter()).copied().collect();
        parts.sort_by(|x, y| x.a.total_cmp(&y.a));
        let value: f64 = parts.iter().map(|s| s.value).sum();
        let error: f64 = parts.iter().map(|s| s.error).sum();
        (value, error)
    };
    let mut value: f64 = heap.iter().map(|s| s.value).sum();
    let mut error: f64 = heap.iter().map(|s| s.error).sum();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // interval exhausted at machine resolution
            frozen.push(worst);
            continue;
        }
        if heap.len() + frozen.len() + 2 > opts.max_intervals {
            return Err(SiltError::Quadrature(format!(
                "subdivision budget of {} intervals exhausted (estimate {value:e}, error {error:e})",
                opts.max_intervals
            )));
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let (value, error) = totals(&heap, &frozen);
    let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
    if error > tol && error > 1e3 * f64::EPSILON * value.abs() {
        return Err(SiltError::Quadrature(format!(
            "tolerance {tol:e} not reached at machine resolution (estimate {value:e}, error {error:e})"
        )));
    }
    Ok(QuadResult {
        value,
        error,
        intervals: heap.len() + frozen.len(),
        evaluations,
    })
}

/// Infallible-integrand convenience wrapper around [`integrate`].
pub fn integrate_fn<F>(mut f: F, points: &[f64], opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), points, opts)
}

/// Which end of an interval carries the steep behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Lower,
    Upper,
}

/// Breakpoints for `[a, b]` at geometrically growing distances from an anchor
/// that sits `offset >= 0` outside the chosen end: distances from the anchor
/// are `offset + scale * 2^k`. With `offset = 0` this resolves an endpoint
/// singularity down to `scale`; with `offset > 0` it resolves a near-endpoint
/// pole at relative precision.
pub fn geometric_breaks(a: f64, b: f64, anchor: Anchor, offset: f64, scale: f64) -> Vec<f64> {
    let span = b - a;
    let mut pts = vec![a, b];
    if span > 0.0 && scale > 0.0 {
        let base = offset.max(0.0);
        let mut reach = base + scale;
        loop {
            let dist = reach - base;
            if dist >= span {
                break;
            }
            pts.push(match anchor {
                Anchor::Lower => a + dist,
                Anchor::Upper => b - dist,
            });
            reach *= 2.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Merges several breakpoint lists restricted to `[a, b]`.
pub fn merge_breaks(a: f64, b: f64, lists: &[Vec<f64>]) -> Vec<f64> {
    let mut pts: Vec<f64> = lists
        .iter()
        .flatten()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_fn(|x| 3.0 * x * x - x, &[0.0, 2.0], &QuadOptions::default()).unwrap();
        assert!((r.value - 6.0).abs() < 1e-14);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn log_endpoint_singularity() {
        // int_0^1 ln^2 x dx = 2
        let pts = geometric_breaks(0.0, 1.0, Anchor::Lower, 0.0, 1e-14);
        let r = integrate_fn(|x| x.ln().powi(2), &pts, &QuadOptions::relative(1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn algebraic_singularity_without_hints() {
        // int_0^1 x^{-1/2} dx = 2
        let r = integrate_fn(|x| x.powf(-0.5), &[0.0, 1.0], &QuadOptions::relative(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn near_pole_resolved_by_offset_breaks() {
        // int_0^1 (x + 1e-8)^{-3} dx
        let s: f64 = 1e-8;
        let exact = 0.5 * (s.powi(-2) - (1.0 + s).powi(-2));
        let pts = geometric_breaks(0.0, 1.0, Anchor::Lower, s, s);
        let r = integrate_fn(|x| (x + s).powi(-3), &pts, &QuadOptions::relative(1e-12)).unwrap();
        assert!(((r.value - exact) / exact).abs() < 1e-11);
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate_fn(|x| x, &[1.0, 1.0], &QuadOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions::relative(1e-14).with_budget(4);
        let err = integrate_fn(|x| (50.0 * x).sin().abs(), &[0.0, 10.0], &opts).unwrap_err();
        assert!(matches!(err, SiltError::Quadrature(_)));
    }

    #[test]
    fn integrand_errors_propagate() {
        let err = integrate(
            |x| {
                if x > 0.5 {
                    Err(SiltError::Divergent("inner".into()))
                } else {
                    Ok(x)
                }
            },
            &[0.0, 1.0],
            &QuadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, SiltError::Divergent("inner".into()));
    }

    #[test]
    fn geometric_breaks_toward_upper_end() {
        let pts = geometric_breaks(0.0, 1.0, Anchor::Upper, 0.0, 0.125);
        assert_eq!(pts, vec![0.0, 0.5, 0.75, 0.875, 1.0]);
        let off = geometric_breaks(0.0, 1.0, Anchor::Lower, 0.1, 0.1);
        // anchor at -0.1: distances from anchor 0.1 * 2^k => points 0.1, 0.3, 0.7
        assert_eq!(off.len(), 5);
        assert!((off[1] - 0.1).abs() < 1e-15 && (off[2] - 0.3).abs() < 1e-15);
    }
}
