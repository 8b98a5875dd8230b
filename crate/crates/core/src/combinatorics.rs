//! Domain types and exact chaos combinatorics.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{ensure, Result};

/// Dimension, horizon and chaos truncation threshold of a local-time model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    dim: usize,
    horizon: f64,
    truncation: usize,
}

impl ModelParams {
    /// Validates `d >= 1`, `T > 0` and `2N > d - 2`.
    pub fn new(dim: usize, horizon: f64, truncation: usize) -> Result<Self> {
        ensure(dim >= 1, || format!("d >= 1 (got d = {dim})"))?;
        ensure(horizon.is_finite() && horizon > 0.0, || {
            format!("T > 0 (got T = {horizon})")
        })?;
        ensure(2 * truncation + 2 > dim, || {
            format!("2N > d - 2 (got N = {truncation}, d = {dim})")
        })?;
        Ok(Self {
            dim,
            horizon,
            truncation,
        })
    }

    /// Uses the smallest admissible truncation, `N = floor(d / 2)`.
    pub fn with_minimal_truncation(dim: usize, horizon: f64) -> Result<Self> {
        Self::new(dim, horizon, dim / 2)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `d / 2` as a float, the recurring half-dimension.
    pub fn half_dim(&self) -> f64 {
        self.dim as f64 / 2.0
    }
}

/// Per-coordinate chaos orders `(n_1, ..., n_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        ensure(!entries.is_empty(), || "multi-index length d >= 1".to_string())?;
        Ok(Self(entries))
    }

    /// `(n, 0, ..., 0)` in dimension `dim`.
    pub fn along_first_axis(dim: usize, order: u32) -> Result<Self> {
        ensure(dim >= 1, || format!("d >= 1 (got d = {dim})"))?;
        let mut entries = vec![0; dim];
        entries[0] = order;
        Ok(Self(entries))
    }

    /// Halves a raw chaos index `(m_1, ..., m_d)`. Returns `None` when some
    /// entry is odd: those chaos kernels vanish identically.
    pub fn from_raw_even(raw: &[u32]) -> Option<Self> {
        if raw.is_empty() || raw.iter().any(|m| m % 2 == 1) {
            return None;
        }
        Some(Self(raw.iter().map(|m| m / 2).collect()))
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `n = sum n_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `n! = prod n_i!`, exact.
    pub fn factorial(&self) -> BigUint {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    /// `(2n)! = prod (2 n_i)!`, exact.
    pub fn double_factorial(&self) -> BigUint {
        self.0.iter().map(|&k| factorial(2 * k)).product()
    }

    /// `n!` as a float; exact up to the usual f64 rounding for `n <= 170`.
    pub fn factorial_f64(&self) -> f64 {
        self.0.iter().map(|&k| factorial_f64(k)).product()
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        ensure(self.dim() == dim, || {
            format!(
                "multi-index length equals d (got length {}, d = {dim})",
                self.dim()
            )
        })
    }
}

/// The pair `(u, v) = (min, max)` of a kernel's time arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    u: f64,
    v: f64,
}

impl KernelPoint {
    pub fn new(u: f64, v: f64) -> Result<Self> {
        ensure(u.is_finite() && v.is_finite(), || {
            format!("finite kernel arguments (got u = {u}, v = {v})")
        })?;
        ensure(0.0 <= u && u <= v, || {
            format!("0 <= u <= v (got u = {u}, v = {v})")
        })?;
        Ok(Self { u, v })
    }

    /// Reduces an arbitrary list of kernel arguments to its (min, max).
    pub fn from_arguments(args: &[f64]) -> Result<Self> {
        ensure(!args.is_empty(), || "at least one kernel argument".to_string())?;
        let u = args.iter().copied().fold(f64::INFINITY, f64::min);
        let v = args.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(u, v)
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Width `v - u` of the argument spread.
    pub fn width(&self) -> f64 {
        self.v - self.u
    }

    pub(crate) fn check_horizon(&self, horizon: f64) -> Result<()> {
        ensure(self.v <= horizon, || {
            format!("v <= T (got v = {}, T = {horizon})", self.v)
        })
    }
}

fn factorial(k: u32) -> BigUint {
    (1..=k).fold(BigUint::one(), |acc, i| acc * i)
}

fn factorial_f64(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

fn central_binomial(k: u32) -> BigUint {
    // C(2k, k) built incrementally: C(2i, i) = C(2i-2, i-1) * 2(2i-1) / i.
    let mut c = BigUint::one();
    for i in 1..=k {
        c = c * (2 * (2 * i - 1)) / i;
    }
    c
}

/// All `d`-tuples of nonnegative integers summing to `n`, in lexicographic
/// order.
pub fn enumerate_multi_indices(dim: usize, order: u32) -> Vec<MultiIndex> {
    fn fill(prefix: &mut Vec<u32>, slots: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in 0..=remaining {
            prefix.push(first);
            fill(prefix, slots - 1, remaining - first, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    fill(&mut Vec::with_capacity(dim), dim, order, &mut out);
    out
}

/// `sum_{|n| = order} prod_i C(2 n_i, n_i)`, the multi-index collapse of
/// `(2n)! / (n!)^2`. Equals the `order`-th coefficient of `(1 - 4x)^{-d/2}`.
///
/// Computed by repeated convolution of the central binomial sequence, so the
/// cost is `O(d n^2)` big-integer operations rather than one term per tuple.
pub fn chaos_weight(dim: usize, order: u32) -> BigUint {
    if dim == 0 {
        return if order == 0 { BigUint::one() } else { BigUint::zero() };
    }
    let n = order as usize;
    let binomials: Vec<BigUint> = (0..=order).map(central_binomial).collect();
    let mut acc = binomials.clone();
    for _ in 1..dim {
        let mut next = vec![BigUint::zero(); n + 1];
        for (total, slot) in next.iter_mut().enumerate() {
            for k in 0..=total {
                *slot += &binomials[k] * &acc[total - k];
            }
        }
        acc = next;
    }
    acc.swap_remove(n)
}

/// [`chaos_weight`] converted to a float at the last step.
pub fn chaos_weight_f64(dim: usize, order: u32) -> f64 {
    chaos_weight(dim, order).to_f64().unwrap_or(f64::INFINITY)
}

/// `chaos_weight(d, n) / 4^n = (d/2)_n / n!`, by the float recurrence. Used for
/// tail sums where the order runs far past the exact-arithmetic range.
pub fn chaos_weight_scaled(dim: usize, order: u64) -> f64 {
    let half = dim as f64 / 2.0;
    (0..order).fold(1.0, |acc, k| acc * (half + k as f64) / (k as f64 + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_weight(dim: usize, order: u32) -> BigUint {
        enumerate_multi_indices(dim, order)
            .iter()
            .map(|m| m.double_factorial() / (m.factorial() * m.factorial()))
            .sum()
    }

    #[test]
    fn enumeration_examples() {
        let one = enumerate_multi_indices(1, 3);
        assert_eq!(one, vec![MultiIndex(vec![3])]);
        let two: Vec<Vec<u32>> = enumerate_multi_indices(2, 2)
            .into_iter()
            .map(|m| m.0)
            .collect();
        assert_eq!(two, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }

    #[test]
    fn enumeration_matches_brute_force_cube() {
        // every tuple in {0,1,2}^3 whose entries sum to 2
        let mut brute = Vec::new();
        for a in 0..=2u32 {
            for b in 0..=2u32 {
                for c in 0..=2u32 {
                    if a + b + c == 2 {
                        brute.push(vec![a, b, c]);
                    }
                }
            }
        }
        let listed: Vec<Vec<u32>> = enumerate_multi_indices(3, 2)
            .into_iter()
            .map(|m| m.0)
            .collect();
        assert_eq!(listed.len(), 6);
        assert_eq!(listed, brute);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(chaos_weight(5, 0), BigUint::one());
        assert_eq!(chaos_weight(2, 2), BigUint::from(16u32));
        assert_eq!(chaos_weight(3, 1), BigUint::from(6u32));
    }

    #[test]
    fn planar_weight_is_power_of_four() {
        for n in 0..=30u32 {
            assert_eq!(chaos_weight(2, n), BigUint::from(4u32).pow(n), "n = {n}");
        }
    }

    #[test]
    fn weight_matches_enumeration() {
        for d in 1..=4 {
            for n in 0..=12 {
                assert_eq!(chaos_weight(d, n), brute_weight(d, n), "d = {d}, n = {n}");
            }
        }
    }

    #[test]
    fn large_orders_stay_exact() {
        let w = chaos_weight(2, 64);
        assert_eq!(w, BigUint::from(4u32).pow(64));
        assert!(w.bits() > 128);
        let w3 = chaos_weight(3, 64);
        assert!(w3 > w);
    }

    #[test]
    fn scaled_weight_matches_exact_ratio() {
        for d in 1..=4 {
            for n in 0..=40u32 {
                let exact = chaos_weight_f64(d, n) / 4f64.powi(n as i32);
                let rec = chaos_weight_scaled(d, n as u64);
                assert!((exact - rec).abs() <= 1e-12 * exact, "d = {d}, n = {n}");
            }
        }
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(2, 1.0, 1).is_ok());
        assert!(ModelParams::new(2, 1.0, 0).is_err());
        assert!(ModelParams::new(1, 1.0, 0).is_ok());
        assert!(ModelParams::new(4, 1.0, 1).is_err());
        assert!(ModelParams::new(0, 1.0, 1).is_err());
        assert!(ModelParams::new(2, 0.0, 1).is_err());
        assert_eq!(ModelParams::with_minimal_truncation(3, 1.0).unwrap().truncation(), 1);
    }

    #[test]
    fn raw_index_rejects_odd_entries() {
        assert!(MultiIndex::from_raw_even(&[2, 1]).is_none());
        assert_eq!(
            MultiIndex::from_raw_even(&[2, 4]).unwrap().entries(),
            &[1, 2]
        );
    }

    #[test]
    fn kernel_point_reduces_arguments() {
        let p = KernelPoint::from_arguments(&[0.4, 0.1, 0.9, 0.3]).unwrap();
        assert_eq!((p.u(), p.v()), (0.1, 0.9));
        assert!(KernelPoint::new(0.5, 0.4).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn binom(n: u64, k: u64) -> u64 {
            (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
        }

        proptest! {
            #[test]
            fn enumeration_is_complete_and_distinct(d in 1usize..=4, n in 0u32..=9) {
                let all = enumerate_multi_indices(d, n);
                let expected = binom(n as u64 + d as u64 - 1, d as u64 - 1);
                prop_assert_eq!(all.len() as u64, expected);
                let mut sorted = all.clone();
                sorted.sort();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), all.len());
                prop_assert!(all.iter().all(|m| m.order() == n && m.dim() == d));
                prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
