use std::f64::consts::PI;

use silt_core::expectations::{
    divergence_constant_k, expected_combined_lt, expected_gap_lt, expected_gaussian_lt,
};
use silt_core::quadrature::{geometric_breaks, integrate_fn, Anchor, QuadOptions};
use silt_core::ModelParams;

/// `∫_lo^T (T - τ) (2π(τ + ε))^{-d/2} dτ`, the expectation written as a lag
/// integral.
fn lag_quadrature(d: usize, t: f64, eps: f64, lo: f64) -> f64 {
    let base = lo + eps;
    let pts = geometric_breaks(lo, t, Anchor::Lower, base, base.max(1e-15));
    let f = |tau: f64| (t - tau) * (2.0 * PI * (tau + eps)).powf(-(d as f64) / 2.0);
    integrate_fn(f, &pts, &QuadOptions::relative(1e-12)).unwrap().value
}

#[test]
fn closed_forms_match_quadrature() {
    for d in 1..=3 {
        for t in [0.5, 1.0, 2.0] {
            let params = ModelParams::with_minimal_truncation(d, t).unwrap();
            for eps in [1e-3, 0.01, 0.1] {
                let exact = expected_gaussian_lt(&params, eps).unwrap();
                let q = lag_quadrature(d, t, eps, 0.0);
                assert!((exact - q).abs() <= 1e-9 * q, "gaussian d={d} T={t} eps={eps}: {exact} vs {q}");
            }
            for lambda in [1e-3, 0.01, 0.2] {
                let exact = expected_gap_lt(&params, lambda).unwrap();
                let q = lag_quadrature(d, t, 0.0, lambda);
                assert!((exact - q).abs() <= 1e-9 * q, "gap d={d} T={t} lambda={lambda}: {exact} vs {q}");
                let exact = expected_combined_lt(&params, 0.01, lambda).unwrap();
                let q = lag_quadrature(d, t, 0.01, lambda);
                assert!((exact - q).abs() <= 1e-9 * q, "combined d={d} T={t}: {exact} vs {q}");
            }
        }
    }
}

#[test]
fn planar_gap_divergence_is_logarithmic() {
    let params = ModelParams::new(2, 1.0, 1).unwrap();
    for lambda in [1e-2, 1e-4, 1e-6] {
        let e = expected_gap_lt(&params, lambda).unwrap();
        let k = divergence_constant_k(&params, lambda).unwrap();
        // E = (T/2π) ln(1/Λ) + O(1)
        let lead = lambda.ln().abs() / (2.0 * PI);
        assert!((e - lead).abs() < 1.0, "lambda={lambda}: E={e}, lead={lead}");
        assert!(k.is_finite());
    }
}

#[test]
fn unregularized_line_expectation() {
    // d = 1, ε = 0: (4/3) T^{3/2} / √(2π)
    let params = ModelParams::new(1, 1.0, 0).unwrap();
    let e = expected_gaussian_lt(&params, 0.0).unwrap();
    assert!((e - 4.0 / 3.0 / (2.0 * PI).sqrt()).abs() < 1e-14);
    assert!((e - 0.53192).abs() < 1e-5);
}
