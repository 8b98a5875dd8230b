use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silt_core::kernels::{cut_kernel, gap_kernel, phi_kernel, rho_bound, rho_kernel};
use silt_core::{KernelPoint, ModelParams, MultiIndex};

#[test]
fn rho_within_pointwise_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let cases = [(1, 2), (1, 3), (2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)];
    let mut checked = 0;
    for i in 0..2000 {
        let (d, n) = cases[i % cases.len()];
        let t: f64 = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let lambda = rng.random_range(1e-4..(t / 2.0).min(0.9));
        let params = ModelParams::new(d, t, 2 * n as usize).unwrap();
        let index = MultiIndex::along_first_axis(d, n).unwrap();
        let w = lambda * 10f64.powf(rng.random_range(-6.0..0.0));
        // every fifth sample hugs one of the ends of [0, T]
        let u = match i % 5 {
            0 => rng.random_range(0.0..(lambda - w).max(0.0) + 1e-12).min(t - w),
            1 => (t - w - rng.random_range(0.0..lambda)).max(0.0),
            _ => rng.random_range(0.0..(t - w)),
        };
        let pt = KernelPoint::new(u, u + w).unwrap();
        let r = rho_kernel(&index, &params, lambda, &pt).unwrap();
        let b = rho_bound(&index, d, lambda, &pt).unwrap();
        assert!(r.abs() <= b, "d={d} n={n} T={t} lambda={lambda} {pt:?}: |{r}| > {b}");
        checked += 1;
    }
    assert_eq!(checked, 2000);
}

#[test]
fn gap_is_phi_minus_rho() {
    let params = ModelParams::new(2, 1.0, 4).unwrap();
    let lambda = 0.1;
    for n in 1..=3u32 {
        let index = MultiIndex::along_first_axis(2, n).unwrap();
        for (u, v) in [(0.3, 0.35), (0.5, 0.7), (0.01, 0.05), (0.97, 0.99)] {
            let pt = KernelPoint::new(u, v).unwrap();
            let gap = gap_kernel(&index, &params, lambda, &pt).unwrap();
            let phi = phi_kernel(&index, &params, &pt).unwrap();
            let rho = rho_kernel(&index, &params, lambda, &pt).unwrap();
            let target = phi - rho;
            assert!((gap - target).abs() <= 1e-8 * phi.abs(), "n={n} ({u},{v}): {gap} vs {target}");
        }
    }
}

#[test]
fn gap_continuous_and_bounded() {
    let t = 1.0;
    let lambda = 0.05;
    for d in 1..=3 {
        for n in 1..=3u32 {
            let params = ModelParams::new(d, t, 2 * n as usize).unwrap();
            let index = MultiIndex::along_first_axis(d, n).unwrap();
            for k in 0..20 {
                let u = 0.1 + 0.8 * k as f64 / 20.0;
                let inside = gap_kernel(&index, &params, lambda, &KernelPoint::new(u, u + lambda * (1.0 - 1e-12)).unwrap()).unwrap();
                let outside = gap_kernel(&index, &params, lambda, &KernelPoint::new(u, u + lambda).unwrap()).unwrap();
                assert!((inside - outside).abs() < 1e-10, "d={d} n={n} u={u}: jump {}", inside - outside);
                let near = gap_kernel(&index, &params, lambda, &KernelPoint::new(u, u + 1e-9).unwrap()).unwrap();
                let mid = gap_kernel(&index, &params, lambda, &KernelPoint::new(u, u + 1e-3).unwrap()).unwrap();
                assert!(near.is_finite() && near.abs() <= 10.0 * mid.abs() + 10.0);
            }
        }
    }
}

#[test]
fn cut_is_phi_off_the_strip() {
    let params = ModelParams::new(1, 1.0, 2).unwrap();
    let index = MultiIndex::along_first_axis(1, 1).unwrap();
    let lambda = 0.1;
    let off = KernelPoint::new(0.2, 0.5).unwrap();
    assert_eq!(
        cut_kernel(&index, &params, lambda, &off).unwrap(),
        phi_kernel(&index, &params, &off).unwrap()
    );
    let on = KernelPoint::new(0.2, 0.25).unwrap();
    assert_eq!(cut_kernel(&index, &params, lambda, &on).unwrap(), 0.0);
}
