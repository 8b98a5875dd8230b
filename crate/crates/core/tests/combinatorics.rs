use num_bigint::BigUint;
use silt_core::{chaos_weight, enumerate_multi_indices};

fn brute(d: usize, n: u32) -> BigUint {
    enumerate_multi_indices(d, n)
        .iter()
        .map(|m| m.double_factorial() / (m.factorial() * m.factorial()))
        .sum()
}

#[test]
fn planar_weight_is_power_of_four() {
    for n in 0..=30 {
        assert_eq!(chaos_weight(2, n), BigUint::from(4u32).pow(n), "n = {n}");
    }
}

#[test]
fn weight_matches_enumeration() {
    for d in 1..=4 {
        for n in 0..=20 {
            assert_eq!(chaos_weight(d, n), brute(d, n), "d = {d}, n = {n}");
        }
    }
}

#[test]
fn enumeration_counts_are_binomial() {
    // stars and bars: C(n + d - 1, d - 1)
    assert_eq!(enumerate_multi_indices(3, 5).len(), 21);
    assert_eq!(enumerate_multi_indices(4, 20).len(), 1771);
    assert!(enumerate_multi_indices(3, 4).iter().all(|m| m.order() == 4));
}
