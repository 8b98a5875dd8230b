use silt_core::expectations::{expected_gaussian_lt, RegularizationSpec};
use silt_core::montecarlo::{
    centered_samples, gaussian_lt, map_paths, partition_estimate, MCEstimate, SampleStats,
};
use silt_core::ModelParams;

#[test]
fn endpoint_second_moment() {
    for d in 1..=3 {
        let params = ModelParams::with_minimal_truncation(d, 2.0).unwrap();
        let xs = map_paths(&params, 64, 5, 20_000, |p| Ok(p.end_norm_sq())).unwrap();
        let est = MCEstimate::from_samples(&xs, 5);
        let target = d as f64 * 2.0;
        assert!((est.mean - target).abs() < 4.0 * est.std_error, "d={d}: {est:?}");
    }
}

#[test]
fn regularized_mean_matches_closed_form() {
    let eps = 0.05;
    for d in 1..=2 {
        let params = ModelParams::with_minimal_truncation(d, 1.0).unwrap();
        let xs = map_paths(&params, 200, 8, 4000, |p| gaussian_lt(p, eps, 0.0)).unwrap();
        let est = MCEstimate::from_samples(&xs, 8);
        let exact = expected_gaussian_lt(&params, eps).unwrap();
        // the grid bias at Δt = ε/10 is far below the sampling error here
        assert!((est.mean - exact).abs() < 4.0 * est.std_error, "d={d}: {} vs {exact}", est.mean);
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let params = ModelParams::new(2, 1.0, 1).unwrap();
    let reg = RegularizationSpec::Gaussian { epsilon: 0.1 };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let xs = centered_samples(&params, &reg, 500, 42).unwrap();
                let z = partition_estimate(&params, 1.0, &reg, 500, 42).unwrap();
                (xs, z)
            })
    };
    let (a, za) = run(1);
    let (b, zb) = run(8);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(za.mean.to_bits(), zb.mean.to_bits());
    assert_eq!(
        SampleStats::new(&a).variance.to_bits(),
        SampleStats::new(&b).variance.to_bits()
    );
}
