use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use silt_core::expectations::{divergence_constant_k, expected_lt, RegularizationSpec};
use silt_core::kernels::{
    evaluate, kernel_quadrature_oracle, kernel_quadrature_oracle_shifted, KernelKind, TimeRectangle,
};
use silt_core::montecarlo::{
    centered_lt, chebyshev_tail_bound, default_steps, empirical_tail_curve, gaussian_lt, grid_gap,
    is_supercritical, map_paths, occupation_oracle_d1, partition_estimate, SampleStats,
    TailExperiment,
};
use silt_core::norms::{chaos_distance_sq, phi_centered_variance, rate_verification};
use silt_core::{KernelPoint, ModelParams, MultiIndex, SiltError};

use crate::output::{Cell, Report};
use crate::{Args, CliError, Estimator, KindArg, Series};

/// Gap grid used to calibrate `K` when the tail command is not given one.
const CALIBRATION_LAMBDAS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require<T: Copy>(value: Option<T>, flag: &str, command: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("{command} needs --{flag}")))
}

pub fn params(args: &Args) -> Result<ModelParams, CliError> {
    let d = args.dim;
    Ok(match args.truncation {
        Some(n) => ModelParams::new(d, args.horizon, n)?,
        None => ModelParams::with_minimal_truncation(d, args.horizon)?,
    })
}

/// `--eps` alone is Gaussian, `--gap` alone the gap variant, both the
/// combined one.
fn regularization(args: &Args, command: &str) -> Result<RegularizationSpec, CliError> {
    let reg = match (args.eps, args.gap) {
        (Some(epsilon), None) => RegularizationSpec::Gaussian { epsilon },
        (None, Some(lambda)) => RegularizationSpec::Gap { lambda },
        (Some(epsilon), Some(lambda)) => RegularizationSpec::Combined { epsilon, lambda },
        (None, None) => return Err(usage(format!("{command} needs --eps and/or --gap"))),
    };
    reg.validate(args.horizon)?;
    Ok(reg)
}

/// Gaussian-mollified regularization required by the path estimators.
fn mc_regularization(args: &Args, command: &str) -> Result<(RegularizationSpec, f64), CliError> {
    let eps = require(args.eps, "eps", command)?;
    if eps <= 0.0 {
        return Err(usage(format!("{command} needs --eps > 0 (got {eps})")));
    }
    Ok((regularization(args, command)?, eps))
}

fn check_paths(args: &Args, min: usize) -> Result<usize, CliError> {
    if args.paths < min {
        return Err(usage(format!("--paths >= {min} (got {})", args.paths)));
    }
    Ok(args.paths)
}

fn common(report: &mut Report, p: &ModelParams) {
    report.param("d", p.dim());
    report.param("T", p.horizon());
    report.param("N", p.truncation());
}

fn reg_params(report: &mut Report, reg: &RegularizationSpec) {
    report.param("reg", reg.name());
    // zero means the regularization does not use the parameter
    let used = |x: f64| (x > 0.0).then_some(x);
    report.param("eps", used(reg.epsilon()));
    report.param("lambda", used(reg.lambda()));
}

pub fn expectation(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let reg = regularization(args, "expectation")?;
    let mut r = Report::new("expectation", &["value"]);
    common(&mut r, &p);
    reg_params(&mut r, &reg);
    r.push(vec![expected_lt(&p, &reg)?.into()]);
    Ok(r)
}

fn kernel_kind(args: &Args, kind: KindArg, command: &str) -> Result<KernelKind, CliError> {
    Ok(match kind {
        KindArg::Phi => KernelKind::Phi,
        KindArg::PhiEps => KernelKind::PhiEps {
            epsilon: require(args.eps, "eps", command)?,
        },
        KindArg::Rho => KernelKind::Rho {
            lambda: require(args.gap, "gap", command)?,
        },
        KindArg::Gap => KernelKind::Gap {
            lambda: require(args.gap, "gap", command)?,
        },
        KindArg::Cut => KernelKind::Cut {
            lambda: require(args.gap, "gap", command)?,
        },
    })
}

pub fn kernel(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let kind = kernel_kind(args, require(args.kind, "kind", "kernel")?, "kernel")?;
    let index = match &args.index {
        Some(entries) => MultiIndex::new(entries.clone())?,
        None => return Err(usage("kernel needs --index (comma-separated n_i)")),
    };
    let point = KernelPoint::new(require(args.u, "u", "kernel")?, require(args.v, "v", "kernel")?)?;
    let value = evaluate(kind, &index, &p, &point)?;
    let mut r = Report::new("kernel", &["kind", "n", "u", "v", "value"]);
    common(&mut r, &p);
    r.param("index", join(index.entries()));
    r.param("eps", args.eps);
    r.param("lambda", args.gap);
    r.push(vec![
        kind.name().into(),
        value.order.into(),
        point.u().into(),
        point.v().into(),
        value.value.into(),
    ]);
    Ok(r)
}

fn join(xs: &[u32]) -> String {
    xs.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

/// Randomized comparison of the closed-form kernels with the quadrature
/// oracle. Returns the report and whether every family passed.
pub fn validate_kernels(args: &Args) -> Result<(Report, bool), CliError> {
    let p = params(args)?;
    let t = p.horizon();
    let d = p.dim();
    let tol = args.tol;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(usage(format!("--tol in (0, 1) (got {tol})")));
    }
    let samples = args.samples;
    if samples == 0 {
        return Err(usage("--samples >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut r = Report::new("validate-kernels", &["kind", "n", "samples", "max_rel_error", "pass"]);
    common(&mut r, &p);
    r.param("tol", tol);
    r.seed = Some(args.seed);
    let mut all = true;
    for n in 1..=3u32 {
        if 2 * n as usize + 2 <= d {
            continue;
        }
        let index = MultiIndex::along_first_axis(d, n)?;
        for family in ["phi", "phi_eps", "rho"] {
            let mut worst: f64 = 0.0;
            for _ in 0..samples {
                let (exact, oracle) = match family {
                    "phi" => {
                        let pt = random_point(&mut rng, t, t)?;
                        let dom = TimeRectangle::phi_domain(t, &pt)?;
                        (
                            evaluate(KernelKind::Phi, &index, &p, &pt)?.value,
                            kernel_quadrature_oracle(&index, &p, &dom, tol * 1e-3)?,
                        )
                    }
                    "phi_eps" => {
                        let pt = random_point(&mut rng, t, t)?;
                        let epsilon = t * 10f64.powf(rng.random_range(-4.0..-1.0));
                        let dom = TimeRectangle::phi_domain(t, &pt)?;
                        (
                            evaluate(KernelKind::PhiEps { epsilon }, &index, &p, &pt)?.value,
                            kernel_quadrature_oracle_shifted(&index, &p, &dom, epsilon, tol * 1e-3)?,
                        )
                    }
                    _ => {
                        let lambda = t * rng.random_range(0.01..0.4);
                        let w = lambda * 10f64.powf(rng.random_range(-3.0..0.0));
                        let u = rng.random_range(lambda..(t - lambda));
                        let pt = KernelPoint::new(u, u + w)?;
                        let dom = TimeRectangle::rho_domain(t, lambda, &pt)?;
                        (
                            evaluate(KernelKind::Rho { lambda }, &index, &p, &pt)?.value,
                            kernel_quadrature_oracle(&index, &p, &dom, tol * 1e-3)?,
                        )
                    }
                };
                worst = worst.max((exact - oracle).abs() / oracle.abs());
            }
            let pass = worst <= tol;
            all &= pass;
            r.push(vec![family.into(), n.into(), samples.into(), worst.into(), pass.into()]);
        }
    }
    Ok((r, all))
}

/// Point with `v - u` spread log-uniformly over `[1e-4, 0.3] · scale`.
fn random_point(rng: &mut ChaCha8Rng, t: f64, scale: f64) -> Result<KernelPoint, SiltError> {
    let w = scale * 10f64.powf(rng.random_range(-4.0..-0.5));
    let u = rng.random_range(0.0..(t - w));
    KernelPoint::new(u, u + w)
}

pub fn norms(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let n_max = args.nmax;
    match args.series {
        Series::Distance => {
            let lambda = require(args.gap, "gap", "norms --series distance")?;
            let dist = chaos_distance_sq(&p, lambda, n_max)?;
            let mut r = Report::new("norms", &["term", "n", "value", "majorant"]);
            common(&mut r, &p);
            r.param("series", "distance");
            r.param("lambda", lambda);
            r.param("nmax", n_max);
            for t in &dist.per_order {
                r.push(vec!["order".into(), t.n.into(), t.contribution.into(), t.majorant.into()]);
            }
            r.push(vec!["total".into(), Cell::Empty, dist.total.into(), Cell::Empty]);
            r.push(vec!["tail_bound".into(), Cell::Empty, dist.truncation_bound.into(), Cell::Empty]);
            Ok(r)
        }
        Series::Variance => {
            let reg = if args.cut {
                let lambda = require(args.gap, "gap", "norms --cut")?;
                RegularizationSpec::Cut { lambda }
            } else {
                regularization(args, "norms --series variance")?
            };
            let series = phi_centered_variance(&p, &reg, n_max)?;
            let mut r = Report::new("norms", &["term", "n", "value"]);
            common(&mut r, &p);
            r.param("series", "variance");
            reg_params(&mut r, &reg);
            r.param("nmax", n_max);
            for t in &series.per_order {
                r.push(vec!["order".into(), t.n.into(), t.contribution.into()]);
            }
            r.push(vec!["total".into(), Cell::Empty, series.total.into()]);
            r.push(vec!["tail_estimate".into(), Cell::Empty, series.tail_estimate.into()]);
            Ok(r)
        }
    }
}

pub fn rate(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let lambdas = args
        .lambdas
        .as_deref()
        .ok_or_else(|| usage("rate needs --lambdas (comma-separated)"))?;
    let table = rate_verification(&p, lambdas, args.nmax)?;
    let mut r = Report::new("rate", &["lambda", "distance", "ratio", "truncation_bound"]);
    common(&mut r, &p);
    r.param("nmax", args.nmax);
    for row in &table.rows {
        r.push(vec![
            row.lambda.into(),
            row.distance.into(),
            row.ratio.into(),
            row.truncation_bound.into(),
        ]);
    }
    Ok(r)
}

pub fn simulate(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let n_paths = check_paths(args, 2)?;
    let seed = args.seed;
    let t = p.horizon();
    let mut r = Report::new(
        "simulate",
        &["estimator", "mean", "std_error", "variance", "variance_std_error", "n_samples", "expectation"],
    );
    common(&mut r, &p);
    r.seed = Some(seed);
    let (samples, expectation, steps) = match args.estimator {
        Estimator::Occupation => {
            if p.dim() != 1 {
                return Err(usage(format!("the occupation estimator needs --dim 1 (got {})", p.dim())));
            }
            let bin = require(args.bin, "bin", "simulate --estimator occupation")?;
            let steps = match (args.steps, args.eps) {
                (Some(m), _) => m,
                (None, Some(eps)) => default_steps(t, eps),
                (None, None) => return Err(usage("occupation needs --steps or --eps")),
            };
            r.param("bin", bin);
            let reg = RegularizationSpec::Gaussian { epsilon: 0.0 };
            let xs = map_paths(&p, steps, seed, n_paths, |path| occupation_oracle_d1(path, bin))?;
            (xs, expected_lt(&p, &reg)?, steps)
        }
        Estimator::Raw | Estimator::Centered => {
            let (reg, eps) = mc_regularization(args, "simulate")?;
            let steps = args.steps.unwrap_or_else(|| default_steps(t, eps));
            reg_params(&mut r, &reg);
            let dt = t / steps as f64;
            let lambda = reg.lambda();
            let grid_lambda = grid_gap(dt, lambda).1;
            r.param("lambda_grid", (lambda > 0.0).then_some(grid_lambda));
            let centered = args.estimator == Estimator::Centered;
            let xs = map_paths(&p, steps, seed, n_paths, |path| {
                if centered {
                    centered_lt(path, &reg, &p)
                } else {
                    gaussian_lt(path, eps, lambda)
                }
            })?;
            let mean_reg = if lambda > 0.0 {
                RegularizationSpec::Combined { epsilon: eps, lambda: grid_lambda }
            } else {
                reg
            };
            let expectation = if centered { 0.0 } else { expected_lt(&p, &mean_reg)? };
            (xs, expectation, steps)
        }
    };
    r.param("steps", steps);
    r.param("paths", n_paths);
    let stats = SampleStats::new(&samples);
    r.push(vec![
        args.estimator.name().into(),
        stats.mean.into(),
        (stats.variance / n_paths as f64).sqrt().into(),
        stats.variance.into(),
        stats.variance_std_error.into(),
        n_paths.into(),
        expectation.into(),
    ]);
    Ok(r)
}

pub fn tail(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let (reg, eps) = mc_regularization(args, "tail")?;
    let n_paths = check_paths(args, 10_000)?;
    let thresholds = args
        .threshold
        .as_deref()
        .ok_or_else(|| usage("tail needs --threshold (comma-separated)"))?;
    let alpha = require(args.alpha, "alpha", "tail")?;
    if p.dim() != 2 {
        return Err(usage(format!("tail needs --dim 2 (got {})", p.dim())));
    }
    // the regularization scale the bound is matched to
    let lambda_eff = args.gap.unwrap_or(eps);
    let k = match args.k_const {
        Some(k) => k,
        None => divergence_constant_k(&p, lambda_eff)?,
    };
    let experiments = thresholds
        .iter()
        .map(|&threshold| TailExperiment {
            threshold,
            g: args.g.unwrap_or(1.0),
            alpha,
            k,
            big_k: 0.0,
        })
        .collect::<Vec<_>>();
    // the bound needs N > k; lower thresholds still get an empirical frequency
    for e in &experiments {
        TailExperiment { threshold: e.threshold.max(k + 1.0), ..*e }.validate(&p)?;
    }
    let big_k = match args.big_k {
        Some(k) => k,
        None => p.horizon() * rate_verification(&p, &CALIBRATION_LAMBDAS, args.nmax)?.max_ratio(),
    };
    let freqs = empirical_tail_curve(&p, &reg, thresholds, n_paths, args.seed)?;
    let mut r = Report::new(
        "tail",
        &["threshold", "frequency", "std_error", "bound", "intermediate", "bound_lambda"],
    );
    common(&mut r, &p);
    reg_params(&mut r, &reg);
    r.param("alpha", alpha);
    r.param("k", k);
    r.param("K", big_k);
    r.param("paths", n_paths);
    r.seed = Some(args.seed);
    for (e, f) in experiments.iter().zip(&freqs) {
        let mut row = vec![e.threshold.into(), f.mean.into(), f.std_error.into()];
        if e.threshold > k {
            let b = chebyshev_tail_bound(&TailExperiment { big_k, ..*e }, &p)?;
            row.extend([b.bound.into(), b.intermediate.into(), b.lambda.into()]);
        } else {
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty]);
        }
        r.push(row);
    }
    Ok(r)
}

pub fn partition(args: &Args) -> Result<Report, CliError> {
    let p = params(args)?;
    let (reg, _) = mc_regularization(args, "partition")?;
    let n_paths = check_paths(args, 2)?;
    let g = require(args.g, "g", "partition")?;
    let supercritical = is_supercritical(&p, g);
    if supercritical {
        eprintln!(
            "warning: g = {g} >= 2π/T; exp(-g L_c) need not be integrable, exploring anyway"
        );
    }
    let z = partition_estimate(&p, g, &reg, n_paths, args.seed)?;
    let mut r = Report::new("partition", &["g", "mean", "std_error", "n_samples", "supercritical"]);
    common(&mut r, &p);
    reg_params(&mut r, &reg);
    r.param("paths", n_paths);
    r.seed = Some(args.seed);
    r.push(vec![g.into(), z.mean.into(), z.std_error.into(), z.n_samples.into(), supercritical.into()]);
    Ok(r)
}
