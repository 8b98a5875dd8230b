//! Brownian path sampling and Monte Carlo estimators.
//!
//! Paths are generated per index from a keyed stream, evaluated in parallel,
//! and collected in index order, so every estimate depends only on the seed,
//! the path count and the parameters.

mod estimate;
mod estimators;
mod path;
mod varadhan;

pub use estimate::{default_steps, map_paths, map_paths_multi, MCEstimate, SampleStats};
pub use estimators::{
    centered_lt, gaussian_lt, grid_gap, occupation_oracle_d1, pair_sum, pair_sum_portable,
};
pub use path::{sample_path, BrownianPath};
pub use varadhan::{
    centered_samples, chebyshev_tail_bound, empirical_tail, empirical_tail_curve,
    is_supercritical, partition_estimate, ChebyshevBound, TailExperiment, WEIGHT_LIMIT,
};
