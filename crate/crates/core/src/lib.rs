//! Numerical toolkit for self-intersection local times of d-dimensional
//! Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! * [`combinatorics`]: model parameters, multi-indices and the exact chaos
//!   weights that collapse multi-index sums into sums over the total order.
//! * [`quadrature`]: adaptive Gauss-Kronrod integration used by every oracle.
//! * [`expectations`]: closed-form expectations of the Gaussian- and
//!   gap-regularized local times.
//! * [`kernels`]: chaos kernels of the truncated, Gaussian-regularized,
//!   gap-regularized and cut-regularized local times, plus a 2-D quadrature
//!   oracle over the time domains that define them.
//! * [`norms`]: squared L² norms of kernels, the chaos distance between the
//!   truncated local time and its gap regularization, and variance series.
//! * [`montecarlo`]: counter-based Brownian path sampling, pair-sum estimators
//!   and the tail / partition-function experiments.

pub mod combinatorics;
pub mod error;
pub mod expectations;
mod fastexp;
pub mod kernels;
pub mod montecarlo;
pub mod norms;
pub mod quadrature;

pub use combinatorics::{chaos_weight, enumerate_multi_indices, KernelPoint, ModelParams, MultiIndex};
pub use error::{Result, SiltError};
