use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::combinatorics::ModelParams;
use crate::error::{ensure, Result};

/// A Brownian path on the uniform grid `t_i = i T / M`, `i = 0..=M`.
///
/// Stored coordinate-major: `coordinate(c)[i]` is `B_c(t_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dim: usize,
    steps: usize,
    horizon: f64,
    values: Vec<f64>,
}

impl BrownianPath {
    /// Builds a path from coordinate-major values; each coordinate must hold
    /// `steps + 1` points starting at zero.
    pub fn from_coordinates(horizon: f64, coords: Vec<Vec<f64>>) -> Result<Self> {
        ensure(!coords.is_empty(), || "at least one coordinate".to_string())?;
        ensure(horizon.is_finite() && horizon > 0.0, || format!("T > 0 (got {horizon})"))?;
        let len = coords[0].len();
        ensure(len >= 3, || format!("M >= 2 (got {} points)", len))?;
        ensure(coords.iter().all(|c| c.len() == len), || {
            "all coordinates have the same length".to_string()
        })?;
        ensure(coords.iter().all(|c| c[0] == 0.0), || "B(0) = 0".to_string())?;
        Ok(Self {
            dim: coords.len(),
            steps: len - 1,
            horizon,
            values: coords.concat(),
        })
    }

    /// The path that never leaves the origin; a test double for which every
    /// pair sits at distance zero.
    pub fn constant(dim: usize, horizon: f64, steps: usize) -> Result<Self> {
        ensure(dim >= 1, || "d >= 1".to_string())?;
        Self::from_coordinates(horizon, vec![vec![0.0; steps + 1]; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Values of coordinate `c` at all grid points.
    pub fn coordinate(&self, c: usize) -> &[f64] {
        let n = self.steps + 1;
        &self.values[c * n..(c + 1) * n]
    }

    /// `B(t_i)` as a vector.
    pub fn point(&self, i: usize) -> Vec<f64> {
        (0..self.dim).map(|c| self.coordinate(c)[i]).collect()
    }

    /// `|B(T)|²`.
    pub fn end_norm_sq(&self) -> f64 {
        (0..self.dim)
            .map(|c| {
                let x = self.coordinate(c)[self.steps];
                x * x
            })
            .sum()
    }

    /// Keeps every `stride`-th grid point. `stride` must divide `M`.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        ensure(stride >= 1 && self.steps.is_multiple_of(stride), || {
            format!("stride divides M (got stride = {stride}, M = {})", self.steps)
        })?;
        let coords = (0..self.dim)
            .map(|c| self.coordinate(c).iter().step_by(stride).copied().collect())
            .collect();
        Self::from_coordinates(self.horizon, coords)
    }
}

/// Samples path `index` of the family keyed by `seed`.
///
/// Each path draws from its own ChaCha8 stream (key from `seed`, stream
/// number `index`), consuming standard normals in step-major,
/// coordinate-minor order. A path is therefore reproducible in isolation
/// and independent of which worker builds it.
pub fn sample_path(params: &ModelParams, steps: usize, seed: u64, index: u64) -> Result<BrownianPath> {
    ensure(steps >= 2, || format!("M >= 2 (got {steps})"))?;
    let d = params.dim();
    let t = params.horizon();
    let sd = (t / steps as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = steps + 1;
    let mut values = vec![0.0; d * n];
    let mut pos = vec![0.0; d];
    for i in 1..n {
        for (c, x) in pos.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *x += sd * z;
            values[c * n + i] = *x;
        }
    }
    Ok(BrownianPath {
        dim: d,
        steps,
        horizon: t,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_origin_and_is_reproducible() {
        let p = ModelParams::new(2, 1.0, 1).unwrap();
        let a = sample_path(&p, 100, 7, 3).unwrap();
        let b = sample_path(&p, 100, 7, 3).unwrap();
        let c = sample_path(&p, 100, 7, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.point(0), vec![0.0, 0.0]);
    }

    #[test]
    fn subsample_keeps_grid_points() {
        let p = ModelParams::new(1, 1.0, 0).unwrap();
        let a = sample_path(&p, 8, 1, 0).unwrap();
        let s = a.subsample(4).unwrap();
        assert_eq!(s.steps(), 2);
        assert_eq!(s.coordinate(0), &[a.coordinate(0)[0], a.coordinate(0)[4], a.coordinate(0)[8]]);
        assert!(a.subsample(3).is_err());
    }

    #[test]
    fn constant_path() {
        let z = BrownianPath::constant(2, 1.0, 10).unwrap();
        assert_eq!(z.end_norm_sq(), 0.0);
        assert!(BrownianPath::constant(0, 1.0, 10).is_err());
    }
}
