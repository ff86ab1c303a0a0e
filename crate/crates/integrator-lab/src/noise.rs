//! Discrete white noise on the grid and its pairings with step functions.

use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::grid::{dot, GridSpec, L2Vec};
use crate::util::stream_rng;

/// One realization of white noise on a grid: n_cells standard normal
/// draws. The pairing with a step function f is sqrt(h) * sum f_i z_i, so
/// Var pairing(f) = h * sum f_i^2 = norm(f)^2.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    grid: GridSpec,
    z: Vec<f64>,
    seed: u64,
}

impl NoiseSample {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pairing(&self, f: &L2Vec) -> Result<f64> {
        let probe = L2Vec::zero(self.grid);
        probe.check_grid(f)?;
        Ok(self.grid.h().sqrt() * dot(f.coeffs(), &self.z))
    }
}

/// Draw one noise realization. The same seed always yields the same draws;
/// distinct seeds come from independent generator streams.
pub fn sample_noise(grid: GridSpec, seed: u64) -> NoiseSample {
    let mut rng = stream_rng(seed, "noise", 0);
    let z = (0..grid.n_cells())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    NoiseSample { grid, z, seed }
}

/// Replicate r of an experiment labeled `label`: an independent stream for
/// each (master seed, label, r), stable across thread counts.
pub fn sample_noise_stream(grid: GridSpec, master_seed: u64, label: &str, replicate: u64) -> NoiseSample {
    let mut rng = stream_rng(master_seed, label, replicate);
    let z = (0..grid.n_cells())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    NoiseSample {
        grid,
        z,
        seed: master_seed,
    }
}
