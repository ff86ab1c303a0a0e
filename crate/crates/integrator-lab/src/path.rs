//! Integrator paths x(t_k) = pairing(A 1_[0,t_k], noise), their exact
//! covariance function, and pinned (bridge) paths in one and two
//! dimensions.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, L2Vec};
use crate::noise::NoiseSample;
use crate::operator::L2Operator;

/// A sampled trajectory at the grid nodes, one coordinate list per
/// dimension. values[d][0] = 0 always.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussPath {
    grid: GridSpec,
    values: Vec<Vec<f64>>,
    seed: u64,
}

impl GaussPath {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Node values of one coordinate: n_cells + 1 entries starting at 0.
    pub fn coord(&self, d: usize) -> &[f64] {
        &self.values[d]
    }

    /// Convenience for 1D paths.
    pub fn values(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<Vec<f64>>, seed: u64) -> GaussPath {
        GaussPath { grid, values, seed }
    }
}

/// x(t_k) = pairing(A 1_[0,t_k], xi). Expanding the pairing turns the node
/// values into sqrt(h) times the prefix sums of A^T z, which the identity
/// fast path reduces to a plain cumulative sum of the draws.
pub fn integrator_path(a: &L2Operator, noise: &NoiseSample) -> Result<GaussPath> {
    if a.grid() != noise.grid() {
        return Err(Error::GridMismatch(
            a.grid().n_cells(),
            noise.grid().n_cells(),
        ));
    }
    let grid = a.grid();
    let w = a.tr_action(noise.z());
    let sqrt_h = grid.h().sqrt();
    let mut values = Vec::with_capacity(grid.n_cells() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for wj in w {
        acc += wj;
        values.push(sqrt_h * acc);
    }
    Ok(GaussPath::from_parts(grid, vec![values], noise.seed()))
}

/// Exact covariance of the integrator at two times:
/// inner(A 1_[0,s], A 1_[0,t]).
pub fn covariance(a: &L2Operator, s: f64, t: f64) -> Result<f64> {
    let gs = L2Vec::prefix_indicator(a.grid(), s)?;
    let gt = L2Vec::prefix_indicator(a.grid(), t)?;
    a.apply(&gs)?.inner(&a.apply(&gt)?)
}

/// Pinned path y(t) = w(t) - t w(1) + a t per coordinate, built from one
/// fresh Wiener path per dimension. The endpoint y(1) = a holds exactly by
/// construction, not just in law.
pub fn bridge_path(a: &[f64], noises: &[NoiseSample]) -> Result<GaussPath> {
    let dim = a.len();
    if dim == 0 || dim > 2 {
        return Err(Error::invalid(format!(
            "bridge endpoint must have 1 or 2 coordinates, got {dim}"
        )));
    }
    if noises.len() != dim {
        return Err(Error::invalid(format!(
            "need {dim} independent noises, got {}",
            noises.len()
        )));
    }
    let grid = noises[0].grid();
    for n in noises {
        if n.grid() != grid {
            return Err(Error::GridMismatch(grid.n_cells(), n.grid().n_cells()));
        }
    }
    let id = L2Operator::identity(grid);
    let mut values = Vec::with_capacity(dim);
    for (d, noise) in noises.iter().enumerate() {
        let w = integrator_path(&id, noise)?;
        let w = w.values();
        let w1 = w[grid.n_cells()];
        let coord: Vec<f64> = (0..=grid.n_cells())
            .map(|k| {
                if k == grid.n_cells() {
                    // exact endpoint: the k = n term of the formula below
                    // is a[d] up to cancellation; pin it outright
                    a[d]
                } else {
                    let t = grid.node(k);
                    w[k] - t * w1 + a[d] * t
                }
            })
            .collect();
        values.push(coord);
    }
    Ok(GaussPath::from_parts(grid, values, noises[0].seed()))
}
