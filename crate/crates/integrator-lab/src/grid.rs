//! Uniform-grid model of L2([0,1]): step functions with the L2 inner
//! product, indicator embeddings, and cell subsets.

use crate::error::{Error, Result};

/// Uniform partition of [0,1] into `n_cells` equal cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n_cells: usize,
}

impl GridSpec {
    /// Needs at least two cells so increments and separations exist.
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::GridTooSmall(n_cells));
        }
        Ok(GridSpec { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width h = 1 / n_cells.
    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Node t_k = k h, for k in 0..=n_cells.
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }

    /// Midpoint of cell i.
    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Index of the grid node nearest to `t` in [0,1].
    pub fn snap(&self, t: f64) -> usize {
        let k = (t * self.n_cells as f64).round();
        (k.max(0.0) as usize).min(self.n_cells)
    }
}

/// Step function on a [`GridSpec`]: one coefficient per cell. Carries the
/// L2 inner product `inner(f,g) = h * sum_i f_i g_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Vec {
    grid: GridSpec,
    coeffs: Vec<f64>,
}

impl L2Vec {
    pub fn new(grid: GridSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.n_cells() {
            return Err(Error::CoeffLength {
                len: coeffs.len(),
                n_cells: grid.n_cells(),
            });
        }
        Ok(L2Vec { grid, coeffs })
    }

    pub fn zero(grid: GridSpec) -> Self {
        L2Vec {
            grid,
            coeffs: vec![0.0; grid.n_cells()],
        }
    }

    /// Indicator of [s, t] with both endpoints snapped to the nearest grid
    /// node, so the squared norm is exactly the snapped length.
    pub fn indicator(grid: GridSpec, s: f64, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s > t {
            return Err(Error::BadInterval { s, t });
        }
        let (ks, kt) = (grid.snap(s), grid.snap(t));
        let mut coeffs = vec![0.0; grid.n_cells()];
        for c in &mut coeffs[ks..kt] {
            *c = 1.0;
        }
        Ok(L2Vec { grid, coeffs })
    }

    /// Indicator of [0, t]; the basic embedding of times into L2.
    pub fn prefix_indicator(grid: GridSpec, t: f64) -> Result<Self> {
        L2Vec::indicator(grid, 0.0, t)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn inner(&self, other: &L2Vec) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.grid.h() * dot(&self.coeffs, &other.coeffs))
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.h() * dot(&self.coeffs, &self.coeffs)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &L2Vec) -> Result<L2Vec> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &L2Vec) -> Result<L2Vec> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> L2Vec {
        L2Vec {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|x| c * x).collect(),
        }
    }

    pub(crate) fn from_raw(grid: GridSpec, coeffs: Vec<f64>) -> L2Vec {
        debug_assert_eq!(coeffs.len(), grid.n_cells());
        L2Vec { grid, coeffs }
    }

    pub(crate) fn check_grid(&self, other: &L2Vec) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.n_cells(), other.grid.n_cells()));
        }
        Ok(())
    }

    fn zip(&self, other: &L2Vec, f: impl Fn(f64, f64) -> f64) -> Result<L2Vec> {
        self.check_grid(other)?;
        Ok(L2Vec {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Union of grid cells, used by the indicator Gram bound and the
/// residual-length product it compares against.
#[derive(Debug, Clone)]
pub struct GridSubset {
    grid: GridSpec,
    mask: Vec<bool>,
}

impl GridSubset {
    pub fn from_mask(grid: GridSpec, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.n_cells() {
            return Err(Error::CoeffLength {
                len: mask.len(),
                n_cells: grid.n_cells(),
            });
        }
        Ok(GridSubset { grid, mask })
    }

    /// Cells covered by any of the given intervals, endpoints snapped.
    pub fn from_intervals(grid: GridSpec, intervals: &[(f64, f64)]) -> Result<Self> {
        let mut mask = vec![false; grid.n_cells()];
        for &(s, t) in intervals {
            if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s > t {
                return Err(Error::BadInterval { s, t });
            }
            for m in &mut mask[grid.snap(s)..grid.snap(t)] {
                *m = true;
            }
        }
        Ok(GridSubset { grid, mask })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Lebesgue measure: h times the cell count.
    pub fn measure(&self) -> f64 {
        self.grid.h() * self.mask.iter().filter(|&&m| m).count() as f64
    }

    pub fn indicator_vec(&self) -> L2Vec {
        L2Vec::from_raw(
            self.grid,
            self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_widths() {
        assert_eq!(GridSpec::new(4).unwrap().h(), 0.25);
        let g = GridSpec::new(1024).unwrap();
        assert!((g.h() - 9.765625e-4).abs() < 1e-18);
        assert!(matches!(GridSpec::new(1), Err(Error::GridTooSmall(1))));
    }

    #[test]
    fn width_times_cells_is_one() {
        for n in [2, 3, 5, 7, 100, 1000, 4096, 8192] {
            let g = GridSpec::new(n).unwrap();
            assert!((g.h() * n as f64 - 1.0).abs() <= 1e-15, "n={n}");
        }
    }

    #[test]
    fn indicator_examples() {
        let g = GridSpec::new(4).unwrap();
        let f = L2Vec::indicator(g, 0.0, 0.5).unwrap();
        assert_eq!(f.coeffs(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.norm_sq(), 0.5);

        let empty = L2Vec::indicator(g, 0.25, 0.25).unwrap();
        assert_eq!(empty.coeffs(), &[0.0; 4]);

        let a = L2Vec::indicator(g, 0.0, 0.5).unwrap();
        let b = L2Vec::indicator(g, 0.25, 0.75).unwrap();
        assert_eq!(a.inner(&b).unwrap(), 0.25);

        assert!(L2Vec::indicator(g, 0.5, 0.25).is_err());
        assert!(L2Vec::indicator(g, -0.1, 0.5).is_err());
    }

    #[test]
    fn indicator_norm_is_exact_for_grid_aligned_times() {
        let g = GridSpec::new(128).unwrap();
        for ks in 0..=128usize {
            for kt in ks..=128 {
                let f = L2Vec::indicator(g, g.node(ks), g.node(kt)).unwrap();
                let want = g.node(kt) - g.node(ks);
                assert!((f.norm_sq() - want).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn snapping_rounds_to_nearest_node() {
        let g = GridSpec::new(4).unwrap();
        // 0.3 -> node 0.25, 0.4 -> node 0.5
        let f = L2Vec::indicator(g, 0.3, 0.4).unwrap();
        assert_eq!(f.coeffs(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn inner_basics() {
        let g = GridSpec::new(8).unwrap();
        let f = L2Vec::new(g, (0..8).map(|i| i as f64).collect()).unwrap();
        let z = L2Vec::zero(g);
        assert_eq!(f.inner(&z).unwrap(), 0.0);
        let t = L2Vec::indicator(g, 0.0, 0.75).unwrap();
        assert!((t.norm() - 0.75f64.sqrt()).abs() < 1e-15);

        let other = L2Vec::zero(GridSpec::new(4).unwrap());
        assert!(matches!(f.inner(&other), Err(Error::GridMismatch(8, 4))));
    }

    #[test]
    fn subset_measure_and_indicator() {
        let g = GridSpec::new(8).unwrap();
        let s = GridSubset::from_intervals(g, &[(0.0, 0.25), (0.5, 0.75)]).unwrap();
        assert_eq!(s.measure(), 0.5);
        assert_eq!(s.indicator_vec().norm_sq(), 0.5);
    }
}
