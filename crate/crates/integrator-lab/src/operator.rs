//! Dense operators on the step-function space: built-in families, operator
//! algebra (apply, adjoint, compose, invert), and cached singular-value
//! extremes.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, L2Vec};
use crate::mat::{Lu, Mat};

/// Structural tag for an operator. Identity and diagonal operators get fast
/// paths in sampling; projections and diagonals get exact singular values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum OpKind {
    Identity,
    /// Matrix is diagonal; the diagonal holds the multiplier step function.
    Multiplication,
    /// Symmetric idempotent of rank n-1: singular values are exactly {0, 1}.
    ComplementProjection,
    General,
}

/// Continuous linear operator on the grid space, stored as its dense action
/// on coefficient vectors. On a uniform grid the L2 adjoint is the matrix
/// transpose and L2 operator norms equal Euclidean matrix norms, so the
/// singular-value metadata is the plain SVD of `matrix`.
pub struct L2Operator {
    grid: GridSpec,
    kind: OpKind,
    matrix: Mat,
    /// Cached (sigma_min, sigma_max); computed on first request.
    sigma: OnceLock<(f64, f64)>,
}

impl Clone for L2Operator {
    fn clone(&self) -> Self {
        let sigma = OnceLock::new();
        if let Some(&v) = self.sigma.get() {
            let _ = sigma.set(v);
        }
        L2Operator {
            grid: self.grid,
            kind: self.kind,
            matrix: self.matrix.clone(),
            sigma,
        }
    }
}

impl std::fmt::Debug for L2Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("L2Operator")
            .field("grid", &self.grid)
            .field("kind", &self.kind)
            .field("sigma", &self.sigma.get())
            .finish_non_exhaustive()
    }
}

impl L2Operator {
    fn from_parts(grid: GridSpec, kind: OpKind, matrix: Mat) -> L2Operator {
        debug_assert_eq!(matrix.n_rows, grid.n_cells());
        debug_assert_eq!(matrix.n_cols, grid.n_cells());
        L2Operator {
            grid,
            kind,
            matrix,
            sigma: OnceLock::new(),
        }
    }

    pub fn identity(grid: GridSpec) -> L2Operator {
        L2Operator::from_parts(grid, OpKind::Identity, Mat::identity(grid.n_cells()))
    }

    /// Entrywise constructor: `f(i, j)` fills row i, column j of the action
    /// on coefficient vectors.
    pub fn from_fn(grid: GridSpec, f: impl Fn(usize, usize) -> f64) -> L2Operator {
        let n = grid.n_cells();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, f(i, j));
            }
        }
        L2Operator::from_parts(grid, OpKind::General, m)
    }

    /// Multiplication by a step function (one value per cell). A vanishing
    /// cell is allowed: the operator is built and simply reports
    /// sigma_min = 0, so `invert` fails on it rather than construction.
    pub fn multiplication(grid: GridSpec, values: &[f64]) -> Result<L2Operator> {
        if values.len() != grid.n_cells() {
            return Err(Error::CoeffLength {
                len: values.len(),
                n_cells: grid.n_cells(),
            });
        }
        let n = grid.n_cells();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        Ok(L2Operator::from_parts(grid, OpKind::Multiplication, m))
    }

    /// Causal integral operator (Af)(t) = int_0^t k(t,s) f(s) ds with the
    /// kernel tabulated at cell midpoints. Midpoint rule below the diagonal,
    /// half-cell weight on it (the output cell sees only half of itself),
    /// zero above.
    pub fn volterra(grid: GridSpec, kernel: &KernelTable) -> Result<L2Operator> {
        let n = grid.n_cells();
        if kernel.n() != n {
            return Err(Error::GridMismatch(kernel.n(), n));
        }
        let h = grid.h();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                m.set(i, j, h * kernel.get(i, j));
            }
            m.set(i, i, 0.5 * h * kernel.get(i, i));
        }
        Ok(L2Operator::from_parts(grid, OpKind::General, m))
    }

    /// I + eps*K. eps = 0 collapses to the identity exactly.
    pub fn perturbation(k: &L2Operator, eps: f64) -> L2Operator {
        if eps == 0.0 {
            return L2Operator::identity(k.grid);
        }
        let n = k.grid.n_cells();
        let mut m = k.matrix.clone();
        for v in m.data.iter_mut() {
            *v *= eps;
        }
        for i in 0..n {
            let v = m.get(i, i) + 1.0;
            m.set(i, i, v);
        }
        L2Operator::from_parts(k.grid, OpKind::General, m)
    }

    /// Orthogonal projection onto the complement of span{v}:
    /// Q = I - v v^T / (v^T v) on coefficients. The cell width cancels in
    /// the quotient, so the Euclidean form IS the L2 projection, exactly.
    pub fn complement_projection(v: &L2Vec) -> Result<L2Operator> {
        let c = v.coeffs();
        let vv = crate::grid::dot(c, c);
        if vv == 0.0 {
            return Err(Error::invalid(
                "complement projection of the zero vector is undefined",
            ));
        }
        let n = v.grid().n_cells();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let q = if i == j { 1.0 } else { 0.0 } - c[i] * c[j] / vv;
                m.set(i, j, q);
            }
        }
        Ok(L2Operator::from_parts(
            v.grid(),
            OpKind::ComplementProjection,
            m,
        ))
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub(crate) fn mat(&self) -> &Mat {
        &self.matrix
    }

    pub(crate) fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn apply(&self, f: &L2Vec) -> Result<L2Vec> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch(self.grid.n_cells(), f.grid().n_cells()));
        }
        let coeffs = match self.kind {
            OpKind::Identity => f.coeffs().to_vec(),
            _ => self.matrix.matvec(f.coeffs()),
        };
        Ok(L2Vec::from_raw(self.grid, coeffs))
    }

    /// L2 adjoint. Uniform cells make it the matrix transpose.
    pub fn adjoint(&self) -> L2Operator {
        let kind = match self.kind {
            OpKind::Identity => return self.clone(),
            OpKind::Multiplication => OpKind::Multiplication,
            OpKind::ComplementProjection => OpKind::ComplementProjection,
            OpKind::General => OpKind::General,
        };
        let op = L2Operator::from_parts(self.grid, kind, self.matrix.transpose());
        // Singular values are transpose-invariant.
        if let Some(&s) = self.sigma.get() {
            let _ = op.sigma.set(s);
        }
        op
    }

    /// self after other: (self.compose(other)).apply(f) = self(other(f)).
    pub fn compose(&self, other: &L2Operator) -> Result<L2Operator> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                self.grid.n_cells(),
                other.grid.n_cells(),
            ));
        }
        if self.kind == OpKind::Identity {
            return Ok(other.clone());
        }
        if other.kind == OpKind::Identity {
            return Ok(self.clone());
        }
        Ok(L2Operator::from_parts(
            self.grid,
            OpKind::General,
            self.matrix.matmul(&other.matrix),
        ))
    }

    /// Entrywise difference self - other.
    pub fn sub(&self, other: &L2Operator) -> Result<L2Operator> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                self.grid.n_cells(),
                other.grid.n_cells(),
            ));
        }
        let mut m = self.matrix.clone();
        for (a, b) in m.data.iter_mut().zip(&other.matrix.data) {
            *a -= b;
        }
        Ok(L2Operator::from_parts(self.grid, OpKind::General, m))
    }

    /// Inverse as an operator. Requires sigma_min > 1e-10 * sigma_max; a
    /// numerically singular operator is reported with both extremes.
    pub fn invert(&self) -> Result<L2Operator> {
        let (smin, smax) = self.sigma_extremes();
        if !(smin > 1e-10 * smax) {
            return Err(Error::SingularOperator {
                sigma_min: smin,
                sigma_max: smax,
            });
        }
        if self.kind == OpKind::Identity {
            return Ok(self.clone());
        }
        let lu = Lu::factor(&self.matrix).ok_or(Error::SingularOperator {
            sigma_min: smin,
            sigma_max: smax,
        })?;
        Ok(L2Operator::from_parts(
            self.grid,
            OpKind::General,
            lu.inverse(),
        ))
    }

    /// (sigma_min, sigma_max) of the coefficient action. Exact for the
    /// structured kinds; a full symmetric eigensolve of A^T A up to n = 512;
    /// power and inverse iteration beyond that.
    pub fn sigma_extremes(&self) -> (f64, f64) {
        *self.sigma.get_or_init(|| match self.kind {
            OpKind::Identity => (1.0, 1.0),
            OpKind::Multiplication => {
                let n = self.grid.n_cells();
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for i in 0..n {
                    let a = self.matrix.get(i, i).abs();
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
                (lo, hi)
            }
            OpKind::ComplementProjection => (0.0, 1.0),
            OpKind::General => compute_sigma_extremes(&self.matrix),
        })
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_extremes().0
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_extremes().1
    }

    /// True when `invert` would refuse: the smallest singular value is
    /// within factor 1e-10 of the largest (or both vanish).
    pub fn is_numerically_singular(&self) -> bool {
        let (smin, smax) = self.sigma_extremes();
        !(smin > 1e-10 * smax)
    }

    /// Pair-noise action used by path sampling: w = A^T z on raw
    /// coefficients, with diagonal and identity fast paths.
    pub(crate) fn tr_action(&self, z: &[f64]) -> Vec<f64> {
        match self.kind {
            OpKind::Identity => z.to_vec(),
            OpKind::Multiplication => {
                let n = self.grid.n_cells();
                (0..n).map(|i| self.matrix.get(i, i) * z[i]).collect()
            }
            _ => self.matrix.tr_matvec(z),
        }
    }
}

/// Wrap an already-built projection matrix. `proper` means the projection
/// is neither zero nor the identity, so its singular values are exactly
/// {0, 1}.
pub(crate) fn from_projection_matrix(grid: GridSpec, matrix: Mat, proper: bool) -> L2Operator {
    let kind = if proper {
        OpKind::ComplementProjection
    } else {
        OpKind::General
    };
    L2Operator::from_parts(grid, kind, matrix)
}

fn compute_sigma_extremes(m: &Mat) -> (f64, f64) {
    let n = m.n_rows;
    if n <= 512 {
        let b = ata(m);
        let (lo, hi) = crate::mat::jacobi_eigen_extremes(&b);
        (lo.max(0.0).sqrt(), hi.max(0.0).sqrt())
    } else {
        (inverse_iteration_sigma_min(m), power_iteration_sigma_max(m))
    }
}

fn ata(m: &Mat) -> Mat {
    m.transpose().matmul(m)
}

fn seeded_unit_vector(n: usize) -> Vec<f64> {
    let mut state = 0x5ca1ab1e_u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| 0.5 + crate::util::splitmix64(&mut state) as f64 / u64::MAX as f64)
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = crate::grid::dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Power iteration on A^T A with a deterministic start vector and a
/// Rayleigh-quotient stopping rule.
fn power_iteration_sigma_max(m: &Mat) -> f64 {
    let mut v = seeded_unit_vector(m.n_rows);
    let mut lambda = 0.0f64;
    for _ in 0..1000 {
        let mut w = m.tr_matvec(&m.matvec(&v));
        let next = crate::grid::dot(&w, &v);
        if normalize(&mut w) == 0.0 {
            return 0.0;
        }
        v = w;
        if (next - lambda).abs() <= 1e-13 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Inverse iteration on A^T A: each step solves A^T y = v then A z = y.
/// An exactly zero LU pivot means sigma_min = 0.
fn inverse_iteration_sigma_min(m: &Mat) -> f64 {
    let lu = match Lu::factor(m) {
        Some(lu) => lu,
        None => return 0.0,
    };
    let mut v = seeded_unit_vector(m.n_rows);
    let mut lambda = f64::INFINITY;
    for _ in 0..1000 {
        let y = lu.solve_transposed(&v);
        let mut z = lu.solve(&y);
        if normalize(&mut z) == 0.0 {
            break;
        }
        let az = m.matvec(&z);
        let next = crate::grid::dot(&az, &az);
        v = z;
        if (next - lambda).abs() <= 1e-13 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    if lambda.is_finite() {
        lambda.max(0.0).sqrt()
    } else {
        0.0
    }
}

/// Kernel values tabulated on cell-midpoint pairs of an n-cell grid.
/// Serialized as CSV rows `i,j,value`; absent pairs are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    n: usize,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "kernel table needs {} values for n = {}, got {}",
                n * n,
                n,
                values.len()
            )));
        }
        Ok(KernelTable { n, values })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        KernelTable {
            n,
            values: vec![value; n * n],
        }
    }

    /// Tabulate k(t, s) at the midpoint pairs of an n-cell grid.
    pub fn from_fn(n: usize, k: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let ti = (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let sj = (j as f64 + 0.5) / n as f64;
                values[i * n + j] = k(ti, sj);
            }
        }
        KernelTable { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Parse `i,j,value` rows. Blank lines and `#` comments are skipped;
    /// the table size is one past the largest index seen; missing entries
    /// stay zero.
    pub fn from_csv(text: &str) -> Result<KernelTable> {
        let mut triples = Vec::new();
        let mut max_idx = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let bad = || Error::invalid(format!("kernel CSV line {}: `{line}`", lineno + 1));
            let i: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let j: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let v: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if parts.next().is_some() {
                return Err(bad());
            }
            max_idx = max_idx.max(i).max(j);
            triples.push((i, j, v));
        }
        if triples.is_empty() {
            return Err(Error::invalid("kernel CSV holds no entries"));
        }
        let n = max_idx + 1;
        let mut values = vec![0.0; n * n];
        for (i, j, v) in triples {
            values[i * n + j] = v;
        }
        Ok(KernelTable { n, values })
    }

    /// Inverse of `from_csv`: every nonzero entry, row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if v != 0.0 || (i == self.n - 1 && j == self.n - 1) {
                    out.push_str(&format!("{i},{j},{v}\n"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn identity_applies_as_noop() {
        let g = grid(8);
        let f = L2Vec::new(g, (0..8).map(|i| i as f64 - 3.0).collect()).unwrap();
        let a = L2Operator::identity(g);
        assert_eq!(a.apply(&f).unwrap(), f);
        assert_eq!(a.sigma_extremes(), (1.0, 1.0));
    }

    #[test]
    fn adjoint_is_transpose_on_uniform_grid() {
        let g = grid(6);
        let a = L2Operator::from_fn(g, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let at = a.adjoint();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(at.entry(i, j), a.entry(j, i));
            }
        }
        // inner(Af, g) = inner(f, A* g) exactly for exact arithmetic inputs
        let f = L2Vec::new(g, vec![1.0, -1.0, 2.0, 0.0, 3.0, -2.0]).unwrap();
        let h = L2Vec::new(g, vec![0.5, 2.0, -1.0, 1.0, 0.0, 1.0]).unwrap();
        let lhs = a.apply(&f).unwrap().inner(&h).unwrap();
        let rhs = f.inner(&at.apply(&h).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn complement_projection_kills_v_and_is_idempotent() {
        let g = grid(8);
        let v = L2Vec::indicator(g, 0.0, 1.0).unwrap();
        let q = L2Operator::complement_projection(&v).unwrap();
        let qv = q.apply(&v).unwrap();
        assert!(qv.norm() <= 1e-15);
        let f = L2Vec::new(g, (0..8).map(|i| (i as f64).sin()).collect()).unwrap();
        let once = q.apply(&f).unwrap();
        let twice = q.apply(&once).unwrap();
        assert!(once.sub(&twice).unwrap().norm() <= 1e-14);
        assert_eq!(q.sigma_extremes(), (0.0, 1.0));
        assert!(q.invert().is_err());

        let zero = L2Vec::zero(g);
        assert!(L2Operator::complement_projection(&zero).is_err());
    }

    #[test]
    fn perturbation_zero_is_identity() {
        let g = grid(4);
        let k = L2Operator::from_fn(g, |i, j| (i + j) as f64);
        let a = L2Operator::perturbation(&k, 0.0);
        let f = L2Vec::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.apply(&f).unwrap(), f);
        assert_eq!(a.sigma_extremes(), (1.0, 1.0));
    }

    #[test]
    fn multiplication_flags_zero_cells_instead_of_rejecting() {
        let g = grid(4);
        let a = L2Operator::multiplication(g, &[1.0, 0.0, 2.0, -3.0]).unwrap();
        assert_eq!(a.sigma_extremes(), (0.0, 3.0));
        assert!(a.is_numerically_singular());
        assert!(matches!(
            a.invert(),
            Err(Error::SingularOperator { sigma_min, .. }) if sigma_min == 0.0
        ));

        let b = L2Operator::multiplication(g, &[1.0, 0.5, 2.0, -3.0]).unwrap();
        assert_eq!(b.sigma_extremes(), (0.5, 3.0));
        assert!(!b.is_numerically_singular());
    }

    #[test]
    fn volterra_is_strictly_causal_with_half_diagonal() {
        let g = grid(4);
        let k = KernelTable::constant(4, 1.0);
        let a = L2Operator::volterra(g, &k).unwrap();
        let h = g.h();
        for i in 0..4 {
            for j in 0..4 {
                let want = match j.cmp(&i) {
                    std::cmp::Ordering::Less => h,
                    std::cmp::Ordering::Equal => 0.5 * h,
                    std::cmp::Ordering::Greater => 0.0,
                };
                assert_eq!(a.entry(i, j), want);
            }
        }
        // integrating the constant 1 approximates t at midpoints
        let one = L2Vec::indicator(g, 0.0, 1.0).unwrap();
        let at = a.apply(&one).unwrap();
        for i in 0..4 {
            assert!((at.coeffs()[i] - g.midpoint(i)).abs() <= 1e-15);
        }
    }

    #[test]
    fn invert_round_trips() {
        let g = grid(6);
        let k = L2Operator::from_fn(g, |i, j| if i == j { 0.3 } else { 0.05 / (1 + i + j) as f64 });
        let a = L2Operator::perturbation(&k, 1.0);
        let inv = a.invert().unwrap();
        let prod = inv.compose(&a).unwrap();
        let f = L2Vec::new(g, vec![1.0, -2.0, 0.5, 3.0, -1.0, 2.0]).unwrap();
        let back = prod.apply(&f).unwrap();
        let err = back.sub(&f).unwrap().norm() / f.norm();
        assert!(err <= 1e-10, "round-trip error {err}");
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let g = grid(5);
        let a = L2Operator::from_fn(g, |i, j| (i as f64 - j as f64).exp());
        let id = L2Operator::identity(g);
        let left = id.compose(&a).unwrap();
        let right = a.compose(&id).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(left.entry(i, j), a.entry(i, j));
                assert_eq!(right.entry(i, j), a.entry(i, j));
            }
        }
    }

    #[test]
    fn sigma_matches_hand_diagonal() {
        let g = grid(3);
        let a = L2Operator::from_fn(g, |i, j| {
            if i == j {
                [2.0, 0.5, 1.0][i]
            } else {
                0.0
            }
        });
        // General kind, so this exercises the eigensolve route.
        let (lo, hi) = a.sigma_extremes();
        assert!((lo - 0.5).abs() <= 1e-12);
        assert!((hi - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn kernel_csv_round_trip() {
        let k = KernelTable::from_fn(5, |t, s| t * t + 0.5 * s);
        let text = k.to_csv();
        let back = KernelTable::from_csv(&text).unwrap();
        assert_eq!(back, k);

        let parsed = KernelTable::from_csv("# comment\n0,0,1.5\n1,1,2.5\n").unwrap();
        assert_eq!(parsed.n(), 2);
        assert_eq!(parsed.get(0, 0), 1.5);
        assert_eq!(parsed.get(0, 1), 0.0);
        assert!(KernelTable::from_csv("0,0\n").is_err());
        assert!(KernelTable::from_csv("").is_err());
    }

    #[test]
    fn tr_action_matches_adjoint_apply() {
        let g = grid(7);
        let a = L2Operator::from_fn(g, |i, j| ((3 * i + 5 * j) % 7) as f64 / 3.0);
        let z: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).cos()).collect();
        let w = a.tr_action(&z);
        let w2 = a.mat().tr_matvec(&z);
        assert_eq!(w, w2);

        let m = L2Operator::multiplication(g, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let wm = m.tr_action(&z);
        for i in 0..7 {
            assert_eq!(wm[i], (i + 1) as f64 * z[i]);
        }
    }
}
