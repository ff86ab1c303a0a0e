//! Gram matrices and determinants, projections onto (possibly degenerate)
//! spans, dual vectors, and the product-of-conditional-variances ratio that
//! quantifies local nondeterminism of a path family.

use crate::error::{Error, Result};
use crate::grid::{dot, L2Vec};
use crate::mat::{Lu, Mat};

/// Hard cap on family size: determinants beyond this are out of scope.
pub const MAX_VECTORS: usize = 32;

/// Relative pivot threshold below which a direction counts as dependent.
const PIVOT_REL_TOL: f64 = 1e-12;

/// Determinants below this clamp to exact zero.
const DET_CLAMP: f64 = 1e-300;

pub(crate) fn gram_mat(vs: &[L2Vec]) -> Result<Mat> {
    if vs.len() > MAX_VECTORS {
        return Err(Error::TooManyVectors(vs.len()));
    }
    let k = vs.len();
    let mut g = Mat::zeros(k, k);
    if k == 0 {
        return Ok(g);
    }
    let grid = vs[0].grid();
    for v in vs {
        if v.grid() != grid {
            return Err(Error::GridMismatch(grid.n_cells(), v.grid().n_cells()));
        }
    }
    let h = grid.h();
    for i in 0..k {
        for j in 0..=i {
            let val = h * dot(vs[i].coeffs(), vs[j].coeffs());
            g.set(i, j, val);
            g.set(j, i, val);
        }
    }
    Ok(g)
}

/// Outcome of a fully pivoted Cholesky factorization of a PSD matrix:
/// the pivot order, the pivot values (conditional variances), and the
/// numerical rank under the relative threshold.
pub(crate) struct PivChol {
    pub perm: Vec<usize>,
    pub pivots: Vec<f64>,
    pub rank: usize,
}

impl PivChol {
    /// Determinant implied by the factorization: product of pivots when
    /// full-rank, zero otherwise, with subnormal results clamped to zero.
    pub fn det(&self, k: usize) -> f64 {
        if self.rank < k {
            return 0.0;
        }
        let d: f64 = self.pivots.iter().product();
        if d < DET_CLAMP {
            0.0
        } else {
            d
        }
    }
}

/// Fully pivoted Cholesky on a symmetric PSD matrix. Works on a permuted
/// copy; a pivot below `PIVOT_REL_TOL` times the largest pivot stops the
/// factorization and fixes the rank.
pub(crate) fn pivoted_cholesky(g: &Mat) -> PivChol {
    let k = g.n_rows;
    let mut b = g.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut pivots = Vec::with_capacity(k);
    let mut max_pivot = 0.0f64;
    let mut rank = k;
    for m in 0..k {
        let mut p = m;
        let mut best = b.get(m, m);
        for i in m + 1..k {
            let v = b.get(i, i);
            if v > best {
                best = v;
                p = i;
            }
        }
        if p != m {
            perm.swap(m, p);
            for j in 0..k {
                let t = b.get(m, j);
                b.set(m, j, b.get(p, j));
                b.set(p, j, t);
            }
            for i in 0..k {
                let t = b.get(i, m);
                b.set(i, m, b.get(i, p));
                b.set(i, p, t);
            }
        }
        let pivot = b.get(m, m);
        max_pivot = max_pivot.max(pivot);
        if pivot <= 0.0 || pivot < PIVOT_REL_TOL * max_pivot {
            rank = m;
            break;
        }
        pivots.push(pivot);
        let root = pivot.sqrt();
        for i in m + 1..k {
            let l = b.get(i, m) / root;
            b.set(i, m, l);
        }
        for i in m + 1..k {
            let lim = b.get(i, m);
            for j in m + 1..=i {
                let v = b.get(i, j) - lim * b.get(j, m);
                b.set(i, j, v);
                b.set(j, i, v);
            }
        }
    }
    PivChol { perm, pivots, rank }
}

/// Gram determinant of a family of step functions. Degenerate families
/// return 0, never an error; values below 1e-300 clamp to 0.
pub fn gram_det(vs: &[L2Vec]) -> Result<f64> {
    let g = gram_mat(vs)?;
    if vs.is_empty() {
        return Ok(1.0);
    }
    Ok(pivoted_cholesky(&g).det(vs.len()))
}

/// A family of vectors with its Gram matrix, determinant, and rank data.
#[derive(Debug, Clone)]
pub struct GramSystem {
    vectors: Vec<L2Vec>,
    gram: Mat,
    det: f64,
    perm: Vec<usize>,
    rank: usize,
}

impl GramSystem {
    pub fn new(vectors: Vec<L2Vec>) -> Result<GramSystem> {
        let gram = gram_mat(&vectors)?;
        let k = vectors.len();
        let chol = pivoted_cholesky(&gram);
        let det = if k == 0 { 1.0 } else { chol.det(k) };
        Ok(GramSystem {
            vectors,
            gram,
            det,
            perm: chol.perm,
            rank: chol.rank,
        })
    }

    pub fn vectors(&self) -> &[L2Vec] {
        &self.vectors
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn gram_entry(&self, i: usize, j: usize) -> f64 {
        self.gram.get(i, j)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.vectors.len()
    }

    /// Indices of a maximal independent subfamily, in pivot order.
    pub fn independent_subset(&self) -> &[usize] {
        &self.perm[..self.rank]
    }

    /// Solve G x = rhs for a full-rank system.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if !self.is_full_rank() {
            return Err(Error::DependentFamily);
        }
        if rhs.len() != self.vectors.len() {
            return Err(Error::invalid(format!(
                "right-hand side length {} does not match family size {}",
                rhs.len(),
                self.vectors.len()
            )));
        }
        let lu = Lu::factor(&self.gram).ok_or(Error::DependentFamily)?;
        Ok(lu.solve(rhs))
    }

}

/// Orthogonal projection of `h` onto the span of `vs`. Degenerate families
/// are handled by projecting onto a max-pivot independent subfamily.
pub fn project(vs: &[L2Vec], h: &L2Vec) -> Result<L2Vec> {
    let sys = GramSystem::new(vs.to_vec())?;
    project_with(&sys, h)
}

/// Same as [`project`], reusing an existing [`GramSystem`].
pub fn project_with(sys: &GramSystem, h: &L2Vec) -> Result<L2Vec> {
    let subset = sys.independent_subset();
    if subset.is_empty() {
        return Ok(L2Vec::zero(h.grid()));
    }
    let r = subset.len();
    let mut g = Mat::zeros(r, r);
    for (a, &ia) in subset.iter().enumerate() {
        for (b, &ib) in subset.iter().enumerate() {
            g.set(a, b, sys.gram_entry(ia, ib));
        }
    }
    let mut rhs = Vec::with_capacity(r);
    for &i in subset {
        rhs.push(sys.vectors()[i].inner(h)?);
    }
    // The subfamily is independent by construction of the pivot order.
    let lu = Lu::factor(&g).ok_or(Error::DependentFamily)?;
    let lambda = lu.solve(&rhs);
    let mut out = L2Vec::zero(h.grid());
    for (&i, &li) in subset.iter().zip(&lambda) {
        out = out.add(&sys.vectors()[i].scale(li))?;
    }
    Ok(out)
}

/// The unique f in span{fs} with (f, f_k) = 1 for every k.
pub fn dual_vector(fs: &[L2Vec]) -> Result<L2Vec> {
    if fs.is_empty() {
        return Err(Error::invalid("dual vector needs at least one element"));
    }
    let sys = GramSystem::new(fs.to_vec())?;
    if !sys.is_full_rank() {
        return Err(Error::DependentFamily);
    }
    let lambda = sys.solve(&vec![1.0; fs.len()])?;
    let mut f = L2Vec::zero(fs[0].grid());
    for (fi, &li) in fs.iter().zip(&lambda) {
        f = f.add(&fi.scale(li))?;
    }
    Ok(f)
}

/// Nondeterminism ratio of a path family at given times: the product of
/// conditional variance ratios
/// G(g(t1), dg(t1), ..., dg(t_{m-1})) / prod of squared norms,
/// computed factor by factor from an in-order Cholesky so every factor
/// lies in [0,1]. Independent-increment families give exactly 1.
pub fn ln_ratio<F>(path: F, times: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<L2Vec>,
{
    if times.is_empty() {
        return Err(Error::invalid("nondeterminism ratio needs at least one time"));
    }
    for w in times.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::invalid(format!(
                "times must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let m = times.len();
    let mut vs: Vec<L2Vec> = Vec::with_capacity(m);
    let g1 = path(times[0])?;
    vs.push(g1);
    for i in 1..m {
        let a = path(times[i - 1])?;
        let b = path(times[i])?;
        vs.push(b.sub(&a)?);
    }
    // Zero "increments" are named by their time pair; the first vector is
    // the increment from time 0.
    for (i, v) in vs.iter().enumerate() {
        if v.norm_sq() == 0.0 {
            let (j, tj) = (i + 1, times[i]);
            let (i0, ti) = if i == 0 { (0, 0.0) } else { (i, times[i - 1]) };
            return Err(Error::ZeroIncrement {
                i: i0,
                ti,
                j,
                tj,
            });
        }
    }
    let g = gram_mat(&vs)?;
    Ok(conditional_variance_product(&g))
}

/// prod_m d_m / G_mm from the in-order Cholesky of a PSD matrix, where d_m
/// is the m-th pivot (the conditional variance of vector m given the first
/// m-1). A pivot below the dependence tolerance relative to its own
/// diagonal entry clamps the product to exact 0.
pub(crate) fn conditional_variance_product(g: &Mat) -> f64 {
    let k = g.n_rows;
    let mut l = Mat::zeros(k, k);
    let mut ratio = 1.0;
    for m in 0..k {
        let mut d = g.get(m, m);
        for j in 0..m {
            let mut acc = g.get(m, j);
            for p in 0..j {
                acc -= l.get(m, p) * l.get(j, p);
            }
            let lmj = acc / l.get(j, j);
            l.set(m, j, lmj);
            d -= lmj * lmj;
        }
        if d <= PIVOT_REL_TOL * g.get(m, m) {
            return 0.0;
        }
        ratio *= d / g.get(m, m);
        l.set(m, m, d.sqrt());
    }
    ratio
}
