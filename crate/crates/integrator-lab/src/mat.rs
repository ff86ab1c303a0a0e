//! Minimal dense linear algebra: row-major matrices, LU with partial
//! pivoting, and a pivoted Cholesky for Gram matrices. Kept private so the
//! public surface stays in grid/operator terms.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Mat {
        Mat {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// y = M x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    /// y = M^T x, without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += xi * a;
            }
        }
        y
    }

    /// C = self * other, ikj loop order for row-major locality.
    pub fn matmul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.n_cols, other.n_rows);
        let mut c = Mat::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let crow = &mut c.data[i * other.n_cols..(i + 1) * other.n_cols];
                for (cj, bj) in crow.iter_mut().zip(brow) {
                    *cj += aik * bj;
                }
            }
        }
        c
    }
}

/// LU factorization with partial pivoting of a square matrix.
pub(crate) struct Lu {
    lu: Mat,
    perm: Vec<usize>,
}

impl Lu {
    /// Returns None when a pivot is exactly zero (singular to working
    /// precision in the strict sense needed by inverse iteration).
    pub fn factor(a: &Mat) -> Option<Lu> {
        debug_assert_eq!(a.n_rows, a.n_cols);
        let n = a.n_rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in k + 1..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
                perm.swap(k, p);
            }
            let pivot = lu.get(k, k);
            for i in k + 1..n {
                let m = lu.get(i, k) / pivot;
                lu.set(i, k, m);
                if m != 0.0 {
                    for j in k + 1..n {
                        let v = lu.get(i, j) - m * lu.get(k, j);
                        lu.set(i, j, v);
                    }
                }
            }
        }
        Some(Lu { lu, perm })
    }

    pub fn n(&self) -> usize {
        self.lu.n_rows
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // Ly = Pb (unit lower triangular)
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc;
        }
        // Ux = y
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu.get(i, j) * x[j];
            }
            x[i] = acc / self.lu.get(i, i);
        }
        x
    }

    /// Solve A^T x = b using the same factorization: A^T = (PA)^T P =
    /// U^T L^T P, so solve U^T z = b, L^T w = z, x = P^T w.
    pub fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(b.len(), n);
        let mut z = b.to_vec();
        // U^T z = b (lower triangular with diag of U)
        for i in 0..n {
            let mut acc = z[i];
            for j in 0..i {
                acc -= self.lu.get(j, i) * z[j];
            }
            z[i] = acc / self.lu.get(i, i);
        }
        // L^T w = z (unit upper triangular)
        for i in (0..n).rev() {
            let mut acc = z[i];
            for j in i + 1..n {
                acc -= self.lu.get(j, i) * z[j];
            }
            z[i] = acc;
        }
        // x[perm[i]] = w[i]
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        let n = self.n();
        let mut inv = Mat::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix by cyclic Jacobi
/// rotations. Converges to machine precision, which matters because these
/// extremes feed inequality checks with 1e-8..1e-10 tolerances.
pub(crate) fn jacobi_eigen_extremes(a: &Mat) -> (f64, f64) {
    debug_assert_eq!(a.n_rows, a.n_cols);
    let n = a.n_rows;
    if n == 1 {
        return (a.get(0, 0), a.get(0, 0));
    }
    let mut b = a.clone();
    let off_norm = |m: &Mat| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j) * m.get(i, j);
                }
            }
        }
        s.sqrt()
    };
    let scale = b.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for _sweep in 0..40 {
        if off_norm(&b) <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = b.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = b.get(p, p);
                let aqq = b.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = b.get(k, p);
                    let akq = b.get(k, q);
                    b.set(k, p, c * akp - s * akq);
                    b.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = b.get(p, k);
                    let aqk = b.get(q, k);
                    b.set(p, k, c * apk - s * aqk);
                    b.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let d = b.get(i, i);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}
