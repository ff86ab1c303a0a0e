//! Executable inequality and identity checks on Gram geometry. Each check
//! evaluates one concrete instance and reports a signed margin; randomized
//! suites over many instances live in `suites`.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{GridSubset, L2Vec};
use crate::gram::{dual_vector, gram_det, gram_mat, pivoted_cholesky, project, GramSystem};
use crate::mat::{Lu, Mat};
use crate::operator::L2Operator;
use crate::path::covariance;
use crate::report::VerifyReport;
use crate::util::stream_rng;

const TINY: f64 = 1e-300;

/// Gram determinants contract by at least the smallest singular value to
/// the power 2k under the operator:
/// G(Ae_1,...,Ae_k) >= sigma_min(A)^{2k} * G(e_1,...,e_k).
/// Margin is (LHS - RHS) / LHS; tolerance 1e-10.
pub fn check_gram_lower_bound(a: &L2Operator, es: &[L2Vec]) -> Result<VerifyReport> {
    let (smin, smax) = a.sigma_extremes();
    if a.is_numerically_singular() {
        return Err(Error::SingularOperator {
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    let k = es.len();
    let g_e = gram_det(es)?;
    let mut aes = Vec::with_capacity(k);
    for e in es {
        aes.push(a.apply(e)?);
    }
    let g_ae = gram_det(&aes)?;
    let rhs = smin.powi(2 * k as i32) * g_e;
    let margin = (g_ae - rhs) / g_ae.max(TINY);
    Ok(VerifyReport::from_margin(
        "gram_lower_bound",
        1,
        margin,
        1e-10,
        Some(format!(
            "k={k} sigma_min={smin:.6e} G_e={g_e:.6e} G_Ae={g_ae:.6e}"
        )),
        None,
    ))
}

/// For a family with pairwise-orthogonal nonzero increments (taking
/// e_0 = 0), the inverse Gram quadratic form dominates the increment sum:
/// (B^{-1}(Ae)u, u) >= sigma_max(A)^{-2} * sum (du_i)^2 / ||de_i||^2.
/// Margin is (LHS - RHS) / max(LHS, RHS); tolerance 1e-8.
pub fn check_inverse_gram_quadratic(
    a: &L2Operator,
    es: &[L2Vec],
    u: &[f64],
) -> Result<VerifyReport> {
    let n = es.len();
    if n == 0 || u.len() != n {
        return Err(Error::invalid(format!(
            "need matching nonempty families, got {} vectors and {} reals",
            n,
            u.len()
        )));
    }
    // validate the orthogonal-increment precondition (e_0 = 0)
    let mut incs: Vec<L2Vec> = Vec::with_capacity(n);
    incs.push(es[0].clone());
    for i in 1..n {
        incs.push(es[i].sub(&es[i - 1])?);
    }
    for (i, d) in incs.iter().enumerate() {
        if d.norm_sq() == 0.0 {
            return Err(Error::invalid(format!("increment {i} is zero")));
        }
    }
    for i in 0..n {
        for j in 0..i {
            let ip = incs[i].inner(&incs[j])?;
            if ip.abs() > 1e-10 * incs[i].norm() * incs[j].norm() {
                return Err(Error::invalid(format!(
                    "increments {j} and {i} are not orthogonal (inner product {ip:.3e})"
                )));
            }
        }
    }

    let mut aes = Vec::with_capacity(n);
    for e in es {
        aes.push(a.apply(e)?);
    }
    let b = gram_mat(&aes)?;
    if pivoted_cholesky(&b).rank < n {
        return Err(Error::DependentFamily);
    }
    let lu = Lu::factor(&b).ok_or(Error::DependentFamily)?;
    let x = lu.solve(u);
    let lhs: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();

    let smax = a.sigma_max();
    let mut rhs = 0.0;
    let mut prev = 0.0;
    for i in 0..n {
        let du = u[i] - prev;
        prev = u[i];
        rhs += du * du / incs[i].norm_sq();
    }
    rhs /= smax * smax;

    let margin = (lhs - rhs) / lhs.max(rhs).max(TINY);
    Ok(VerifyReport::from_margin(
        "inverse_gram_quadratic",
        1,
        margin,
        1e-8,
        Some(format!("n={n} lhs={lhs:.6e} rhs={rhs:.6e}")),
        None,
    ))
}

/// Joint density of (x(s_1),...,x(s_n)) stays below the product-of-
/// increments Gaussian envelope:
/// p(u) <= (2pi)^{-n/2} sigma_min^{-n} (prod ds_j)^{-1/2}
///         * exp(-(1/2) sigma_max^{-2} sum (du_j)^2/ds_j).
/// Margin is (bound - p) / bound; tolerance 1e-12.
pub fn check_density_bound(a: &L2Operator, times: &[f64], us: &[f64]) -> Result<VerifyReport> {
    let n = times.len();
    if n == 0 || us.len() != n {
        return Err(Error::invalid(format!(
            "need matching nonempty times and values, got {n} and {}",
            us.len()
        )));
    }
    if times[0] <= 0.0 {
        return Err(Error::invalid("first time must be positive"));
    }
    for w in times.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::invalid("times must be strictly increasing"));
        }
    }
    let (smin, smax) = a.sigma_extremes();
    if a.is_numerically_singular() {
        return Err(Error::SingularOperator {
            sigma_min: smin,
            sigma_max: smax,
        });
    }

    let mut cov = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = covariance(a, times[i], times[j])?;
            cov.set(i, j, c);
            cov.set(j, i, c);
        }
    }
    let p = gaussian_density(&cov, us)?;

    let two_pi = 2.0 * std::f64::consts::PI;
    let mut log_bound = -0.5 * n as f64 * two_pi.ln() - n as f64 * smin.ln();
    let mut prev_t = 0.0;
    let mut prev_u = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        let ds = times[i] - prev_t;
        let du = us[i] - prev_u;
        log_bound -= 0.5 * ds.ln();
        quad += du * du / ds;
        prev_t = times[i];
        prev_u = us[i];
    }
    log_bound -= 0.5 * quad / (smax * smax);
    let bound = log_bound.exp();

    let margin = (bound - p) / bound.max(TINY);
    Ok(VerifyReport::from_margin(
        "density_bound",
        1,
        margin,
        1e-12,
        Some(format!("n={n} p={p:.6e} bound={bound:.6e}")),
        None,
    ))
}

/// Exact zero-mean Gaussian density at `u` for a covariance matrix.
fn gaussian_density(cov: &Mat, u: &[f64]) -> Result<f64> {
    let n = cov.n_rows;
    let chol = pivoted_cholesky(cov);
    if chol.rank < n {
        return Err(Error::DependentFamily);
    }
    let det = chol.det(n);
    if det <= 0.0 {
        return Err(Error::DependentFamily);
    }
    let lu = Lu::factor(cov).ok_or(Error::DependentFamily)?;
    let x = lu.solve(u);
    let quad: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok((-0.5 * quad - 0.5 * det.ln() - 0.5 * n as f64 * two_pi.ln()).exp())
}

/// Projecting transfers no mass: when (f, e_i) = (g, Qe_i) for all i and Q
/// is an orthogonal projection, ||P_span{e} f|| <= ||P_span{Qe} g||.
/// Margin is (RHS - LHS) / max(LHS, RHS); tolerance 1e-10.
pub fn check_projection_transfer(
    q: &L2Operator,
    es: &[L2Vec],
    f: &L2Vec,
    g: &L2Vec,
) -> Result<VerifyReport> {
    validate_projection(q)?;
    let mut qes = Vec::with_capacity(es.len());
    for e in es {
        qes.push(q.apply(e)?);
    }
    let qsys = GramSystem::new(qes.clone())?;
    if !qsys.is_full_rank() {
        return Err(Error::DependentFamily);
    }
    // matching-moments precondition
    for (i, (e, qe)) in es.iter().zip(&qes).enumerate() {
        let lhs = f.inner(e)?;
        let rhs = g.inner(qe)?;
        let scale = f.norm().max(g.norm()).max(1.0) * e.norm().max(1.0);
        if (lhs - rhs).abs() > 1e-8 * scale {
            return Err(Error::invalid(format!(
                "moment {i} mismatch: (f,e)={lhs:.6e} vs (g,Qe)={rhs:.6e}"
            )));
        }
    }
    let p1 = project(es, f)?.norm();
    let p2 = project(&qes, g)?.norm();
    let margin = (p2 - p1) / p1.max(p2).max(TINY);
    Ok(VerifyReport::from_margin(
        "projection_transfer",
        1,
        margin,
        1e-10,
        Some(format!("n={} lhs={p1:.6e} rhs={p2:.6e}", es.len())),
        None,
    ))
}

/// Builds an f with the matching moments required by
/// [`check_projection_transfer`]: the representer in span{e_i} of the
/// functional e_i -> (g, Qe_i).
pub fn synthesize_matching_pair(
    q: &L2Operator,
    es: &[L2Vec],
    g: &L2Vec,
) -> Result<L2Vec> {
    if es.is_empty() {
        return Err(Error::invalid("need at least one spanning vector"));
    }
    let sys = GramSystem::new(es.to_vec())?;
    if !sys.is_full_rank() {
        return Err(Error::DependentFamily);
    }
    let mut m = Vec::with_capacity(es.len());
    for e in es {
        m.push(g.inner(&q.apply(e)?)?);
    }
    let lambda = sys.solve(&m)?;
    let mut f = L2Vec::zero(g.grid());
    for (e, &l) in es.iter().zip(&lambda) {
        f = f.add(&e.scale(l))?;
    }
    Ok(f)
}

/// Probabilistic sanity check that Q is self-adjoint and idempotent, via a
/// handful of seeded probe vectors (cheap at any dimension).
fn validate_projection(q: &L2Operator) -> Result<()> {
    let grid = q.grid();
    let mut rng = stream_rng(0x51, "projection_probe", 0);
    for _ in 0..4 {
        let v = L2Vec::from_raw(
            grid,
            (0..grid.n_cells())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        );
        let w = L2Vec::from_raw(
            grid,
            (0..grid.n_cells())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        );
        let qv = q.apply(&v)?;
        let qqv = q.apply(&qv)?;
        if qqv.sub(&qv)?.norm() > 1e-8 * v.norm() {
            return Err(Error::invalid("operator is not idempotent"));
        }
        let sym = (q.apply(&v)?.inner(&w)? - v.inner(&q.apply(&w)?)?).abs();
        if sym > 1e-8 * v.norm() * w.norm() {
            return Err(Error::invalid("operator is not self-adjoint"));
        }
    }
    Ok(())
}

/// Orthogonal projection onto the complement of span{vs}, as an operator.
pub fn span_complement_projection(vs: &[L2Vec]) -> Result<L2Operator> {
    if vs.is_empty() {
        return Err(Error::invalid("need at least one spanning vector"));
    }
    let grid = vs[0].grid();
    let sys = GramSystem::new(vs.to_vec())?;
    let subset = sys.independent_subset();
    if subset.is_empty() {
        return Err(Error::invalid("cannot project against a zero family"));
    }
    let n = grid.n_cells();
    let r = subset.len();
    // Euclidean Gram of the subfamily; the cell width cancels between the
    // Gram inverse and the moment row, so this is the exact L2 projection.
    let mut g = Mat::zeros(r, r);
    for (a, &ia) in subset.iter().enumerate() {
        for (b, &ib) in subset.iter().enumerate() {
            g.set(
                a,
                b,
                crate::grid::dot(sys.vectors()[ia].coeffs(), sys.vectors()[ib].coeffs()),
            );
        }
    }
    let lu = Lu::factor(&g).ok_or(Error::DependentFamily)?;
    let inv = lu.inverse();
    let mut q = Mat::identity(n);
    for a in 0..r {
        let va = sys.vectors()[subset[a]].coeffs();
        for b in 0..r {
            let w = inv.get(a, b);
            if w == 0.0 {
                continue;
            }
            let vb = sys.vectors()[subset[b]].coeffs();
            for i in 0..n {
                let vai = va[i];
                if vai == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let cur = q.get(i, j);
                    q.set(i, j, cur - w * vai * vb[j]);
                }
            }
        }
    }
    Ok(crate::operator::from_projection_matrix(grid, q, r < n))
}

/// Gram determinant of indicator families dominates the product of
/// residual lengths: Gamma(1_D1,...,1_Dn) >= prod_k |D_k \ union_{j<k} D_j|.
/// Absolute margin; tolerance 1e-12.
pub fn indicator_gram_bound(deltas: &[GridSubset]) -> Result<VerifyReport> {
    if deltas.is_empty() {
        return Err(Error::invalid("need at least one subset"));
    }
    let grid = deltas[0].grid();
    for d in deltas {
        if d.grid() != grid {
            return Err(Error::GridMismatch(grid.n_cells(), d.grid().n_cells()));
        }
    }
    let vs: Vec<L2Vec> = deltas.iter().map(|d| d.indicator_vec()).collect();
    let gamma = gram_det(&vs)?;

    let mut seen = vec![false; grid.n_cells()];
    let mut rhs = 1.0;
    for d in deltas {
        let fresh = d
            .mask()
            .iter()
            .zip(&seen)
            .filter(|(&m, &s)| m && !s)
            .count();
        rhs *= grid.h() * fresh as f64;
        for (s, &m) in seen.iter_mut().zip(d.mask()) {
            *s = *s || m;
        }
    }

    let margin = gamma - rhs;
    Ok(VerifyReport::from_margin(
        "indicator_gram_bound",
        1,
        margin,
        1e-12,
        Some(format!("n={} gamma={gamma:.6e} rhs={rhs:.6e}", deltas.len())),
        None,
    ))
}

/// Integrability of the indicator-curve singularity: evaluates
/// I(y) = int_0^1 dt / ||1_[0,t] - y||^{1+alpha} exactly per cell (the
/// squared distance is piecewise linear in t), and checks it against the
/// explicit sublevel-set majorant
/// C(alpha) = b + 4 b^{(alpha-1)/(1+alpha)} (1+alpha)/(1-alpha),
/// b = 2^{1+alpha}, valid for every y. Returns the integral and a report
/// with margin (C - I)/C at tolerance 0.
pub fn check_singularity_integrability(
    y: &L2Vec,
    alpha: f64,
) -> Result<(f64, VerifyReport)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::BadAlpha(alpha));
    }
    let grid = y.grid();
    let n = grid.n_cells();
    let h = grid.h();
    let beta = 0.5 * (1.0 + alpha);
    // d^2(t) on cell i starts at a_i and moves with slope 1 - 2 y_i:
    // the indicator gains the cell, the reference y loses it.
    let mut a = y.norm_sq();
    let mut total = 0.0;
    for i in 0..n {
        let b = 1.0 - 2.0 * y.coeffs()[i];
        let a_clamped = a.max(0.0);
        total += cell_integral(a_clamped, b, h, beta);
        a += b * h;
    }

    let b_split = 2f64.powf(1.0 + alpha);
    let majorant =
        b_split + 4.0 * b_split.powf((alpha - 1.0) / (1.0 + alpha)) * (1.0 + alpha) / (1.0 - alpha);
    let margin = if total.is_finite() {
        (majorant - total) / majorant
    } else {
        f64::NEG_INFINITY
    };
    let report = VerifyReport::from_margin(
        "singularity_integrability",
        1,
        margin,
        0.0,
        Some(format!("alpha={alpha} integral={total:.6e} majorant={majorant:.6e}")),
        None,
    );
    Ok((total, report))
}

/// int_0^h (a + b t)^{-beta} dt, exact antiderivative, for a >= 0 and
/// 0 < beta < 1. The endpoint value is clamped at zero: the distance
/// cannot go negative, only roundoff can push it there.
fn cell_integral(a: f64, b: f64, h: f64, beta: f64) -> f64 {
    let pow = 1.0 - beta;
    if b == 0.0 {
        return if a == 0.0 {
            f64::INFINITY
        } else {
            h * a.powf(-beta)
        };
    }
    let end = (a + b * h).max(0.0);
    (end.powf(pow) - a.powf(pow)) / (b * pow)
}

/// The determinant-product identity linking increments, the dual vector,
/// and the span geometry of an independent family (n <= 8):
/// (i)  G(f_2-f_1,...,f_n-f_{n-1}) = ||f||^2 G(f_1,...,f_n), f the dual;
/// (ii) projecting onto the increment span equals projecting onto the
///      span and removing the dual direction;
/// (iii) the two closed-form Gaussian transforms built from each side
///      agree at 20 seeded probe points.
/// Margin is min over parts of (tol_part - err_part)/tol_part, reported at
/// tolerance 0.
pub fn check_delta_product_identity(fs: &[L2Vec], seed: u64) -> Result<VerifyReport> {
    let n = fs.len();
    if n == 0 {
        return Err(Error::invalid("need at least one vector"));
    }
    if n > 8 {
        return Err(Error::TooManyVectors(n));
    }
    let sys = GramSystem::new(fs.to_vec())?;
    if !sys.is_full_rank() {
        return Err(Error::DependentFamily);
    }
    let grid = fs[0].grid();
    let f = dual_vector(fs)?;
    let f_norm_sq = f.norm_sq();

    let mut incs = Vec::with_capacity(n.saturating_sub(1));
    for j in 1..n {
        incs.push(fs[j].sub(&fs[j - 1])?);
    }
    let g_r = gram_det(&incs)?;
    let g_f = sys.det();

    // (i) determinant identity, relative error at 1e-8
    let lhs = g_r;
    let rhs = f_norm_sq * g_f;
    let err_det = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(TINY);
    let tol_det = 1e-8;

    // (ii) and (iii) on seeded probes
    let mut rng = stream_rng(seed, "delta_product_h", 0);
    let mut err_proj = 0.0f64;
    let mut err_transform = 0.0f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    let pref = two_pi.powf(-0.5 * (n as f64 - 1.0));
    for _ in 0..20 {
        let hvec = L2Vec::from_raw(
            grid,
            (0..grid.n_cells())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        );
        let p_inc = if incs.is_empty() {
            L2Vec::zero(grid)
        } else {
            project(&incs, &hvec)?
        };
        let p_span = project(fs, &hvec)?;
        let p_dual = p_span.sub(&f.scale(hvec.inner(&f)? / f_norm_sq))?;
        let diff = p_inc.sub(&p_dual)?.norm() / hvec.norm().max(1.0);
        err_proj = err_proj.max(diff);

        let t_inc = pref * g_r.powf(-0.5) * (-0.5 * p_inc.norm_sq()).exp();
        let t_dual =
            pref / (g_f.sqrt() * f_norm_sq.sqrt()) * (-0.5 * p_dual.norm_sq()).exp();
        let terr = (t_inc - t_dual).abs() / t_inc.abs().max(t_dual.abs()).max(TINY);
        err_transform = err_transform.max(terr);
    }
    let tol_proj = 1e-9;
    let tol_transform = 1e-8;

    let parts = [
        ("determinant", err_det, tol_det),
        ("projector", err_proj, tol_proj),
        ("transform", err_transform, tol_transform),
    ];
    let mut margin = f64::INFINITY;
    let mut worst = "";
    for &(name, err, tol) in &parts {
        let m = (tol - err) / tol;
        if m < margin {
            margin = m;
            worst = name;
        }
    }
    Ok(VerifyReport::from_margin(
        "delta_product_identity",
        1,
        margin,
        0.0,
        Some(format!(
            "n={n} worst_part={worst} det_err={err_det:.3e} proj_err={err_proj:.3e} transform_err={err_transform:.3e}"
        )),
        Some(seed),
    ))
}
