//! Randomized structural properties, one test per documented invariant
//! that the module unit tests do not already pin at this breadth.

use integrator_lab::gram::{gram_det, ln_ratio, project};
use integrator_lab::local_time::{local_time_kernel, occupation_density, Bins};
use integrator_lab::noise::sample_noise_stream;
use integrator_lab::path::{bridge_path, covariance, integrator_path};
use integrator_lab::selfx::{et2_planar_direct2d, et2_planar_exact};
use integrator_lab::util::{mean_se, stream_rng};
use integrator_lab::{GridSpec, KernelTable, L2Operator, L2Vec};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_vec(grid: GridSpec, rng: &mut impl Rng) -> L2Vec {
    let coeffs = (0..grid.n_cells())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    L2Vec::new(grid, coeffs).unwrap()
}

/// A random draw from the public operator families, including one
/// composition. Every member is far from singular by construction.
fn random_operator(grid: GridSpec, rng: &mut impl Rng) -> L2Operator {
    let n = grid.n_cells();
    match rng.random_range(0..5u32) {
        0 => L2Operator::identity(grid),
        1 => {
            let vals: Vec<f64> = (0..n)
                .map(|_| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * (0.3 + 1.7 * rng.random::<f64>())
                })
                .collect();
            L2Operator::multiplication(grid, &vals).unwrap()
        }
        2 => {
            let c = 0.5 + 1.5 * rng.random::<f64>();
            L2Operator::volterra(grid, &KernelTable::constant(n, c)).unwrap()
        }
        3 => {
            let k = L2Operator::volterra(grid, &KernelTable::constant(n, 1.0)).unwrap();
            L2Operator::perturbation(&k, 1.2 * (rng.random::<f64>() - 0.5))
        }
        _ => {
            let vals: Vec<f64> = (0..n).map(|_| 0.3 + 1.7 * rng.random::<f64>()).collect();
            let m = L2Operator::multiplication(grid, &vals).unwrap();
            let k = L2Operator::volterra(grid, &KernelTable::constant(n, 1.0)).unwrap();
            m.compose(&L2Operator::perturbation(&k, 0.4)).unwrap()
        }
    }
}

#[test]
fn adjoint_identity_holds_on_random_triples() {
    let mut rng = stream_rng(0x0ad7, "adjoint", 0);
    for _ in 0..1000 {
        let grid = GridSpec::new(rng.random_range(4..=64)).unwrap();
        let op = random_operator(grid, &mut rng);
        let f = normal_vec(grid, &mut rng);
        let g = normal_vec(grid, &mut rng);
        let lhs = op.apply(&f).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&op.adjoint().apply(&g).unwrap()).unwrap();
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        assert!(
            (lhs - rhs).abs() <= 1e-12 * scale,
            "adjoint mismatch: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn inversion_round_trips_random_vectors() {
    let mut rng = stream_rng(0x01f2, "invert", 0);
    let mut tested = 0;
    while tested < 300 {
        let grid = GridSpec::new(rng.random_range(4..=64)).unwrap();
        let op = random_operator(grid, &mut rng);
        let (smin, smax) = op.sigma_extremes();
        if smin < 1e-6 * smax {
            continue;
        }
        let inv = op.invert().unwrap();
        let f = normal_vec(grid, &mut rng);
        let back = inv.apply(&op.apply(&f).unwrap()).unwrap();
        let rel = back.sub(&f).unwrap().norm() / f.norm();
        assert!(rel <= 1e-9, "round trip drifted by {rel:.3e}");
        tested += 1;
    }
}

#[test]
fn increment_quadratic_form_respects_the_operator_norm_bound() {
    let mut rng = stream_rng(0x9b1d, "quadratic", 0);
    for _ in 0..300 {
        let n = rng.random_range(16..=64);
        let grid = GridSpec::new(n).unwrap();
        let op = random_operator(grid, &mut rng);
        let mut nodes: Vec<usize> = (0..=n).collect();
        let m = rng.random_range(2..=8).min(nodes.len() - 1);
        // random strictly increasing node times t_0 < ... < t_m
        for i in (1..nodes.len()).rev() {
            let j = rng.random_range(0..=i);
            nodes.swap(i, j);
        }
        let mut picked = nodes[..=m].to_vec();
        picked.sort_unstable();
        picked.dedup();
        if picked.len() < 2 {
            continue;
        }
        let mut image = L2Vec::zero(grid);
        let mut rhs_sum = 0.0;
        for w in picked.windows(2) {
            let (s, t) = (grid.node(w[0]), grid.node(w[1]));
            let a: f64 = StandardNormal.sample(&mut rng);
            let step = op.apply(&L2Vec::indicator(grid, s, t).unwrap()).unwrap();
            image = image.add(&step.scale(a)).unwrap();
            rhs_sum += a * a * (t - s);
        }
        let (_, smax) = op.sigma_extremes();
        let lhs = image.norm_sq();
        let rhs = smax * smax * rhs_sum;
        assert!(
            lhs <= rhs * (1.0 + 1e-10) + 1e-304,
            "quadratic form {lhs} exceeded bound {rhs}"
        );
    }
}

#[test]
fn gram_det_shrinks_when_a_vector_is_appended() {
    let mut rng = stream_rng(0x6a4d, "hadamard", 0);
    for _ in 0..300 {
        let grid = GridSpec::new(rng.random_range(4..=32)).unwrap();
        let k = rng.random_range(2..=5);
        let vs: Vec<L2Vec> = (0..k).map(|_| normal_vec(grid, &mut rng)).collect();
        let head = gram_det(&vs[..k - 1]).unwrap();
        let full = gram_det(&vs).unwrap();
        let cap = head * vs[k - 1].norm_sq();
        assert!(
            full <= cap * (1.0 + 1e-8) + 1e-300,
            "det grew past the product cap: {full} > {cap}"
        );
        assert!(full >= 0.0);
    }
}

#[test]
fn projection_is_idempotent_and_self_adjoint() {
    let mut rng = stream_rng(0x59f3, "project", 0);
    for _ in 0..300 {
        let grid = GridSpec::new(rng.random_range(4..=32)).unwrap();
        let k = rng.random_range(1..=4);
        let vs: Vec<L2Vec> = (0..k).map(|_| normal_vec(grid, &mut rng)).collect();
        let h = normal_vec(grid, &mut rng);
        let g = normal_vec(grid, &mut rng);
        let p = project(&vs, &h).unwrap();
        let pp = project(&vs, &p).unwrap();
        assert!(
            pp.sub(&p).unwrap().norm() <= 1e-10 * (1.0 + p.norm()),
            "projection is not idempotent"
        );
        let lhs = p.inner(&g).unwrap();
        let rhs = h.inner(&project(&vs, &g).unwrap()).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * (1.0 + h.norm() * g.norm()),
            "projection is not self-adjoint: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn nondeterminism_ratio_lies_in_unit_interval_and_matches_the_gram_ratio() {
    let mut rng = stream_rng(0xd127, "ratio", 0);
    for _ in 0..200 {
        let grid = GridSpec::new(32).unwrap();
        let op = random_operator(grid, &mut rng);
        if op.is_numerically_singular() {
            continue;
        }
        let m = rng.random_range(1..=4usize);
        let mut idx: Vec<usize> = (1..=7).map(|i| i * 4).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let mut idx = idx[..m].to_vec();
        idx.sort_unstable();
        let times: Vec<f64> = idx.iter().map(|&k| grid.node(k)).collect();

        let path = |t: f64| op.apply(&L2Vec::prefix_indicator(grid, t).unwrap());
        let ratio = ln_ratio(path, &times).unwrap();
        assert!(
            (-1e-12..=1.0 + 1e-12).contains(&ratio),
            "ratio {ratio} escaped [0, 1]"
        );

        // direct route: Gram determinant of the increment family over the
        // product of its squared norms
        let mut vs = vec![op.apply(&L2Vec::prefix_indicator(grid, times[0]).unwrap()).unwrap()];
        for w in times.windows(2) {
            let a = op.apply(&L2Vec::prefix_indicator(grid, w[0]).unwrap()).unwrap();
            let b = op.apply(&L2Vec::prefix_indicator(grid, w[1]).unwrap()).unwrap();
            vs.push(b.sub(&a).unwrap());
        }
        let direct =
            gram_det(&vs).unwrap() / vs.iter().map(L2Vec::norm_sq).product::<f64>();
        assert!(
            (ratio - direct).abs() <= 1e-8 * (1.0 + direct),
            "factorized ratio {ratio} vs direct {direct}"
        );
    }
}

#[test]
fn pairing_variance_matches_the_squared_norm() {
    let grid = GridSpec::new(16).unwrap();
    let draws = 10_000u64;
    let noises: Vec<_> = (0..draws)
        .map(|r| sample_noise_stream(grid, 0xa5a5, "isometry", r))
        .collect();
    let mut rng = stream_rng(0xa5a5, "isometry_f", 1);
    for _ in 0..50 {
        let f = normal_vec(grid, &mut rng);
        let xs: Vec<f64> = noises.iter().map(|z| z.pairing(&f).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (xs.len() - 1) as f64;
        let target = f.norm_sq();
        // sampling error of a Gaussian variance estimate
        let se = target * (2.0 / (draws as f64 - 1.0)).sqrt();
        assert!(
            (var - target).abs() <= 3.0 * se,
            "variance {var} vs norm^2 {target} (3 se = {:.3e})",
            3.0 * se
        );
    }
}

#[test]
fn bridge_shift_and_covariance_follow_the_conditioned_law() {
    let grid = GridSpec::new(64).unwrap();
    // the endpoint enters as a pure deterministic drift a * t
    let noise = [sample_noise_stream(grid, 7, "bridge_law", 0)];
    let with_drift = bridge_path(&[0.7], &noise).unwrap();
    let centered = bridge_path(&[0.0], &noise).unwrap();
    for k in 0..=grid.n_cells() {
        let want = 0.7 * grid.node(k);
        let got = with_drift.values()[k] - centered.values()[k];
        assert!((got - want).abs() <= 1e-12, "drift at node {k}: {got} vs {want}");
    }

    // the centered bridge law is the integrator of the projection that
    // removes the constant direction; its covariance has the closed form
    let ones = L2Vec::indicator(grid, 0.0, 1.0).unwrap();
    let proj = L2Operator::complement_projection(&ones).unwrap();
    for &s in &[0.25f64, 0.5, 0.625, 0.875] {
        for &t in &[0.25f64, 0.5, 0.625, 0.875] {
            let want = s.min(t) - s * t;
            let got = covariance(&proj, s, t).unwrap();
            assert!(
                (got - want).abs() <= 1e-12,
                "covariance at ({s}, {t}): {got} vs {want}"
            );
        }
    }
}

#[test]
fn kernel_and_binned_estimators_agree_at_matched_scales() {
    let grid = GridSpec::new(1024).unwrap();
    let op = L2Operator::identity(grid);
    let du = 0.1;
    let eps = du * du;
    let reps = 200u64;
    let diffs: Vec<f64> = (0..reps)
        .map(|r| {
            let noise = sample_noise_stream(grid, 5, "matched_scales", r);
            let path = integrator_path(&op, &noise).unwrap();
            let kernel = local_time_kernel(&path, 0.0, 1.0, eps).unwrap();
            let est = occupation_density(&path, Bins::Width(du)).unwrap();
            let nearest = est
                .u_grid
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
                .unwrap();
            kernel - est.values[nearest]
        })
        .collect();
    let (mean, se) = mean_se(&diffs);
    assert!(
        mean.abs() <= 2.0 * (se + du),
        "estimators disagree: mean diff {mean:.4} vs budget {:.4}",
        2.0 * (se + du)
    );
}

#[test]
fn planar_reduction_matches_direct_quadrature_across_the_range() {
    for &alpha in &[1.5, 2.0, 3.0] {
        for &a in &[2.0, 5.0, 20.0, 100.0] {
            let reduced = et2_planar_exact(a, alpha, 2).unwrap();
            let direct = et2_planar_direct2d(a, alpha, 2).unwrap();
            let rel = (reduced / direct - 1.0).abs();
            assert!(
                rel <= 5e-3,
                "norm {a}, exponent {alpha}: reduced {reduced} vs direct {direct} (rel {rel:.2e})"
            );
        }
    }
}

#[test]
fn sigma_extremes_match_a_dense_svd_in_both_size_regimes() {
    // 48 exercises the full eigensolve, 600 the iterative branch
    for &n in &[48usize, 600] {
        let grid = GridSpec::new(n).unwrap();
        let mut rng = stream_rng(0x51d5, "svd", n as u64);
        let vals: Vec<f64> = (0..n).map(|_| 0.3 + 1.7 * rng.random::<f64>()).collect();
        let m = L2Operator::multiplication(grid, &vals).unwrap();
        let k = L2Operator::volterra(grid, &KernelTable::constant(n, 1.0)).unwrap();
        let op = m.compose(&L2Operator::perturbation(&k, 0.4)).unwrap();
        let (smin, smax) = op.sigma_extremes();
        let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| op.entry(i, j));
        let sv = dense.singular_values();
        let (svd_max, svd_min) = (sv.max(), sv.min());
        assert!(
            (smax / svd_max - 1.0).abs() <= 1e-6,
            "n = {n}: sigma_max {smax} vs svd {svd_max}"
        );
        assert!(
            (smin / svd_min - 1.0).abs() <= 1e-6,
            "n = {n}: sigma_min {smin} vs svd {svd_min}"
        );
    }
}

proptest! {
    #[test]
    fn indicator_norm_squared_is_the_interval_length(
        n in 2usize..400,
        lo in 0.0f64..1.0,
        hi in 0.0f64..1.0,
    ) {
        let grid = GridSpec::new(n).unwrap();
        let (s, t) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        // snap to nodes first so the claim is about aligned intervals
        let (s, t) = (grid.node(grid.snap(s)), grid.node(grid.snap(t)));
        let ind = L2Vec::indicator(grid, s, t).unwrap();
        prop_assert!((ind.norm_sq() - (t - s)).abs() <= 1e-14);
    }

    #[test]
    fn occupation_mass_equals_the_time_horizon(
        n in 4usize..512,
        width in 0.05f64..0.8,
        seed in 0u64..1_000_000,
    ) {
        let grid = GridSpec::new(n).unwrap();
        let op = L2Operator::identity(grid);
        let noise = sample_noise_stream(grid, seed, "mass", 0);
        let path = integrator_path(&op, &noise).unwrap();
        let est = occupation_density(&path, Bins::Width(width)).unwrap();
        prop_assert!((est.mass() - 1.0).abs() <= 1e-12);
    }
}
