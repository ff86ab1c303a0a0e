//! Local-time estimators on simulated paths: Gaussian-kernel smoothing,
//! binned occupation densities, the Monte Carlo self-overlap functional,
//! and their closed-form discrete expectations.
//!
//! Every estimator works on the discrete path nodes x_1..x_n (the node at
//! time zero carries no occupation mass), so a sum over nodes times h is
//! exactly the time horizon. The kernel bandwidth must respect the grid
//! floor eps >= 4 h^2, below which the Riemann sum no longer resolves the
//! kernel and the estimator silently degrades; that regime is rejected.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::PrefixPaths;
use crate::noise::sample_noise_stream;
use crate::operator::{L2Operator, OpKind};
use crate::path::{integrator_path, GaussPath};
use crate::util::{mean_se, EXP_CUTOFF};

/// Binned occupation-density estimate.
#[derive(Debug, Clone)]
pub struct LocalTimeEstimate {
    /// Bin centers.
    pub u_grid: Vec<f64>,
    /// Density values, time per unit space; nonnegative.
    pub values: Vec<f64>,
    /// Time horizon the estimate integrates over.
    pub t_horizon: f64,
    /// Spatial bin width.
    pub bin_width: f64,
    /// Number of paths averaged into the estimate.
    pub path_count: u64,
}

impl LocalTimeEstimate {
    /// Total occupation mass: sum of values times the bin width. Equals
    /// the time horizon when the bins cover the whole path range.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v * self.bin_width).sum()
    }
}

/// Spatial binning rule for [`occupation_density`].
#[derive(Debug, Clone, Copy)]
pub enum Bins {
    /// Width 4 sigma_hat / sqrt(n) over the observed path range.
    Auto,
    /// Fixed width; must be positive.
    Width(f64),
}

fn bandwidth_floor(grid: crate::grid::GridSpec, eps: f64) -> Result<()> {
    let floor = 4.0 * grid.h() * grid.h();
    if !(eps >= floor) {
        return Err(Error::BandwidthTooSmall { eps, floor });
    }
    Ok(())
}

fn one_dimensional(path: &GaussPath) -> Result<&[f64]> {
    if path.dim() != 1 {
        return Err(Error::invalid(format!(
            "local-time estimators are one-dimensional, got a path of dimension {}",
            path.dim()
        )));
    }
    Ok(path.values())
}

/// Kernel-smoothed local time at level `u` up to time `t`:
/// h * sum over nodes 0 < t_k <= t of the Gaussian kernel at x_k - u.
/// `t` snaps to the nearest grid node like every other time in the crate.
pub fn local_time_kernel(path: &GaussPath, u: f64, t: f64, eps: f64) -> Result<f64> {
    let grid = path.grid();
    bandwidth_floor(grid, eps)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::BadInterval { s: 0.0, t });
    }
    let xs = one_dimensional(path)?;
    let kt = grid.snap(t);
    let inv_norm = 1.0 / (2.0 * std::f64::consts::PI * eps).sqrt();
    let cutoff = EXP_CUTOFF * eps;
    let mut acc = 0.0;
    for &x in &xs[1..=kt] {
        let d2 = (x - u) * (x - u);
        if d2 <= cutoff {
            acc += (-d2 / (2.0 * eps)).exp();
        }
    }
    Ok(grid.h() * inv_norm * acc)
}

/// Expected value of [`local_time_kernel`] under the discrete path law:
/// h * sum_k (2 pi (eps + var x_k))^{-1/2} exp(-u^2 / (2 (eps + var x_k))).
/// This is the exact statistical comparator for the Monte Carlo mean.
pub fn local_time_kernel_expectation(a: &L2Operator, u: f64, t: f64, eps: f64) -> Result<f64> {
    let grid = a.grid();
    bandwidth_floor(grid, eps)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::BadInterval { s: 0.0, t });
    }
    let kt = grid.snap(t);
    let h = grid.h();
    let prefixes = PrefixPaths::build(a.mat());
    let tau = 2.0 * std::f64::consts::PI;
    let mut acc = 0.0;
    for k in 1..=kt {
        let var = h * prefixes.p[k].iter().map(|x| x * x).sum::<f64>();
        let s = eps + var;
        acc += (-u * u / (2.0 * s)).exp() / (tau * s).sqrt();
    }
    Ok(h * acc)
}

/// Binned occupation density of one path over its full time horizon.
/// Bins span the observed range; the maximum lands in the last bin, so the
/// total mass is exactly the horizon.
pub fn occupation_density(path: &GaussPath, bins: Bins) -> Result<LocalTimeEstimate> {
    let xs = one_dimensional(path)?;
    let grid = path.grid();
    let n = grid.n_cells();
    let samples = &xs[1..];
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = match bins {
        Bins::Width(w) => {
            if !(w > 0.0) {
                return Err(Error::invalid(format!("bin width must be positive, got {w}")));
            }
            w
        }
        Bins::Auto => {
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            let w = 4.0 * var.sqrt() / (n as f64).sqrt();
            // a constant path has zero spread; one unit-width bin holds it
            if w > 0.0 {
                w
            } else {
                1.0
            }
        }
    };
    let n_bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let j = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[j] += 1;
    }
    let h = grid.h();
    Ok(LocalTimeEstimate {
        u_grid: (0..n_bins)
            .map(|j| lo + (j as f64 + 0.5) * width)
            .collect(),
        values: counts.iter().map(|&c| h * c as f64 / width).collect(),
        t_horizon: 1.0,
        bin_width: width,
        path_count: 1,
    })
}

/// Monte Carlo self-overlap h^2 sum_{k != l} f_eps(x_k - x_l), averaged
/// over `reps` seeded paths of the integrator driven by `a`. Returns
/// (mean, standard error). The node at time zero is excluded, as is the
/// diagonal k = l, whose contribution is pure kernel mass.
pub fn mc_selfoverlap(a: &L2Operator, eps: f64, reps: u64, seed: u64) -> Result<(f64, f64)> {
    let grid = a.grid();
    bandwidth_floor(grid, eps)?;
    if reps < 2 {
        return Err(Error::invalid("self-overlap needs at least 2 replicates"));
    }
    let h = grid.h();
    let inv_norm = 1.0 / (2.0 * std::f64::consts::PI * eps).sqrt();
    let cutoff = EXP_CUTOFF * eps;
    let radius = cutoff.sqrt();
    let samples: Result<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let noise = sample_noise_stream(grid, seed, "selfoverlap", r);
            let path = integrator_path(a, &noise)?;
            // sorted order turns the kernel support into a sliding window;
            // the multiset of pairs is unchanged, so the sum is exact
            let mut xs = path.values()[1..].to_vec();
            xs.sort_unstable_by(f64::total_cmp);
            let mut acc = 0.0;
            let mut lo = 0usize;
            for k in 0..xs.len() {
                while xs[k] - xs[lo] > radius {
                    lo += 1;
                }
                for &xl in &xs[lo..k] {
                    let d = xs[k] - xl;
                    acc += (-d * d / (2.0 * eps)).exp();
                }
            }
            Ok(2.0 * h * h * inv_norm * acc)
        })
        .collect();
    Ok(mean_se(&samples?))
}

/// Expected value of [`mc_selfoverlap`] under the discrete path law:
/// 2 h^2 sum_{k < l} (2 pi (eps + var(x_l - x_k)))^{-1/2}. Exact for
/// identity and multiplication operators at any grid; general operators
/// need one O(n) pass per pair and are capped at 1024 cells.
pub fn mc_selfoverlap_expectation(a: &L2Operator, eps: f64) -> Result<f64> {
    let grid = a.grid();
    bandwidth_floor(grid, eps)?;
    let n = grid.n_cells();
    let h = grid.h();
    let tau = 2.0 * std::f64::consts::PI;
    let mut acc = 0.0;
    match a.kind() {
        OpKind::Identity | OpKind::Multiplication => {
            // variance of an increment is h times a contiguous sum of
            // squared diagonal entries; prefix sums make each pair O(1)
            let mut pref = Vec::with_capacity(n + 1);
            pref.push(0.0);
            for j in 0..n {
                let d = a.entry(j, j);
                pref.push(pref[j] + d * d);
            }
            for k in 1..=n {
                for l in (k + 1)..=n {
                    let var = h * (pref[l] - pref[k]);
                    acc += 1.0 / (tau * (eps + var)).sqrt();
                }
            }
        }
        _ => {
            if n > 1024 {
                return Err(Error::invalid(
                    "self-overlap expectation for a general operator is capped at 1024 cells",
                ));
            }
            let prefixes = PrefixPaths::build(a.mat());
            for k in 1..=n {
                for l in (k + 1)..=n {
                    let (pk, pl) = (&prefixes.p[k], &prefixes.p[l]);
                    let mut d2 = 0.0;
                    for r in 0..n {
                        let d = pl[r] - pk[r];
                        d2 += d * d;
                    }
                    acc += 1.0 / (tau * (eps + h * d2)).sqrt();
                }
            }
        }
    }
    Ok(2.0 * h * h * acc)
}
