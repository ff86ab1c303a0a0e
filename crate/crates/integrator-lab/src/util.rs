//! Deterministic numeric helpers: seed derivation and fixed-order reductions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Squared-distance cutoff for Gaussian kernels, as a multiple of the
/// bandwidth: terms beyond exp(-60) are dropped. The skipped mass is below
/// 1e-26 of a retained term, and the cutoff is a pure function of the
/// inputs, so determinism is unaffected.
pub(crate) const EXP_CUTOFF: f64 = 120.0;

/// splitmix64 step. Used only to derive child seeds, never as the
/// experiment generator itself.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derives an independent ChaCha8 stream from a master seed, a textual
/// label, and a replicate index. The derivation is a fixed splitmix64
/// chain over the triple, so streams never depend on scheduling order.
pub fn stream_rng(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut state = master ^ fnv1a64(label.as_bytes()).rotate_left(17) ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Sum with a fixed pairwise reduction tree. The value depends only on the
/// slice contents, never on chunking or thread count, which is what keeps
/// estimator output bit-stable under `--threads`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Mean and standard error of the mean, reduced in fixed order.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Midpoint rule with `m` nodes on [a, b], reduced pairwise.
pub(crate) fn midpoint(m: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let w = (b - a) / m as f64;
    let vals: Vec<f64> = (0..m).map(|i| f(a + (i as f64 + 0.5) * w)).collect();
    pairwise_sum(&vals) * w
}

/// Least-squares line fit returning (slope, intercept, r_squared).
pub(crate) fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
