//! Monte Carlo view of the virtual channel created by the rotation.

use gauss_quad::hermite::GaussHermite;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{apply_rotation, chunk_and_normalize, compute_llrs, encode_rotation, spherical_word, Dimension, VirtualChannel};
use crate::constellation::Modulation;
use crate::rng::{derive_seed, sim_rng};
use crate::stats::normal_upper_quantile;

const BATCH: usize = 256;
const BINS: usize = 50;

/// Sign-corrected LLRs of `n_chunks` chunks sent through the virtual channel
/// at per-quadrature SNR `snr`: each value is `LLR_i·sign(u_i)`, so the law is
/// that of the all-zero word.
pub fn virtual_channel_llrs(d: Dimension, m: &Modulation, snr: f64, n_chunks: usize, seed: u64) -> Vec<f64> {
    let dd = d.get();
    let ch = VirtualChannel::from_snr(snr, m.variance());
    let n_batches = n_chunks.div_ceil(BATCH);
    let parts: Vec<Vec<f64>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let chunks = BATCH.min(n_chunks - b * BATCH);
            let mut rng = sim_rng(derive_seed(seed, &[b as u64]));
            let mut x = m.sample_quadratures((chunks * dd).div_ceil(2), &mut rng);
            x.truncate(chunks * dd);
            let y: Vec<f64> = x
                .iter()
                .map(|&v| ch.gain * v + ch.noise.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let xs = chunk_and_normalize(&x, d).expect("continuous data has nonzero chunks");
            let ys = chunk_and_normalize(&y, d).expect("continuous data has nonzero chunks");
            let mut out = Vec::with_capacity(chunks * dd);
            let mut bits = vec![0u8; dd];
            for (cx, cy) in xs.iter().zip(&ys) {
                bits.iter_mut().for_each(|b| *b = rng.gen_range(0..2));
                let u = spherical_word(&bits);
                let msg = encode_rotation(&cy.unit, &u, d).expect("unit inputs");
                let l = compute_llrs(&apply_rotation(&msg, &cx.unit), cx.norm, cy.norm, &ch);
                out.extend(l.iter().zip(&bits).map(|(l, &b)| if b == 0 { *l } else { -l }));
            }
            out
        })
        .collect();
    parts.concat()
}

/// LLRs of BPSK over real AWGN at `snr`, sign-corrected (all-zero word).
pub fn biawgn_llrs(snr: f64, n: usize, seed: u64) -> Vec<f64> {
    let n_batches = n.div_ceil(BATCH * 64);
    let sd = (1.0 / snr).sqrt();
    let parts: Vec<Vec<f64>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let len = (BATCH * 64).min(n - b * BATCH * 64);
            let mut rng = sim_rng(derive_seed(seed, &[b as u64]));
            (0..len)
                .map(|_| 2.0 * snr * (1.0 + sd * rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect();
    parts.concat()
}

fn softplus_neg(l: f64) -> f64 {
    // ln(1 + e^{−l})
    if l > 0.0 {
        (-l).exp().ln_1p()
    } else {
        -l + l.exp().ln_1p()
    }
}

/// Bits carried per binary channel use, estimated from sign-corrected LLRs:
/// `1 − E[log2(1 + e^{−L})]`.
pub fn empirical_capacity(llrs: &[f64]) -> f64 {
    let s: f64 = llrs.iter().map(|&l| softplus_neg(l)).sum();
    1.0 - s / llrs.len() as f64 / std::f64::consts::LN_2
}

/// Capacity of the BI-AWGN channel whose LLRs are `N(μ, 2μ)`.
pub fn consistent_gaussian_capacity(mu: f64) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    let gh = GaussHermite::new(80).expect("valid order");
    let s = 2.0 * mu.sqrt();
    let e = gh.integrate(|t| softplus_neg(mu + s * t)) / std::f64::consts::PI.sqrt();
    1.0 - e / std::f64::consts::LN_2
}

/// Inverse of [`consistent_gaussian_capacity`] by bisection.
pub fn consistent_gaussian_mean(capacity: f64) -> f64 {
    let c = capacity.clamp(1e-9, 1.0 - 1e-9);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while consistent_gaussian_capacity(hi) < c {
        hi *= 2.0;
        if hi > 1e4 {
            return hi;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if consistent_gaussian_capacity(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kullback–Leibler divergence (nats) between a sample of sign-corrected LLRs
/// and the consistent Gaussian `N(μ, 2μ)` of the same capacity.
///
/// Estimated on equiprobable bins of the reference law with the
/// Miller–Madow bias correction.
pub fn llr_divergence(llrs: &[f64]) -> f64 {
    let n = llrs.len();
    let mu = consistent_gaussian_mean(empirical_capacity(llrs));
    let sd = (2.0 * mu).sqrt();
    let edges: Vec<f64> = (1..BINS)
        .map(|k| mu - sd * normal_upper_quantile(k as f64 / BINS as f64))
        .collect();
    let mut counts = vec![0usize; BINS];
    for &l in llrs {
        counts[edges.partition_point(|&e| e <= l)] += 1;
    }
    let nf = n as f64;
    let plug_in: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / nf;
            p * (p * BINS as f64).ln()
        })
        .sum();
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    plug_in - (occupied as f64 - 1.0) / (2.0 * nf)
}

/// Divergence of the virtual channel from the ideal BI-AWGN channel,
/// estimated on `n` chunks.
pub fn virtual_channel_fidelity(d: Dimension, m: &Modulation, snr: f64, n: usize, seed: u64) -> f64 {
    llr_divergence(&virtual_channel_llrs(d, m, snr, n, seed))
}
