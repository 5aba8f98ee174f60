//! Probabilistically shaped QAM ensembles in shot-noise units.
//!
//! Points live on the square grid `{±1, ±3, …, ±(m−1)}²` with Maxwell–Boltzmann
//! weights `exp(−ν·|a|²)` evaluated on that unnormalized grid, then the grid is
//! rescaled so that each quadrature carries the requested modulation variance.
//! The modulation variance `V_A` is per quadrature, so the second moment per
//! complex symbol is `2·V_A`.

use std::io::Write;

use gauss_quad::hermite::GaussHermite;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, WeightedAliasIndex};
use thiserror::Error;

use crate::rng::sim_rng;

#[derive(Debug, Error, PartialEq)]
pub enum ConstellationError {
    #[error("constellation order {0} is not the square of an even integer ≥ 2")]
    InvalidOrder(usize),
    #[error("shaping rate must be finite and non-negative, got {0}")]
    InvalidShapingRate(f64),
    #[error("target variance must be finite and positive, got {0}")]
    InvalidVariance(f64),
    #[error("shaping rate {nu} leaves all probability mass on the innermost ring")]
    DegenerateShaping { nu: f64 },
}

/// A QAM constellation with Maxwell–Boltzmann point probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedConstellation {
    points: Vec<Complex64>,
    probabilities: Vec<f64>,
    nu: f64,
    order: usize,
    side: usize,
    scale: f64,
}

/// Builds a PS-QAM constellation with per-quadrature variance `target_variance`.
pub fn build_ps_qam(
    order: usize,
    nu: f64,
    target_variance: f64,
) -> Result<ShapedConstellation, ConstellationError> {
    let side = (order as f64).sqrt().round() as usize;
    if side < 2 || side * side != order || side % 2 != 0 {
        return Err(ConstellationError::InvalidOrder(order));
    }
    if !nu.is_finite() || nu < 0.0 {
        return Err(ConstellationError::InvalidShapingRate(nu));
    }
    if !target_variance.is_finite() || target_variance <= 0.0 {
        return Err(ConstellationError::InvalidVariance(target_variance));
    }

    let levels = grid_levels(side);
    // Energies relative to the innermost ring (|a|² = 2) keep the exponentials
    // in range for any ν.
    let mut raw = Vec::with_capacity(order);
    let mut grid = Vec::with_capacity(order);
    for &im in &levels {
        for &re in &levels {
            let energy = re * re + im * im;
            raw.push((-nu * (energy - 2.0)).exp());
            grid.push(Complex64::new(re, im));
        }
    }
    let total: f64 = raw.iter().sum();
    let probabilities: Vec<f64> = raw.iter().map(|w| w / total).collect();

    if side > 2 {
        let outer: f64 = grid
            .iter()
            .zip(&probabilities)
            .filter(|(a, _)| a.norm_sqr() > 2.0)
            .map(|(_, p)| p)
            .sum();
        if outer < f64::EPSILON {
            return Err(ConstellationError::DegenerateShaping { nu });
        }
    }

    let second_moment: f64 = grid
        .iter()
        .zip(&probabilities)
        .map(|(a, p)| p * a.norm_sqr())
        .sum();
    // per-quadrature variance = E|a|²/2
    let scale = (2.0 * target_variance / second_moment).sqrt();
    let points = grid.iter().map(|a| a * scale).collect();

    Ok(ShapedConstellation {
        points,
        probabilities,
        nu,
        order,
        side,
        scale,
    })
}

fn grid_levels(side: usize) -> Vec<f64> {
    (0..side)
        .map(|k| -(side as f64 - 1.0) + 2.0 * k as f64)
        .collect()
}

impl ShapedConstellation {
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Amplitude scale applied to the unnormalized odd-integer grid.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Per-quadrature variance of the ensemble (SNU).
    pub fn variance(&self) -> f64 {
        0.5 * self
            .points
            .iter()
            .zip(&self.probabilities)
            .map(|(a, p)| p * a.norm_sqr())
            .sum::<f64>()
    }

    /// The one-dimensional marginal: amplitude levels with their probabilities.
    ///
    /// Maxwell–Boltzmann weights on a square grid factor into two independent
    /// PAM marginals, one per quadrature.
    pub fn quadrature_marginal(&self) -> (Vec<f64>, Vec<f64>) {
        let levels: Vec<f64> = grid_levels(self.side)
            .into_iter()
            .map(|a| a * self.scale)
            .collect();
        let mut probs = vec![0.0; self.side];
        for (idx, p) in self.probabilities.iter().enumerate() {
            probs[idx % self.side] += p;
        }
        (levels, probs)
    }

    /// Draws `n` i.i.d. complex symbols.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Complex64> {
        let alias = WeightedAliasIndex::new(self.probabilities.clone())
            .expect("probabilities are finite, non-negative and sum to one");
        (0..n).map(|_| self.points[alias.sample(rng)]).collect()
    }

    /// Heterodyne mutual information per complex symbol (bits) at
    /// per-quadrature signal-to-noise ratio `snr`.
    pub fn mutual_information(&self, snr: f64) -> f64 {
        let (levels, probs) = self.quadrature_marginal();
        2.0 * pam_mutual_information(&levels, &probs, snr)
    }

    /// Writes `re,im,prob` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re,im,prob")?;
        for (a, p) in self.points.iter().zip(&self.probabilities) {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", a.re, a.im, p)?;
        }
        Ok(())
    }
}

/// Draws `n` symbols with a fresh generator seeded by `seed`.
pub fn sample_symbols(c: &ShapedConstellation, n: usize, seed: u64) -> Vec<Complex64> {
    c.sample(n, &mut sim_rng(seed))
}

/// Flattens complex symbols into the real sequence `Re, Im, Re, Im, …`.
pub fn interleave_quadratures(symbols: &[Complex64]) -> Vec<f64> {
    symbols.iter().flat_map(|s| [s.re, s.im]).collect()
}

const HERMITE_ORDER: usize = 80;

/// Mutual information (bits per real use) of a PAM input over real AWGN with
/// `snr = Var(X)/σ²`, evaluated by Gauss–Hermite quadrature.
pub fn pam_mutual_information(levels: &[f64], probs: &[f64], snr: f64) -> f64 {
    if snr <= 0.0 {
        return 0.0;
    }
    let mean: f64 = levels.iter().zip(probs).map(|(a, p)| a * p).sum();
    let var: f64 = levels
        .iter()
        .zip(probs)
        .map(|(a, p)| p * (a - mean).powi(2))
        .sum();
    let sigma = (var / snr).sqrt();
    let quad = GaussHermite::new(HERMITE_ORDER).expect("order ≥ 2");
    let two_sigma2 = 2.0 * sigma * sigma;
    let mut neg_h = 0.0;
    let mut terms = vec![0.0; levels.len()];
    for (&ai, &pi) in levels.iter().zip(probs) {
        if pi == 0.0 {
            continue;
        }
        let integral = quad.integrate(|xi| {
            let noise = std::f64::consts::SQRT_2 * sigma * xi;
            let mut max = f64::NEG_INFINITY;
            for ((t, &aj), &pj) in terms.iter_mut().zip(levels).zip(probs) {
                let diff = ai - aj;
                *t = if pj > 0.0 {
                    pj.ln() - (diff * diff + 2.0 * diff * noise) / two_sigma2
                } else {
                    f64::NEG_INFINITY
                };
                max = max.max(*t);
            }
            let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
            lse
        });
        neg_h += pi * integral / std::f64::consts::PI.sqrt();
    }
    (-neg_h / std::f64::consts::LN_2).max(0.0)
}

/// Shaping penalty (bits per complex symbol) of `c` against Gaussian
/// modulation at the same per-quadrature SNR.
pub fn shaping_penalty(c: &ShapedConstellation, snr: f64) -> f64 {
    (1.0 + snr).log2() - c.mutual_information(snr)
}

/// Reference SNR at which the default shaping rate is tuned.
pub const SHAPING_REFERENCE_SNR: f64 = 0.25;
/// Largest admissible shaping penalty for the default rate (bits/symbol).
pub const SHAPING_PENALTY_BUDGET: f64 = 0.01;

/// The shaping rate ν that minimizes the mutual-information penalty against
/// Gaussian modulation at `snr`, found by golden-section search on `[0, 1]`.
pub fn default_shaping_rate(order: usize, snr: f64) -> Result<f64, ConstellationError> {
    let penalty = |nu: f64| -> f64 {
        match build_ps_qam(order, nu, 1.0) {
            Ok(c) => shaping_penalty(&c, snr),
            Err(_) => f64::INFINITY,
        }
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = penalty(x1);
    let mut f2 = penalty(x2);
    while hi - lo > 1e-4 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = penalty(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = penalty(x2);
        }
    }
    let nu = 0.5 * (lo + hi);
    // sanity: the search must land inside the budget
    let c = build_ps_qam(order, nu, 1.0)?;
    debug_assert!(shaping_penalty(&c, snr) < SHAPING_PENALTY_BUDGET);
    Ok(nu)
}

/// Alice's modulation: either an ideal Gaussian ensemble or a shaped QAM.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    Gaussian { variance: f64 },
    Shaped(ShapedConstellation),
}

impl Modulation {
    /// Per-quadrature variance.
    pub fn variance(&self) -> f64 {
        match self {
            Modulation::Gaussian { variance } => *variance,
            Modulation::Shaped(c) => c.variance(),
        }
    }

    /// Draws `n_symbols` complex symbols and returns them interleaved as
    /// `2·n_symbols` real quadrature values.
    pub fn sample_quadratures<R: Rng + ?Sized>(&self, n_symbols: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Modulation::Gaussian { variance } => {
                let sd = variance.sqrt();
                (0..2 * n_symbols)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            Modulation::Shaped(c) => interleave_quadratures(&c.sample(n_symbols, rng)),
        }
    }

    /// Heterodyne mutual information per complex symbol at `snr`.
    pub fn mutual_information(&self, snr: f64) -> f64 {
        match self {
            Modulation::Gaussian { .. } => (1.0 + snr.max(0.0)).log2(),
            Modulation::Shaped(c) => c.mutual_information(snr),
        }
    }
}
