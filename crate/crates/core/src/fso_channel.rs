//! Turbulent free-space quantum channel with a trusted heterodyne receiver.
//!
//! Per quadrature `y = sqrt(η·T/2)·x + z` with `Var z = 1 + η·T·ξ/2 + v_el`
//! (SNU). Fading acts once per block: `T = T_ceil·I_s·I_p` with a unit-mean
//! lognormal scintillation factor `I_s` and a pointing factor `I_p` of
//! density `β·u^(β−1)` on `(0, 1]`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::Modulation;
use crate::rng::{derive_seed, sim_rng};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParams(String),
    #[error("input contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("channel estimation needs at least {min} symbols, got {got}")]
    TooFewSymbols { min: usize, got: usize },
    #[error("Alice's data has zero variance")]
    DegenerateInput,
    #[error("block file: {0}")]
    Io(#[from] std::io::Error),
    #[error("block file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceParams {
    pub sigma_i: f64,
    pub beta_jitter: f64,
    pub mean_t: f64,
    /// Disables pointing loss (`β_jitter → ∞`); `beta_jitter` is then ignored.
    #[serde(default)]
    pub no_jitter: bool,
}

impl TurbulenceParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: String| Err(ChannelError::InvalidParams(m));
        if !(self.sigma_i >= 0.0 && self.sigma_i.is_finite()) {
            return bad(format!("sigma_I must be >= 0, got {}", self.sigma_i));
        }
        if !self.no_jitter && !(self.beta_jitter > 0.0 && self.beta_jitter.is_finite()) {
            return bad(format!(
                "beta_jitter must be > 0 (or set no_jitter), got {}",
                self.beta_jitter
            ));
        }
        if !(self.mean_t > 0.0 && self.mean_t <= 1.0) {
            return bad(format!("mean_T must lie in (0, 1], got {}", self.mean_t));
        }
        Ok(())
    }

    /// Mean of the pointing factor, `β/(β+1)`.
    pub fn mean_pointing(&self) -> f64 {
        if self.no_jitter {
            1.0
        } else {
            self.beta_jitter / (self.beta_jitter + 1.0)
        }
    }

    /// Transmittance at perfect pointing and unit irradiance.
    pub fn ceiling(&self) -> f64 {
        self.mean_t / self.mean_pointing()
    }
}

/// The four measured turbulence settings, weakest first, followed by a
/// fluctuation-free control at the average transmittance.
pub fn reference_settings() -> Vec<TurbulenceParams> {
    let measured = [
        (0.001, 123.8, 0.41),
        (0.009, 8.6, 0.39),
        (0.01, 3.0, 0.37),
        (0.013, 1.6, 0.35),
    ];
    let mut out: Vec<TurbulenceParams> = measured
        .iter()
        .map(|&(sigma_i, beta_jitter, mean_t)| TurbulenceParams {
            sigma_i,
            beta_jitter,
            mean_t,
            no_jitter: false,
        })
        .collect();
    out.push(TurbulenceParams {
        sigma_i: 0.0,
        beta_jitter: 0.0,
        mean_t: 0.38,
        no_jitter: true,
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverModel {
    pub eta: f64,
    /// Shot-noise to electronic-noise clearance; `inf` means no electronic noise.
    pub clearance_db: f64,
    pub xi: f64,
}

impl ReceiverModel {
    pub fn reference_defaults() -> Self {
        Self {
            eta: 0.4,
            clearance_db: 10.0,
            xi: 0.0045,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: String| Err(ChannelError::InvalidParams(m));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.clearance_db > 0.0) {
            return bad(format!("clearance_db must be > 0, got {}", self.clearance_db));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return bad(format!("xi must be >= 0, got {}", self.xi));
        }
        Ok(())
    }

    /// Electronic noise in SNU.
    pub fn v_el(&self) -> f64 {
        10f64.powf(-self.clearance_db / 10.0)
    }

    /// Signal amplitude gain `sqrt(η·T/2)` per quadrature.
    pub fn gain(&self, t: f64) -> f64 {
        (self.eta * t / 2.0).sqrt()
    }

    /// Total noise variance per quadrature at Bob.
    pub fn noise_variance(&self, t: f64) -> f64 {
        1.0 + self.eta * t * self.xi / 2.0 + self.v_el()
    }
}

/// One fading draw split into its factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub scintillation: f64,
    pub pointing: f64,
    /// `T_ceil·I_s·I_p` clipped to `(0, 1]`.
    pub transmittance: f64,
}

/// Draws one fading realization.
pub fn draw_fading<R: Rng + ?Sized>(p: &TurbulenceParams, rng: &mut R) -> FadingDraw {
    let scintillation = if p.sigma_i > 0.0 {
        let s2 = p.sigma_i.ln_1p();
        let g: f64 = rng.sample(StandardNormal);
        (-0.5 * s2 + s2.sqrt() * g).exp()
    } else {
        1.0
    };
    let pointing = if p.no_jitter {
        1.0
    } else {
        // inverse CDF of β·u^(β−1); 1 − U lies in (0, 1]
        let u: f64 = 1.0 - rng.gen::<f64>();
        u.powf(1.0 / p.beta_jitter)
    };
    let t = (p.ceiling() * scintillation * pointing).clamp(f64::MIN_POSITIVE, 1.0);
    FadingDraw {
        scintillation,
        pointing,
        transmittance: t,
    }
}

/// Raw fading draws, without the batch mean correction.
pub fn sample_fading(p: &TurbulenceParams, n: usize, seed: u64) -> Vec<FadingDraw> {
    let mut rng = sim_rng(seed);
    (0..n).map(|_| draw_fading(p, &mut rng)).collect()
}

/// Per-block transmittances for `n_blocks` blocks, clipped to `(0, 1]` and
/// rescaled so that the batch mean equals `mean_t`.
pub fn sample_transmittance(
    p: &TurbulenceParams,
    n_blocks: usize,
    seed: u64,
) -> Result<Vec<f64>, ChannelError> {
    p.validate()?;
    if p.sigma_i == 0.0 && p.no_jitter {
        return Ok(vec![p.mean_t; n_blocks]);
    }
    let mut t: Vec<f64> = sample_fading(p, n_blocks, seed)
        .into_iter()
        .map(|d| d.transmittance)
        .collect();
    if t.is_empty() {
        return Ok(t);
    }
    for _ in 0..16 {
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let k = p.mean_t / mean;
        if (k - 1.0).abs() < 1e-15 {
            break;
        }
        let mut clipped = false;
        for v in t.iter_mut() {
            *v *= k;
            if *v > 1.0 {
                *v = 1.0;
                clipped = true;
            }
        }
        if !clipped {
            break;
        }
    }
    Ok(t)
}

/// Bob's heterodyne outcomes for Alice's interleaved quadratures `x`.
pub fn transmit(
    x: &[f64],
    t_block: f64,
    r: &ReceiverModel,
    seed: u64,
) -> Result<Vec<f64>, ChannelError> {
    transmit_with(x, t_block, r, &mut sim_rng(seed))
}

pub fn transmit_with<R: Rng + ?Sized>(
    x: &[f64],
    t_block: f64,
    r: &ReceiverModel,
    rng: &mut R,
) -> Result<Vec<f64>, ChannelError> {
    r.validate()?;
    if !(t_block > 0.0 && t_block <= 1.0) {
        return Err(ChannelError::InvalidParams(format!(
            "T_block must lie in (0, 1], got {t_block}"
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(ChannelError::NonFinite(i));
    }
    let gain = r.gain(t_block);
    let sd = r.noise_variance(t_block).sqrt();
    Ok(x
        .iter()
        .map(|&xi| gain * xi + sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// One CV-QKD block: interleaved quadratures of Alice and Bob.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumBlock {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t_block: f64,
    pub block_size: usize,
}

/// Samples one fading realization and a block of `block_size` symbols.
pub fn generate_block(
    m: &Modulation,
    p: &TurbulenceParams,
    r: &ReceiverModel,
    block_size: usize,
    seed: u64,
) -> Result<QuantumBlock, ChannelError> {
    p.validate()?;
    let t_block = draw_fading(p, &mut sim_rng(derive_seed(seed, &[0]))).transmittance;
    generate_block_at(m, t_block, r, block_size, seed)
}

/// Block generation at a given transmittance.
pub fn generate_block_at(
    m: &Modulation,
    t_block: f64,
    r: &ReceiverModel,
    block_size: usize,
    seed: u64,
) -> Result<QuantumBlock, ChannelError> {
    let x = m.sample_quadratures(block_size, &mut sim_rng(derive_seed(seed, &[1])));
    let y = transmit(&x, t_block, r, derive_seed(seed, &[2]))?;
    Ok(QuantumBlock {
        x,
        y,
        t_block,
        block_size,
    })
}

/// Smallest block accepted by [`estimate_channel`].
pub const MIN_ESTIMATION_SYMBOLS: usize = 10_000;

/// Channel estimate from the sufficient statistics of a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub t_hat: f64,
    pub xi_hat: f64,
    /// Estimated amplitude gain `sqrt(η·T/2)`.
    pub gain_hat: f64,
    /// Estimated residual noise variance per quadrature.
    pub noise_hat: f64,
    /// Per-quadrature SNR from the estimates, `gain²·V_A/noise`.
    pub snr_hat: f64,
    pub n_symbols: usize,
}

fn estimate_from_sums(
    sxx: f64,
    sxy: f64,
    residual: f64,
    m: usize,
    r: &ReceiverModel,
) -> Result<ChannelEstimate, ChannelError> {
    if !(sxx > 0.0) {
        return Err(ChannelError::DegenerateInput);
    }
    let gain_hat = sxy / sxx;
    let noise_hat = residual / m as f64;
    let t_hat = 2.0 * gain_hat * gain_hat / r.eta;
    let xi_hat = if t_hat > 0.0 {
        2.0 * (noise_hat - 1.0 - r.v_el()) / (r.eta * t_hat)
    } else {
        0.0
    };
    let va_hat = sxx / m as f64;
    Ok(ChannelEstimate {
        t_hat,
        xi_hat,
        gain_hat,
        noise_hat,
        snr_hat: gain_hat * gain_hat * va_hat / noise_hat,
        n_symbols: m / 2,
    })
}

/// Maximum-likelihood estimates of `T` and `ξ` with known shot noise and
/// electronic noise: `ĝ = Σxy/Σx²`, `σ̂² = Σ(y − ĝx)²/m`.
pub fn estimate_channel(b: &QuantumBlock, r: &ReceiverModel) -> Result<ChannelEstimate, ChannelError> {
    r.validate()?;
    if b.x.len() != b.y.len() {
        return Err(ChannelError::Format("x and y lengths differ".into()));
    }
    let m = b.x.len();
    if m / 2 < MIN_ESTIMATION_SYMBOLS {
        return Err(ChannelError::TooFewSymbols {
            min: MIN_ESTIMATION_SYMBOLS,
            got: m / 2,
        });
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in b.x.iter().zip(&b.y) {
        sxx += x * x;
        sxy += x * y;
    }
    if !(sxx > 0.0) {
        return Err(ChannelError::DegenerateInput);
    }
    let g = sxy / sxx;
    let residual: f64 = b.x.iter().zip(&b.y).map(|(&x, &y)| (y - g * x).powi(2)).sum();
    estimate_from_sums(sxx, sxy, residual, m, r)
}

/// Draws the channel estimate of a block of `n_symbols` symbols without
/// materializing it.
///
/// Conditional on Alice's data, `Σxz ~ N(0, σ²·Σx²)` and the residual sum of
/// squares is `σ²·χ²(m−1)` independently, so the joint law of the estimates is
/// reproduced exactly; only `Σx²` needs sampling from the modulation.
pub fn sample_estimate<R: Rng + ?Sized>(
    m: &Modulation,
    t_block: f64,
    r: &ReceiverModel,
    n_symbols: usize,
    rng: &mut R,
) -> Result<ChannelEstimate, ChannelError> {
    r.validate()?;
    if n_symbols < MIN_ESTIMATION_SYMBOLS {
        return Err(ChannelError::TooFewSymbols {
            min: MIN_ESTIMATION_SYMBOLS,
            got: n_symbols,
        });
    }
    let n_real = 2 * n_symbols;
    let sxx = sample_energy(m, n_real, rng);
    let gain = r.gain(t_block);
    let s2 = r.noise_variance(t_block);
    let g1: f64 = rng.sample(StandardNormal);
    let sxz = (s2 * sxx).sqrt() * g1;
    let chi = ChiSquared::new((n_real - 1) as f64).expect("positive degrees of freedom");
    let residual = s2 * chi.sample(rng);
    estimate_from_sums(sxx, gain * sxx + sxz, residual, n_real, r)
}

/// `Σx²` over `n_real` i.i.d. quadrature values of the modulation.
fn sample_energy<R: Rng + ?Sized>(m: &Modulation, n_real: usize, rng: &mut R) -> f64 {
    match m {
        Modulation::Gaussian { variance } => {
            let chi = ChiSquared::new(n_real as f64).expect("positive degrees of freedom");
            variance * chi.sample(rng)
        }
        Modulation::Shaped(c) => {
            // fold ±a together, then split the sample count along a binomial chain
            let (levels, probs) = c.quadrature_marginal();
            let half = levels.len() / 2;
            let mut energies = Vec::with_capacity(half);
            for k in 0..half {
                let a = levels[half + k];
                energies.push((a * a, probs[half + k] + probs[half - 1 - k]));
            }
            let mut remaining = n_real as u64;
            let mut mass = 1.0;
            let mut total = 0.0;
            for (k, &(e, p)) in energies.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                let count = if k + 1 == energies.len() {
                    remaining
                } else {
                    let q = (p / mass).clamp(0.0, 1.0);
                    Binomial::new(remaining, q).expect("valid binomial").sample(rng)
                };
                total += e * count as f64;
                remaining -= count;
                mass -= p;
            }
            total
        }
    }
}

/// Metadata written next to a dumped block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSidecar {
    pub t_block: f64,
    pub block_size: usize,
    pub turbulence: Option<TurbulenceParams>,
    pub receiver: ReceiverModel,
    pub seed: u64,
}

/// Writes `x,y` rows to `<stem>.csv` and the sidecar to `<stem>.json`.
pub fn dump_block(b: &QuantumBlock, sidecar: &BlockSidecar, dir: &Path, stem: &str) -> Result<(), ChannelError> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
    writeln!(w, "x,y")?;
    for (x, y) in b.x.iter().zip(&b.y) {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| ChannelError::Format(e.to_string()))?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Reads a block written by [`dump_block`].
pub fn restore_block(dir: &Path, stem: &str) -> Result<(QuantumBlock, BlockSidecar), ChannelError> {
    let text = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
    let sidecar: BlockSidecar = serde_json::from_str(&text).map_err(|e| ChannelError::Format(e.to_string()))?;
    let reader = BufReader::new(File::open(dir.join(format!("{stem}.csv")))?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "x,y" {
                return Err(ChannelError::Format(format!("unexpected header {line:?}")));
            }
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| ChannelError::Format(format!("line {}: expected two fields", i + 1)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| ChannelError::Format(format!("line {}: {e}", i + 1)))
        };
        x.push(parse(a)?);
        y.push(parse(b)?);
    }
    if x.len() != 2 * sidecar.block_size {
        return Err(ChannelError::Format(format!(
            "expected {} rows, found {}",
            2 * sidecar.block_size,
            x.len()
        )));
    }
    let block = QuantumBlock {
        x,
        y,
        t_block: sidecar.t_block,
        block_size: sidecar.block_size,
    };
    Ok((block, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_ps_qam, default_shaping_rate, SHAPING_REFERENCE_SNR};
    use crate::security::{snr_of, SecurityParams};
    use crate::stats::jarque_bera;

    fn ideal_receiver() -> ReceiverModel {
        ReceiverModel {
            eta: 1.0,
            clearance_db: f64::INFINITY,
            xi: 0.0,
        }
    }

    fn var(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn clearance_to_electronic_noise() {
        let r = ReceiverModel::reference_defaults();
        assert!((r.v_el() - 0.1).abs() < 1e-15);
        assert_eq!(ideal_receiver().v_el(), 0.0);
    }

    #[test]
    fn no_fluctuation_gives_constant_transmittance() {
        let p = TurbulenceParams {
            sigma_i: 0.0,
            beta_jitter: 0.0,
            mean_t: 0.38,
            no_jitter: true,
        };
        let t = sample_transmittance(&p, 100, 1).unwrap();
        assert!(t.iter().all(|&v| v == 0.38));
        let m = Modulation::Gaussian { variance: 7.44 };
        let b = generate_block(&m, &p, &ReceiverModel::reference_defaults(), 100, 3).unwrap();
        assert_eq!(b.t_block, 0.38);
    }

    #[test]
    fn scintillation_index_recovered() {
        for p in reference_settings().iter().take(4) {
            let draws = sample_fading(p, 100_000, 17);
            let s: Vec<f64> = draws.iter().map(|d| d.scintillation).collect();
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let index = var(&s) / (mean * mean);
            assert!((index / p.sigma_i - 1.0).abs() < 0.05, "{index} vs {}", p.sigma_i);
        }
    }

    #[test]
    fn transmittance_in_range_and_mean_matches() {
        for p in reference_settings() {
            let t = sample_transmittance(&p, 100_000, 23).unwrap();
            assert!(t.iter().all(|&v| v > 0.0 && v <= 1.0));
            let mean = t.iter().sum::<f64>() / t.len() as f64;
            assert!((mean / p.mean_t - 1.0).abs() < 0.01);
        }
        // the raw draws, before batch rescaling, also centre on mean_T
        let p = reference_settings()[3];
        let raw = sample_fading(&p, 100_000, 29);
        let mean = raw.iter().map(|d| d.transmittance).sum::<f64>() / raw.len() as f64;
        assert!((mean / p.mean_t - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn weakest_setting_is_nearly_constant() {
        let p = reference_settings()[0];
        let t = sample_transmittance(&p, 100_000, 5).unwrap();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        assert!(var(&t).sqrt() / mean < 0.05);
    }

    #[test]
    fn ideal_channel_noise_is_unit_shot_noise() {
        let mut rng = sim_rng(8);
        let x: Vec<f64> = (0..1_000_000).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let y = transmit(&x, 1.0, &ideal_receiver(), 9).unwrap();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - a / 2f64.sqrt()).collect();
        assert!((var(&z) - 1.0).abs() < 0.01);
        assert!(jarque_bera(&z).1 > 0.001);
    }

    #[test]
    fn empirical_snr_matches_analytic() {
        let r = ReceiverModel::reference_defaults();
        let m = Modulation::Gaussian { variance: 7.44 };
        let b = generate_block_at(&m, 0.38, &r, 500_000, 4).unwrap();
        let g = r.gain(0.38);
        let noise: Vec<f64> = b.x.iter().zip(&b.y).map(|(x, y)| y - g * x).collect();
        let snr = g * g * var(&b.x) / var(&noise);
        let sp = SecurityParams::reference_defaults();
        let analytic = snr_of(&sp, 0.38);
        assert!((snr / analytic - 1.0).abs() < 0.02, "{snr} {analytic}");
    }

    #[test]
    fn signal_off_gives_total_noise() {
        let r = ReceiverModel::reference_defaults();
        let y = transmit(&vec![0.0; 1_000_000], 0.38, &r, 6).unwrap();
        assert!((var(&y) / r.noise_variance(0.38) - 1.0).abs() < 0.01);
    }

    #[test]
    fn non_finite_input_rejected() {
        let r = ReceiverModel::reference_defaults();
        assert!(matches!(
            transmit(&[0.0, f64::NAN], 0.5, &r, 1),
            Err(ChannelError::NonFinite(1))
        ));
        assert!(transmit(&[0.0], 0.0, &r, 1).is_err());
    }

    #[test]
    fn blocks_are_deterministic_and_sized() {
        let nu = default_shaping_rate(256, SHAPING_REFERENCE_SNR).unwrap();
        let m = Modulation::Shaped(build_ps_qam(256, nu, 7.44).unwrap());
        let p = reference_settings()[2];
        let r = ReceiverModel::reference_defaults();
        let a = generate_block(&m, &p, &r, 20_000, 42).unwrap();
        let b = generate_block(&m, &p, &r, 20_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x.len(), 40_000);
        assert_eq!(a.y.len(), 40_000);
        assert!(a.t_block > 0.0 && a.t_block <= 1.0);
    }

    #[test]
    fn estimator_recovers_pure_loss_channel() {
        // ξ = 0, T = 0.4, ideal detector; the tolerance on ξ̂ is 4 standard
        // deviations of the estimator at this block size
        let r = ideal_receiver();
        let m = Modulation::Gaussian { variance: 7.44 };
        let b = generate_block_at(&m, 0.4, &r, 2_000_000, 12).unwrap();
        let e = estimate_channel(&b, &r).unwrap();
        assert!((e.t_hat / 0.4 - 1.0).abs() < 0.01, "{e:?}");
        let sd_xi = 2.0 * (2.0 / 4e6f64).sqrt() / (r.eta * 0.4);
        assert!(e.xi_hat.abs() < 4.0 * sd_xi, "{e:?}");
    }

    #[test]
    fn estimator_on_unit_transmittance() {
        let r = ideal_receiver();
        let m = Modulation::Gaussian { variance: 7.44 };
        let b = generate_block_at(&m, 1.0, &r, 1_000_000, 13).unwrap();
        let e = estimate_channel(&b, &r).unwrap();
        assert!((e.t_hat - 1.0).abs() < 0.01, "{e:?}");
        assert!(e.xi_hat.abs() < 4.0 * 2.0 * (2.0 / 2e6f64).sqrt(), "{e:?}");
    }

    #[test]
    fn estimator_guards() {
        let r = ReceiverModel::reference_defaults();
        let small = QuantumBlock {
            x: vec![1.0; 100],
            y: vec![1.0; 100],
            t_block: 0.5,
            block_size: 50,
        };
        assert!(matches!(
            estimate_channel(&small, &r),
            Err(ChannelError::TooFewSymbols { .. })
        ));
        let zero = QuantumBlock {
            x: vec![0.0; 40_000],
            y: vec![1.0; 40_000],
            t_block: 0.5,
            block_size: 20_000,
        };
        assert!(matches!(estimate_channel(&zero, &r), Err(ChannelError::DegenerateInput)));
    }

    #[test]
    fn estimates_within_three_standard_errors() {
        let r = ReceiverModel::reference_defaults();
        let m = Modulation::Gaussian { variance: 7.44 };
        let n = 20_000usize;
        let t = 0.38;
        let m_real = 2.0 * n as f64;
        let s2 = r.noise_variance(t);
        let se_gain = (s2 / (m_real * 7.44)).sqrt();
        let se_noise = s2 * (2.0 / m_real).sqrt();
        let mut outside = 0;
        for trial in 0..100u64 {
            let b = generate_block_at(&m, t, &r, n, 1000 + trial).unwrap();
            let e = estimate_channel(&b, &r).unwrap();
            if (e.gain_hat - r.gain(t)).abs() > 3.0 * se_gain
                || (e.noise_hat - s2).abs() > 3.0 * se_noise
            {
                outside += 1;
            }
        }
        // two independent 3σ tests: expect about 0.5 misses per 100 trials
        assert!(outside <= 3, "{outside}");
    }

    #[test]
    fn sufficient_statistic_sampler_matches_materialized_blocks() {
        let r = ReceiverModel::reference_defaults();
        let nu = default_shaping_rate(256, SHAPING_REFERENCE_SNR).unwrap();
        let shaped = Modulation::Shaped(build_ps_qam(256, nu, 7.44).unwrap());
        for m in [Modulation::Gaussian { variance: 7.44 }, shaped] {
            let n = 10_000;
            let trials = 300;
            let mut direct = Vec::new();
            let mut fast = Vec::new();
            let mut rng = sim_rng(77);
            for k in 0..trials {
                let b = generate_block_at(&m, 0.38, &r, n, 500 + k).unwrap();
                direct.push(estimate_channel(&b, &r).unwrap());
                fast.push(sample_estimate(&m, 0.38, &r, n, &mut rng).unwrap());
            }
            for f in [
                (|e: &ChannelEstimate| e.t_hat) as fn(&ChannelEstimate) -> f64,
                |e| e.xi_hat,
            ] {
                let a: Vec<f64> = direct.iter().map(f).collect();
                let b: Vec<f64> = fast.iter().map(f).collect();
                let (ma, mb) = (a.iter().sum::<f64>() / trials as f64, b.iter().sum::<f64>() / trials as f64);
                let (va, vb) = (var(&a), var(&b));
                let se = ((va + vb) / trials as f64).sqrt();
                assert!((ma - mb).abs() < 4.0 * se, "{ma} {mb} {se}");
                assert!((va / vb).ln().abs() < 0.35, "{va} {vb}");
            }
        }
    }

    #[test]
    fn dump_restore_round_trip() {
        let dir = std::env::temp_dir().join(format!("cvqkd-block-{}", std::process::id()));
        let r = ReceiverModel::reference_defaults();
        let p = reference_settings()[1];
        let m = Modulation::Gaussian { variance: 7.44 };
        let b = generate_block(&m, &p, &r, 500, 99).unwrap();
        let side = BlockSidecar {
            t_block: b.t_block,
            block_size: b.block_size,
            turbulence: Some(p),
            receiver: r,
            seed: 99,
        };
        dump_block(&b, &side, &dir, "blk").unwrap();
        let (b2, side2) = restore_block(&dir, "blk").unwrap();
        assert_eq!(b, b2);
        assert_eq!(side, side2);
        std::fs::remove_dir_all(&dir).ok();
    }
}
