//! Mutual information, Holevo bound, finite-size penalty and key rate.
//!
//! Conventions: `va` is the modulation variance per quadrature in SNU, Bob
//! uses heterodyne detection, and mutual information is counted per complex
//! symbol. The detector inefficiency `eta` and electronic noise `v_el` are
//! trusted and modelled as a beamsplitter mixing the signal with one arm of a
//! thermal EPR pair.

pub mod gaussian;

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::Modulation;
use crate::stats::normal_upper_quantile;
use gaussian::{condition_on_heterodyne, entropy, symplectic_eigenvalues, symplectic_spectrum};

pub use gaussian::g;

/// Symbol rate of the reference transmitter, in baud.
pub const SYMBOL_RATE: f64 = 250e6;

/// Closest the detector efficiency may get to 1 while electronic noise is
/// nonzero; the noise EPR variance diverges as `eta → 1`.
const ETA_CLAMP: f64 = 1.0 - 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SecurityError {
    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("covariance matrix is not physical (smallest symplectic eigenvalue {0})")]
    NonPhysical(f64),
    #[error("invalid security parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    /// Modulation variance per quadrature (SNU).
    pub va: f64,
    pub eta: f64,
    /// Excess noise referred to the channel input (SNU).
    pub xi: f64,
    /// Electronic noise (SNU).
    pub v_el: f64,
    pub block_size: u64,
    pub epsilon_pe: f64,
}

impl SecurityParams {
    /// The average operating point of the reference link.
    pub fn reference_defaults() -> Self {
        Self {
            va: 7.44,
            eta: 0.4,
            xi: 0.0045,
            v_el: 0.1,
            block_size: 6_800_000,
            epsilon_pe: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<(), SecurityError> {
        let bad = |m: &str| Err(SecurityError::InvalidParams(m.to_string()));
        if !(self.va > 0.0 && self.va.is_finite()) {
            return bad("va must be positive");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return bad("xi must be non-negative");
        }
        if !(self.v_el >= 0.0 && self.v_el.is_finite()) {
            return bad("v_el must be non-negative");
        }
        if !(self.epsilon_pe > 0.0 && self.epsilon_pe < 1.0) {
            return bad("epsilon_pe must lie in (0, 1)");
        }
        Ok(())
    }

    /// Copy with a different excess noise.
    pub fn with_xi(&self, xi: f64) -> Self {
        Self { xi, ..*self }
    }
}

/// Heterodyne signal-to-noise ratio per quadrature.
pub fn snr_of(p: &SecurityParams, t: f64) -> f64 {
    let signal = p.eta * t * p.va / 2.0;
    let noise = 1.0 + p.eta * t * p.xi / 2.0 + p.v_el;
    signal / noise
}

/// Gaussian-modulation mutual information `log2(1 + snr)` per complex symbol.
pub fn mutual_information(p: &SecurityParams, t: f64) -> f64 {
    snr_of(p, t).ln_1p() / std::f64::consts::LN_2
}

/// Mutual information for the given modulation; for a shaped constellation
/// this is the exact constellation-constrained value.
pub fn mutual_information_with(p: &SecurityParams, t: f64, m: &Modulation) -> f64 {
    m.mutual_information(snr_of(p, t))
}

/// Reconciliation efficiency of a code of rate `code_rate` (bits per real
/// quadrature) used at mutual information `i_ab` (bits per complex symbol).
pub fn efficiency_of_rate(code_rate: f64, i_ab: f64) -> f64 {
    2.0 * code_rate / i_ab
}

/// Code rate that realises efficiency `beta` at mutual information `i_ab`.
pub fn rate_for_efficiency(beta: f64, i_ab: f64) -> f64 {
    beta * i_ab / 2.0
}

/// Alice–Bob covariance matrix at the channel output, before the detector.
pub fn channel_covariance(va: f64, t: f64, xi: f64) -> Matrix4<f64> {
    let v = va + 1.0;
    let b = t * va + 1.0 + t * xi;
    let c = (t * (v * v - 1.0)).sqrt();
    Matrix4::new(
        v, 0.0, c, 0.0, //
        0.0, v, 0.0, -c, //
        c, 0.0, b, 0.0, //
        0.0, -c, 0.0, b,
    )
}

/// Holevo bound on Eve's information about Bob's heterodyne outcome.
pub fn holevo_bound(p: &SecurityParams, t: f64) -> Result<f64, SecurityError> {
    holevo_at(p, t, p.xi)
}

fn holevo_at(p: &SecurityParams, t: f64, xi: f64) -> Result<f64, SecurityError> {
    p.validate()?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(SecurityError::InvalidParams(format!(
            "transmittance {t} outside (0, 1]"
        )));
    }
    let gamma_ab = channel_covariance(p.va, t, xi);
    let (n1, n2) = symplectic_eigenvalues(&gamma_ab)?;
    let s_e = entropy(&[n1, n2]);

    // trusted detector: B mixes with F of an EPR pair (F, G) of variance w
    let eta = if p.v_el > 0.0 { p.eta.min(ETA_CLAMP) } else { p.eta };
    let w = if p.v_el > 0.0 {
        1.0 + 2.0 * p.v_el / (1.0 - eta)
    } else {
        1.0
    };
    let mut full = DMatrix::<f64>::zeros(8, 8);
    full.view_mut((0, 0), (4, 4))
        .copy_from(&DMatrix::from_column_slice(4, 4, gamma_ab.as_slice()));
    let epr = gaussian::two_mode_squeezed(w);
    full.view_mut((4, 4), (4, 4))
        .copy_from(&DMatrix::from_column_slice(4, 4, epr.as_slice()));
    // modes: A = 0, B = 1, F = 2, G = 3
    let (st, ct) = (eta.sqrt(), (1.0 - eta).sqrt());
    let mut bs = DMatrix::<f64>::identity(8, 8);
    for q in 0..2 {
        let (b, f) = (2 + q, 4 + q);
        bs[(b, b)] = st;
        bs[(b, f)] = ct;
        bs[(f, b)] = -ct;
        bs[(f, f)] = st;
    }
    let mixed = &bs * full * bs.transpose();
    let mixed = 0.5 * (&mixed + mixed.transpose());
    let conditional = condition_on_heterodyne(&mixed, 1, &[0, 2, 3]);
    let s_cond = entropy(&symplectic_spectrum(&conditional)?);
    Ok(s_e - s_cond)
}

/// Result of the finite-size worst-case evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiniteSizeChi {
    Bound {
        chi: f64,
        t_worst: f64,
        xi_worst: f64,
    },
    /// The worst-case channel is not physical; no key can be extracted.
    NoKey,
}

impl FiniteSizeChi {
    pub fn chi(&self) -> Option<f64> {
        match *self {
            FiniteSizeChi::Bound { chi, .. } => Some(chi),
            FiniteSizeChi::NoKey => None,
        }
    }
}

/// Holevo bound at worst-case channel parameters after estimation on
/// `n_used` symbols (known shot noise and electronic noise).
///
/// The estimators are `t̂ = Σxy/Σx²` with `t = sqrt(ηT/2)` and the residual
/// variance `σ̂² = 1 + ηTξ/2 + v_el`, each from `m = 2·n_used` real samples.
/// `t` is lowered by `z·sqrt(σ²/(m·V_A))` and `σ²` raised by `z·σ²·sqrt(2/m)`
/// with `z` the two-sided Gaussian quantile at `epsilon_pe`.
pub fn finite_size_chi(
    p: &SecurityParams,
    t_hat: f64,
    xi_hat: f64,
    n_used: u64,
) -> Result<FiniteSizeChi, SecurityError> {
    p.validate()?;
    if n_used == 0 {
        return Err(SecurityError::InvalidParams("n_used must be positive".into()));
    }
    let m = 2.0 * n_used as f64;
    let z = normal_upper_quantile(p.epsilon_pe / 2.0);
    let t_amp = (p.eta * t_hat / 2.0).sqrt();
    let sigma2 = 1.0 + p.eta * t_hat * xi_hat / 2.0 + p.v_el;
    let t_min = t_amp - z * (sigma2 / (m * p.va)).sqrt();
    let sigma2_max = sigma2 + z * sigma2 * (2.0 / m).sqrt();
    if t_min <= 0.0 {
        return Ok(FiniteSizeChi::NoKey);
    }
    let t_worst = 2.0 * t_min * t_min / p.eta;
    let xi_worst = (sigma2_max - 1.0 - p.v_el) * 2.0 / (p.eta * t_worst);
    if !(t_worst <= 1.0) || xi_worst < 0.0 {
        return Ok(FiniteSizeChi::NoKey);
    }
    match holevo_at(p, t_worst, xi_worst) {
        Ok(chi) => Ok(FiniteSizeChi::Bound {
            chi,
            t_worst,
            xi_worst,
        }),
        Err(SecurityError::NonPhysical(_)) => Ok(FiniteSizeChi::NoKey),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub i_ab: f64,
    pub chi_be: f64,
    pub beta: f64,
    pub fer: f64,
    /// Key rate in bits per symbol, clamped at zero.
    pub skr: f64,
    /// `(1 − fer)(β·I_AB − χ_BE)` before clamping.
    pub skr_raw: f64,
    pub skr_bits_per_s: f64,
    pub positive: bool,
}

/// `SKR = (1 − FER)(β·I_AB − χ_BE)`, clamped at zero.
pub fn skr(i_ab: f64, chi_be: f64, beta: f64, fer: f64, symbol_rate: f64) -> RateReport {
    assert!((0.0..=1.0).contains(&fer), "fer {fer} outside [0, 1]");
    assert!(beta > 0.0, "beta must be positive");
    let raw = (1.0 - fer) * (beta * i_ab - chi_be);
    let positive = raw > 0.0;
    let skr = if positive { raw } else { 0.0 };
    RateReport {
        i_ab,
        chi_be,
        beta,
        fer,
        skr,
        skr_raw: raw,
        skr_bits_per_s: skr * symbol_rate,
        positive,
    }
}

/// One CSV row of a rate report with its channel context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRecord {
    pub sigma_i: f64,
    pub beta_jitter: f64,
    pub t_hat: f64,
    pub xi_hat: f64,
    pub report: RateReport,
}

impl RateRecord {
    pub const CSV_HEADER: &'static str =
        "sigma_I,beta_jitter,T_hat,xi_hat,I_AB,chi_BE,beta,fer,skr_bits_per_symbol,skr_bits_per_s";

    pub fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.sigma_i,
            self.beta_jitter,
            self.t_hat,
            self.xi_hat,
            r.i_ab,
            r.chi_be,
            r.beta,
            r.fer,
            r.skr,
            r.skr_bits_per_s
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Symplectic eigenvalues from the complex spectrum of Ω·γ, computed by
    /// nalgebra's general eigen-solver.
    fn oracle_spectrum(cov: &DMatrix<f64>) -> Vec<f64> {
        let omega = gaussian::symplectic_form(cov.nrows() / 2);
        let ev = (omega * cov).complex_eigenvalues();
        let mut ims: Vec<f64> = ev.iter().map(|c| c.im.abs()).collect();
        ims.sort_by(|a, b| a.total_cmp(b));
        ims.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }

    #[test]
    fn snr_examples() {
        let p = SecurityParams {
            va: 2.0,
            eta: 1.0,
            xi: 0.0,
            v_el: 0.0,
            ..SecurityParams::reference_defaults()
        };
        assert!(close(snr_of(&p, 1.0), 1.0, 1e-15));
        assert!(close(mutual_information(&p, 1.0), 1.0, 1e-15));
        let reference = SecurityParams::reference_defaults();
        let snr = snr_of(&reference, 0.38);
        assert!(close(snr, 0.5139, 1e-3), "{snr}");
        let mut prev = 0.0;
        for k in 1..=100 {
            let s = snr_of(&reference, k as f64 / 100.0);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn mutual_information_at_reference_point() {
        let p = SecurityParams::reference_defaults();
        let i = mutual_information(&p, 0.38);
        assert!(close(i, 0.598, 1e-3), "{i}");
        // per real quadrature this is the code-rate scale of about 0.3
        assert!(((i / 2.0) - 0.3).abs() <= 0.15 * 0.3);
        let zero = SecurityParams { va: 1e-300, ..p };
        assert!(mutual_information(&zero, 0.38) < 1e-290);
    }

    #[test]
    fn holevo_reference_values() {
        let p = SecurityParams::reference_defaults();
        let chi = holevo_bound(&p, 0.38).unwrap();
        assert!(close(chi, 0.48439, 1e-4), "{chi}");
        let ideal = SecurityParams {
            eta: 1.0,
            v_el: 0.0,
            xi: 0.0,
            ..p
        };
        assert!(holevo_bound(&ideal, 1.0).unwrap().abs() < 1e-9);
        let (n1, n2) = symplectic_eigenvalues(&channel_covariance(7.44, 0.38, 0.0045)).unwrap();
        assert!(close(n1, 1.00244, 1e-4) && close(n2, 5.61353, 1e-4), "{n1} {n2}");
    }

    #[test]
    fn holevo_vanishes_without_modulation() {
        // with excess noise Eve keeps information on Bob's noise even at
        // V_A = 0, so the limit is taken on the pure-loss channel
        let p = SecurityParams::reference_defaults().with_xi(0.0);
        let mut prev = f64::INFINITY;
        for &va in &[1.0, 1e-2, 1e-4, 1e-6] {
            let chi = holevo_bound(&SecurityParams { va, ..p }, 0.38).unwrap();
            assert!(chi < prev);
            prev = chi;
        }
        assert!(prev < 1e-4, "{prev}");
    }

    #[test]
    fn positive_key_margin_at_reference_point() {
        let p = SecurityParams::reference_defaults();
        let i = mutual_information(&p, 0.38);
        let chi = holevo_bound(&p, 0.38).unwrap();
        assert!(chi > 0.0 && chi < 0.93 * i);
        assert!(close(0.93 * i - chi, 0.07198, 2e-4));
    }

    #[test]
    fn holevo_monotonicity_sweeps() {
        let p = SecurityParams::reference_defaults();
        for k in 1..=20 {
            let t = k as f64 * 0.05;
            let mut prev = -1.0;
            for j in 0..=10 {
                let chi = holevo_at(&p, t, j as f64 * 0.005).unwrap();
                assert!(chi >= prev - 1e-12, "T={t} xi step {j}");
                prev = chi;
            }
        }
        for j in 0..=4 {
            let xi = j as f64 * 0.01;
            let mut prev = -1.0;
            for k in 1..=20 {
                let t = k as f64 * 0.05;
                let q = p.with_xi(xi);
                let margin = mutual_information(&q, t) - holevo_bound(&q, t).unwrap();
                assert!(margin >= prev - 1e-12, "xi={xi} T={t}");
                prev = margin;
            }
        }
    }

    #[test]
    fn holevo_at_unit_efficiency_with_noise_is_finite() {
        let p = SecurityParams {
            eta: 1.0,
            ..SecurityParams::reference_defaults()
        };
        let chi = holevo_bound(&p, 0.5).unwrap();
        let near = holevo_bound(&SecurityParams { eta: 0.9999, ..p }, 0.5).unwrap();
        assert!(chi.is_finite() && close(chi, near, 1e-3), "{chi} {near}");
    }

    #[test]
    fn symplectic_routes_agree_with_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            // random physical state: S·diag(ν)·Sᵀ with S a product of
            // squeezers, phase rotations and beamsplitters
            let modes = if trial % 2 == 0 { 2 } else { 3 };
            let dim = 2 * modes;
            let mut cov = DMatrix::<f64>::zeros(dim, dim);
            for k in 0..modes {
                let nu = 1.0 + rng.gen::<f64>() * 4.0;
                cov[(2 * k, 2 * k)] = nu;
                cov[(2 * k + 1, 2 * k + 1)] = nu;
            }
            for _ in 0..4 {
                let mut s = DMatrix::<f64>::identity(dim, dim);
                let k = rng.gen_range(0..modes);
                let r: f64 = rng.gen_range(-1.0..1.0);
                s[(2 * k, 2 * k)] = r.exp();
                s[(2 * k + 1, 2 * k + 1)] = (-r).exp();
                let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let mut rot = DMatrix::<f64>::identity(dim, dim);
                rot[(2 * k, 2 * k)] = th.cos();
                rot[(2 * k, 2 * k + 1)] = th.sin();
                rot[(2 * k + 1, 2 * k)] = -th.sin();
                rot[(2 * k + 1, 2 * k + 1)] = th.cos();
                let l = (k + 1) % modes;
                let a: f64 = rng.gen_range(0.0..1.5);
                let mut bs = DMatrix::<f64>::identity(dim, dim);
                for q in 0..2 {
                    bs[(2 * k + q, 2 * k + q)] = a.cos();
                    bs[(2 * k + q, 2 * l + q)] = a.sin();
                    bs[(2 * l + q, 2 * k + q)] = -a.sin();
                    bs[(2 * l + q, 2 * l + q)] = a.cos();
                }
                let sym = bs * rot * s;
                cov = &sym * cov * sym.transpose();
                cov = 0.5 * (&cov + cov.transpose());
            }
            let oracle = oracle_spectrum(&cov);
            let general = symplectic_spectrum(&cov).unwrap();
            for (a, b) in oracle.iter().zip(&general) {
                assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{oracle:?} {general:?}");
            }
            if modes == 2 {
                let m4 = Matrix4::from_column_slice(cov.as_slice());
                let (lo, hi) = symplectic_eigenvalues(&m4).unwrap();
                assert!((lo - oracle[0]).abs() <= 1e-9 * oracle[0]);
                assert!((hi - oracle[1]).abs() <= 1e-9 * oracle[1]);
            }
        }
    }

    #[test]
    fn finite_size_reference_values() {
        let p = SecurityParams::reference_defaults();
        let asym = holevo_bound(&p, 0.38).unwrap();
        let fs = finite_size_chi(&p, 0.38, 0.0045, 6_800_000).unwrap().chi().unwrap();
        assert!(fs > asym);
        assert!(close(fs, 0.5085, 1e-3), "{fs}");
        let huge = finite_size_chi(&p, 0.38, 0.0045, 10_000_000_000_000_000_000)
            .unwrap()
            .chi()
            .unwrap();
        assert!((huge - asym).abs() < 1e-6, "{huge} {asym}");
        let mut prev = 0.0;
        for n in [1u64 << 26, 1 << 25, 1 << 24, 1 << 23, 1 << 22, 1 << 21, 1 << 20] {
            let chi = finite_size_chi(&p, 0.38, 0.0045, n).unwrap().chi().unwrap();
            assert!(chi > prev, "n={n}");
            prev = chi;
        }
    }

    #[test]
    fn finite_size_no_key_for_tiny_samples() {
        let p = SecurityParams::reference_defaults();
        assert_eq!(finite_size_chi(&p, 0.001, 0.0, 10_000).unwrap(), FiniteSizeChi::NoKey);
    }

    #[test]
    fn skr_examples() {
        let r = skr(0.3, 0.2, 0.93, 0.1, SYMBOL_RATE);
        assert!(close(r.skr, 0.0711, 1e-12));
        assert!(close(r.skr_bits_per_s, 0.0711 * 250e6, 1e-3));
        assert!(r.positive);
        let r = skr(0.3, 0.2, 0.93, 1.0, SYMBOL_RATE);
        assert_eq!(r.skr, 0.0);
        let r = skr(0.4, 0.2, 0.5, 0.0, SYMBOL_RATE);
        assert_eq!(r.skr, 0.0);
        assert!(!r.positive);
        let r = skr(0.3, 0.4, 0.9, 0.0, SYMBOL_RATE);
        assert!(!r.positive && r.skr == 0.0 && r.skr_raw < 0.0);
    }

    #[test]
    fn efficiency_round_trip() {
        let i = 0.598;
        let r = rate_for_efficiency(0.93, i);
        assert!(close(efficiency_of_rate(r, i), 0.93, 1e-15));
    }

    #[test]
    fn csv_row_has_ten_fields() {
        let rec = RateRecord {
            sigma_i: 0.01,
            beta_jitter: 3.0,
            t_hat: 0.38,
            xi_hat: 0.0045,
            report: skr(0.6, 0.48, 0.93, 0.05, SYMBOL_RATE),
        };
        assert_eq!(rec.csv_row().split(',').count(), 10);
        assert_eq!(RateRecord::CSV_HEADER.split(',').count(), 10);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = SecurityParams {
            eta: 1.5,
            ..SecurityParams::reference_defaults()
        };
        assert!(matches!(holevo_bound(&p, 0.5), Err(SecurityError::InvalidParams(_))));
        let p = SecurityParams::reference_defaults();
        assert!(holevo_bound(&p, 0.0).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn skr_identity(i in 0.0f64..2.0, chi in 0.0f64..2.0, beta in 0.5f64..1.0, fer in 0.0f64..=1.0) {
                let r = skr(i, chi, beta, fer, 1.0);
                let raw = (1.0 - fer) * (beta * i - chi);
                prop_assert_eq!(r.skr_raw, raw);
                if raw > 0.0 { prop_assert_eq!(r.skr, raw); } else { prop_assert_eq!(r.skr, 0.0); }
            }

            #[test]
            fn g_non_negative(x in 0.0f64..1e6) {
                prop_assert!(g(x) >= 0.0);
            }

            #[test]
            fn chi_non_decreasing_in_xi(t in 0.05f64..1.0, xi in 0.0f64..0.05, dxi in 0.0f64..0.05) {
                let p = SecurityParams::reference_defaults();
                let a = holevo_at(&p, t, xi).unwrap();
                let b = holevo_at(&p, t, xi + dxi).unwrap();
                prop_assert!(b >= a - 1e-12);
            }

            #[test]
            fn pure_states_have_unit_spectrum(v in 1.0f64..50.0) {
                let (lo, hi) = symplectic_eigenvalues(&gaussian::two_mode_squeezed(v)).unwrap();
                prop_assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
            }
        }
    }
}
