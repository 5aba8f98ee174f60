//! Fast invariant checks over the configured system, run by `validate`.

use std::fmt::Write as _;
use std::fs;

use anyhow::Result;
use rand::Rng;
use serde_json::json;

use cvqkd_core::adaptation::{reconcile_block, FrameLayout, Roles};
use cvqkd_core::constellation::Modulation;
use cvqkd_core::fso_channel::{sample_fading, sample_transmittance, QuantumBlock};
use cvqkd_core::ldpc::io::{h_from_text, h_to_text};
use cvqkd_core::ldpc::{choose_sp, ExpandedCode};
use cvqkd_core::mdr::{algebra, apply_rotation, encode_rotation, spherical_word, Dimension, VirtualChannel};
use cvqkd_core::rng::{derive_seed, sim_rng};
use cvqkd_core::security::{finite_size_chi, holevo_bound, mutual_information_with};

use crate::commands::Run;

const VALIDATE_STREAM: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

pub const VALIDATION_HEADER: &str = "check,status,detail";

fn norm_multiplicativity(seed: u64) -> Check {
    let mut rng = sim_rng(seed);
    let mut worst = 0.0f64;
    for d in [1usize, 2, 4, 8] {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let lhs = algebra::norm(&algebra::mul(&x, &y));
            let rhs = algebra::norm(&x) * algebra::norm(&y);
            worst = worst.max((lhs - rhs).abs() / rhs.max(1.0));
        }
    }
    Check::new("algebra_norm", worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn rotation_exactness(seed: u64) -> Result<Check> {
    let mut rng = sim_rng(seed);
    let mut worst = 0.0f64;
    for d in [8usize, 128] {
        let dim = Dimension::new(d)?;
        for _ in 0..200 {
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = algebra::norm(&y);
            let y_hat: Vec<f64> = y.iter().map(|v| v / n).collect();
            let bits: Vec<u8> = (0..d).map(|_| rng.gen_range(0..2u8)).collect();
            let u = spherical_word(&bits);
            let msg = encode_rotation(&y_hat, &u, dim)?;
            let img = apply_rotation(&msg, &y_hat);
            for (a, b) in img.iter().zip(&u) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok(Check::new("rotation_maps_y_to_u", worst <= 1e-10, format!("max error {worst:.2e}")))
}

fn security_point(run: &Run) -> Result<Vec<Check>> {
    let cfg = &run.cfg;
    let p = cfg.system.security();
    let m = cfg.modulation()?;
    let t = cfg.mean_transmittance();
    let i_ab = mutual_information_with(&p, t, &m);
    let chi = holevo_bound(&p, t)?;
    let fs = finite_size_chi(&p, t, p.xi, p.block_size)?;
    let mut out = vec![Check::new(
        "holevo_below_mutual_information",
        chi < i_ab,
        format!("T {t} I_AB {i_ab:.5} chi {chi:.5}"),
    )];
    out.push(match fs.chi() {
        Some(c) => Check::new(
            "finite_size_exceeds_asymptotic",
            c > chi,
            format!("finite {c:.5} asymptotic {chi:.5}"),
        ),
        None => Check::new("finite_size_exceeds_asymptotic", true, "no key at the worst-case channel".into()),
    });
    if let Modulation::Shaped(c) = &m {
        let total: f64 = c.probabilities().iter().sum();
        let ok = (total - 1.0).abs() < 1e-10 && (c.variance() - cfg.system.va).abs() < 1e-9 * cfg.system.va;
        out.push(Check::new(
            "constellation_normalized",
            ok,
            format!("sum {total:.12} variance {:.9}", c.variance()),
        ));
    }
    Ok(out)
}

fn code_checks(code: &ExpandedCode, seed: u64) -> Result<Vec<Check>> {
    let mut rng = sim_rng(seed);
    let mut bad = 0;
    for _ in 0..20 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2u8)).collect();
        if !code.h.is_codeword(&code.encode(&info)?) {
            bad += 1;
        }
    }
    let h2 = h_from_text(&h_to_text(&code.h))?;
    let mut out = vec![
        Check::new("encoder_parity", bad == 0, format!("{bad} of 20 words violate H")),
        Check::new("h_round_trip", h2 == code.h, format!("{} edges", code.h.n_edges())),
        Check::new("no_four_cycles", !code.h.has_four_cycle(), format!("girth >= {}", code.girth)),
    ];
    let mut worst = 0.0f64;
    let (n, k) = (code.n(), code.k());
    for i in 0..=20 {
        let target = 0.15 + 0.01 * i as f64;
        let ra = choose_sp(target, code)?;
        worst = worst.max((ra.effective_rate(n, k) - target).abs());
    }
    out.push(Check::new(
        "rate_adaptation_accuracy",
        worst <= 1.0 / (n / 2) as f64,
        format!("max |R - target| {worst:.2e}"),
    ));
    Ok(out)
}

fn noiseless_reconciliation(code: &ExpandedCode, run: &Run, seed: u64) -> Result<Check> {
    let d = Dimension::new(run.cfg.table.dim)?;
    let ra = choose_sp(0.25, code)?;
    let lay = FrameLayout::new(code, &ra, d);
    let m = run.cfg.modulation()?;
    let x = m.sample_quadratures(lay.reals, &mut sim_rng(seed));
    let b = QuantumBlock {
        y: x.clone(),
        x,
        t_block: 1.0,
        block_size: lay.reals / 2,
    };
    let roles = Roles {
        channel: VirtualChannel { gain: 1.0, noise: 1e-6 },
        qrng_seed: derive_seed(seed, &[1]),
        hash_seed: derive_seed(seed, &[2]),
        decoder: run.cfg.decoder,
    };
    let o = reconcile_block(&b, code, &ra, d, &roles)?;
    Ok(Check::new(
        "noiseless_frame_verifies",
        o.frames_failed == 0 && o.key_bob == o.key_alice,
        format!("{} of {} frames failed", o.frames_failed, o.frames_total),
    ))
}

fn fading_checks(run: &Run, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (i, p) in run.cfg.turbulence.iter().enumerate() {
        let s = derive_seed(seed, &[i as u64]);
        let t = sample_transmittance(p, 100_000, s)?;
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let mut ok = (mean / p.mean_t - 1.0).abs() <= 0.01;
        let mut detail = format!("setting {i}: mean T {mean:.5}");
        if p.sigma_i > 0.0 {
            let draws = sample_fading(p, 100_000, s);
            let n = draws.len() as f64;
            let m1 = draws.iter().map(|d| d.scintillation).sum::<f64>() / n;
            let m2 = draws.iter().map(|d| d.scintillation * d.scintillation).sum::<f64>() / n;
            let si = m2 / (m1 * m1) - 1.0;
            ok &= (si / p.sigma_i - 1.0).abs() <= 0.05;
            write!(detail, " scintillation index {si:.5}").unwrap();
        }
        out.push(Check::new("fading_statistics", ok, detail));
    }
    Ok(out)
}

/// Runs every check, writes `validation.csv` and returns the results.
pub fn validate(run: &Run) -> Result<Vec<Check>> {
    fs::create_dir_all(&run.out)?;
    let seed = derive_seed(run.seed(), &[VALIDATE_STREAM]);
    let code = run.build_code()?;
    let mut checks = vec![Check::new("config", true, "schema and cross-field constraints".into())];
    checks.push(norm_multiplicativity(derive_seed(seed, &[0])));
    checks.push(rotation_exactness(derive_seed(seed, &[1]))?);
    checks.extend(security_point(run)?);
    checks.extend(code_checks(&code, derive_seed(seed, &[2]))?);
    checks.push(noiseless_reconciliation(&code, run, derive_seed(seed, &[3]))?);
    checks.extend(fading_checks(run, derive_seed(seed, &[4]))?);

    let mut csv = String::from(VALIDATION_HEADER);
    csv.push('\n');
    for c in &checks {
        let status = if c.passed { "pass" } else { "fail" };
        writeln!(csv, "{},{status},\"{}\"", c.name, c.detail).unwrap();
    }
    let path = run.out.join("validation.csv");
    fs::write(&path, csv)?;
    crate::commands::record(run, "validate", json!({ "validate": seed }), &code, &[path])?;
    Ok(checks)
}
