//! Key-rate campaign over turbulence settings: fixed-β sweep against
//! per-block adaptive β.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{measure_fer, select_beta, BetaFerTable, Selection, SnrLookup};
use super::AdaptationError;
use crate::constellation::Modulation;
use crate::fso_channel::{draw_fading, sample_estimate, ReceiverModel, TurbulenceParams};
use crate::ldpc::{DecoderConfig, ExpandedCode};
use crate::rng::{derive_seed, sim_rng};
use crate::security::{finite_size_chi, rate_for_efficiency, skr, SecurityParams};
use crate::stats::mean_ci95;

/// Optional decoding of real frames for the adaptive choice of each block.
#[derive(Debug, Clone, Copy)]
pub struct EmpiricalCheck<'a> {
    pub code: &'a ExpandedCode,
    pub frames_per_block: u64,
    pub decoder: DecoderConfig,
}

#[derive(Debug, Clone)]
pub struct CampaignConfig<'a> {
    pub settings: &'a [TurbulenceParams],
    pub blocks_per_setting: usize,
    pub receiver: ReceiverModel,
    pub security: SecurityParams,
    pub modulation: &'a Modulation,
    pub table: &'a BetaFerTable,
    /// Fixed efficiencies to compare against; each must be a table column.
    pub fixed_betas: &'a [f64],
    pub lookup: SnrLookup,
    /// Symbols used for parameter estimation in each block.
    pub pe_symbols: usize,
    pub seed: u64,
    pub empirical: Option<EmpiricalCheck<'a>>,
}

impl CampaignConfig<'_> {
    fn validate(&self) -> Result<(), AdaptationError> {
        let bad = |m: String| Err(AdaptationError::Config(m));
        for p in self.settings {
            p.validate()?;
        }
        self.receiver.validate()?;
        self.security.validate()?;
        if self.settings.is_empty() || self.blocks_per_setting == 0 {
            return bad("need at least one setting and one block".into());
        }
        if (self.security.eta - self.receiver.eta).abs() > 1e-12 {
            return bad(format!(
                "security eta {} differs from receiver eta {}",
                self.security.eta, self.receiver.eta
            ));
        }
        if (self.security.v_el - self.receiver.v_el()).abs() > 1e-12 {
            return bad(format!(
                "security v_el {} differs from the receiver clearance ({} SNU)",
                self.security.v_el,
                self.receiver.v_el()
            ));
        }
        if (self.security.va - self.modulation.variance()).abs() > 1e-9 * self.security.va {
            return bad(format!(
                "security V_A {} differs from the modulation variance {}",
                self.security.va,
                self.modulation.variance()
            ));
        }
        for b in self.fixed_betas {
            if !self.table.beta_grid.iter().any(|g| (g - b).abs() < 1e-9) {
                return bad(format!("fixed beta {b} is not a column of the table"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fixed,
    Adaptive,
}

/// One line of the campaign CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub setting_id: usize,
    pub sigma_i: f64,
    pub beta_jitter: f64,
    pub block_id: usize,
    pub t_block: f64,
    pub i_ab: f64,
    /// `None` when the worst-case channel admits no key.
    pub chi_be: Option<f64>,
    pub mode: Mode,
    /// `None` for a skipped adaptive block or a missing table cell.
    pub beta: Option<f64>,
    pub fer_pred: Option<f64>,
    pub fer_emp: Option<f64>,
    pub skr: f64,
}

pub const CSV_HEADER: &str = "setting_id,sigma_I,beta_jitter,block_id,T_block,I_AB,chi_BE,mode,beta,fer_pred,fer_emp,skr";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CampaignRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.setting_id,
            self.sigma_i,
            self.beta_jitter,
            self.block_id,
            self.t_block,
            self.i_ab,
            opt(self.chi_be),
            match self.mode {
                Mode::Fixed => "fixed",
                Mode::Adaptive => "adaptive",
            },
            opt(self.beta),
            opt(self.fer_pred),
            opt(self.fer_emp),
            self.skr
        )
    }
}

/// Mean key rates of one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting_id: usize,
    pub sigma_i: f64,
    pub beta_jitter: f64,
    pub mean_t: f64,
    pub blocks: usize,
    /// `(β, mean SKR, 95% half-width)` per fixed efficiency.
    pub fixed: Vec<(f64, f64, f64)>,
    pub best_fixed_beta: f64,
    pub best_fixed_skr: f64,
    pub adaptive_skr: f64,
    pub adaptive_ci: f64,
    /// `adaptive/best fixed − 1`; infinite when the best fixed rate is zero.
    pub gain: f64,
    /// Mean and 95% half-width of the per-block difference adaptive − best fixed.
    pub gain_abs: f64,
    pub gain_abs_ci: f64,
    pub skipped_blocks: usize,
    /// Adaptive rows whose choice differs from the best fixed β.
    pub switched_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub rows: Vec<CampaignRow>,
    pub summaries: Vec<SettingSummary>,
}

pub const SUMMARY_HEADER: &str = "setting_id,sigma_I,beta_jitter,mean_T,mode,beta,mean_skr,ci95";

impl CampaignReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }

    /// SKR-vs-β curve per setting plus the adaptive level, one row each.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for s in &self.summaries {
            let head = format!("{},{},{},{}", s.setting_id, s.sigma_i, s.beta_jitter, s.mean_t);
            for &(beta, mean, ci) in &s.fixed {
                writeln!(w, "{head},fixed,{beta},{mean},{ci}")?;
            }
            writeln!(w, "{head},adaptive,,{},{}", s.adaptive_skr, s.adaptive_ci)?;
        }
        Ok(())
    }
}

/// Rows of one block: the fixed sweep followed by the adaptive choice.
fn simulate_block(cfg: &CampaignConfig, setting_id: usize, block_id: usize) -> Result<Vec<CampaignRow>, AdaptationError> {
    let p = &cfg.settings[setting_id];
    let block_seed = derive_seed(cfg.seed, &[setting_id as u64, block_id as u64]);
    let mut rng = sim_rng(block_seed);
    let t_block = draw_fading(p, &mut rng).transmittance;
    let est = sample_estimate(cfg.modulation, t_block, &cfg.receiver, cfg.pe_symbols, &mut rng)?;
    let snr = est.snr_hat;
    let i_ab = cfg.modulation.mutual_information(snr);
    let chi_be = finite_size_chi(&cfg.security, est.t_hat, est.xi_hat, cfg.pe_symbols as u64)?.chi();

    let row = |mode, beta: Option<f64>, fer_pred: Option<f64>, skr| CampaignRow {
        setting_id,
        sigma_i: p.sigma_i,
        beta_jitter: p.beta_jitter,
        block_id,
        t_block,
        i_ab,
        chi_be,
        mode,
        beta,
        fer_pred,
        fer_emp: None,
        skr,
    };
    let mut rows = Vec::with_capacity(cfg.fixed_betas.len() + 1);
    for &beta in cfg.fixed_betas {
        let fer = cfg.table.fer_at(snr, beta, cfg.lookup);
        let rate = match (fer, chi_be) {
            (Some(f), Some(chi)) => skr(i_ab, chi, beta, f, 1.0).skr,
            _ => 0.0,
        };
        rows.push(row(Mode::Fixed, Some(beta), fer, rate));
    }
    let choice = match chi_be {
        Some(chi) => select_beta(cfg.table, snr, i_ab, chi, cfg.lookup),
        None => Selection::Skip,
    };
    let mut adaptive = match choice {
        Selection::Use { beta, fer, skr } => row(Mode::Adaptive, Some(beta), Some(fer), skr),
        Selection::Skip => row(Mode::Adaptive, None, None, 0.0),
    };
    if let (Some(check), Some(beta)) = (cfg.empirical, adaptive.beta) {
        // frames see the true channel; the rate follows from the estimate
        let true_snr = cfg.receiver.gain(t_block).powi(2) * cfg.modulation.variance() / cfg.receiver.noise_variance(t_block);
        let (_, failures, _) = measure_fer(
            check.code,
            cfg.table.model,
            cfg.modulation,
            true_snr,
            rate_for_efficiency(beta, i_ab),
            check.frames_per_block,
            check.decoder,
            derive_seed(block_seed, &[1]),
        )?;
        adaptive.fer_emp = Some(failures as f64 / check.frames_per_block as f64);
    }
    rows.push(adaptive);
    Ok(rows)
}

fn summarize(cfg: &CampaignConfig, setting_id: usize, rows: &[CampaignRow]) -> SettingSummary {
    let p = &cfg.settings[setting_id];
    let nb = cfg.fixed_betas.len();
    let per_block: Vec<&[CampaignRow]> = rows.chunks(nb + 1).collect();
    let fixed: Vec<(f64, f64, f64)> = (0..nb)
        .map(|j| {
            let v: Vec<f64> = per_block.iter().map(|b| b[j].skr).collect();
            let (m, ci) = mean_ci95(&v);
            (cfg.fixed_betas[j], m, ci)
        })
        .collect();
    // best mean; ties to the lower β
    let mut best = 0;
    for j in 1..nb {
        let better = fixed[j].1 > fixed[best].1 || (fixed[j].1 == fixed[best].1 && fixed[j].0 < fixed[best].0);
        if better {
            best = j;
        }
    }
    let adaptive: Vec<f64> = per_block.iter().map(|b| b[nb].skr).collect();
    let (adaptive_skr, adaptive_ci) = mean_ci95(&adaptive);
    let diffs: Vec<f64> = per_block.iter().map(|b| b[nb].skr - b[best].skr).collect();
    let (gain_abs, gain_abs_ci) = mean_ci95(&diffs);
    let (best_fixed_beta, best_fixed_skr) = if nb > 0 { (fixed[best].0, fixed[best].1) } else { (f64::NAN, 0.0) };
    let gain = if best_fixed_skr > 0.0 {
        adaptive_skr / best_fixed_skr - 1.0
    } else if adaptive_skr > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    SettingSummary {
        setting_id,
        sigma_i: p.sigma_i,
        beta_jitter: p.beta_jitter,
        mean_t: p.mean_t,
        blocks: per_block.len(),
        fixed,
        best_fixed_beta,
        best_fixed_skr,
        adaptive_skr,
        adaptive_ci,
        gain,
        gain_abs,
        gain_abs_ci,
        skipped_blocks: per_block.iter().filter(|b| b[nb].beta.is_none()).count(),
        switched_blocks: per_block
            .iter()
            .filter(|b| b[nb].beta.is_some_and(|x| (x - best_fixed_beta).abs() > 1e-9))
            .count(),
    }
}

/// Simulates `blocks_per_setting` blocks for every setting.
///
/// Each block draws its transmittance and channel estimate from its own seed
/// path, so the report is identical for any thread count.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport, AdaptationError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.settings.len())
        .flat_map(|s| (0..cfg.blocks_per_setting).map(move |b| (s, b)))
        .collect();
    let per_block: Vec<Vec<CampaignRow>> = jobs
        .par_iter()
        .map(|&(s, b)| simulate_block(cfg, s, b))
        .collect::<Result<_, _>>()?;
    let width = cfg.fixed_betas.len() + 1;
    let rows: Vec<CampaignRow> = per_block.into_iter().flatten().collect();
    let summaries = rows
        .chunks(width * cfg.blocks_per_setting)
        .enumerate()
        .map(|(s, r)| summarize(cfg, s, r))
        .collect();
    Ok(CampaignReport { rows, summaries })
}
