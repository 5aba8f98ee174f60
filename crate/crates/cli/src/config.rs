//! Run configuration: one JSON document, every field optional except the
//! schema version, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use cvqkd_core::adaptation::{LlrModel, SnrLookup};
use cvqkd_core::constellation::{build_ps_qam, default_shaping_rate, Modulation};
use cvqkd_core::fso_channel::{reference_settings, ReceiverModel, TurbulenceParams};
use cvqkd_core::ldpc::{DecoderConfig, GirthTarget, Protograph, DEFAULT_LIFT};
use cvqkd_core::mdr::Dimension;
use cvqkd_core::security::{snr_of, SecurityParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub modulation: ModulationConfig,
    #[serde(default = "reference_settings")]
    pub turbulence: Vec<TurbulenceParams>,
    #[serde(default)]
    pub code: CodeConfig,
    #[serde(default = "default_decoder")]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub fer_sweep: FerSweepConfig,
    #[serde(default)]
    pub table: TableConfig,
    #[serde(default)]
    pub campaign: CampaignSection,
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_decoder() -> DecoderConfig {
    DecoderConfig::sum_product(100)
}

/// Physical parameters shared by the channel model and the security analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Modulation variance per quadrature (SNU).
    pub va: f64,
    pub eta: f64,
    /// Excess noise (SNU).
    pub xi: f64,
    /// Shot-noise to electronic-noise clearance (dB).
    pub clearance_db: f64,
    pub block_size: u64,
    pub epsilon_pe: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let s = SecurityParams::reference_defaults();
        let r = ReceiverModel::reference_defaults();
        Self {
            va: s.va,
            eta: r.eta,
            xi: r.xi,
            clearance_db: r.clearance_db,
            block_size: s.block_size,
            epsilon_pe: s.epsilon_pe,
        }
    }
}

impl SystemConfig {
    pub fn receiver(&self) -> ReceiverModel {
        ReceiverModel {
            eta: self.eta,
            clearance_db: self.clearance_db,
            xi: self.xi,
        }
    }

    pub fn security(&self) -> SecurityParams {
        SecurityParams {
            va: self.va,
            eta: self.eta,
            xi: self.xi,
            v_el: self.receiver().v_el(),
            block_size: self.block_size,
            epsilon_pe: self.epsilon_pe,
        }
    }

    /// Per-quadrature SNR at transmittance `t`.
    pub fn snr(&self, t: f64) -> f64 {
        snr_of(&self.security(), t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulationConfig {
    #[default]
    Gaussian,
    /// Probabilistically shaped square QAM; `nu` defaults to the rate that
    /// best matches Gaussian modulation at the mean SNR of the settings.
    PsQam { order: usize, nu: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    /// Protograph text file; the shipped code when absent.
    #[serde(default)]
    pub protograph: Option<PathBuf>,
    #[serde(default = "default_lift")]
    pub lift: usize,
    #[serde(default = "default_code_seed")]
    pub seed: u64,
    #[serde(default = "default_girth")]
    pub girth: usize,
}

fn default_lift() -> usize {
    DEFAULT_LIFT
}

fn default_code_seed() -> u64 {
    1
}

fn default_girth() -> usize {
    6
}

impl Default for CodeConfig {
    fn default() -> Self {
        Self {
            protograph: None,
            lift: default_lift(),
            seed: default_code_seed(),
            girth: default_girth(),
        }
    }
}

/// An explicit list of efficiencies or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl BetaGrid {
    /// Grid values rounded to 1e-9 so that ranges print cleanly.
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            BetaGrid::List(v) => v.clone(),
            BetaGrid::Range { start, stop, step } => {
                ensure!(*step > 0.0, "beta range step must be positive, got {step}");
                ensure!(stop >= start, "beta range stop {stop} is below start {start}");
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| start + i as f64 * step).collect()
            }
        };
        let v: Vec<f64> = v.into_iter().map(|b| (b * 1e9).round() / 1e9).collect();
        ensure!(!v.is_empty(), "beta grid is empty");
        for b in &v {
            ensure!(*b > 0.0 && *b <= 1.5, "beta {b} outside (0, 1.5]");
        }
        ensure!(v.windows(2).all(|w| w[0] < w[1]), "beta grid must be strictly increasing");
        Ok(v)
    }
}

fn default_table_betas() -> BetaGrid {
    BetaGrid::Range {
        start: 0.85,
        stop: 0.99,
        step: 0.01,
    }
}

fn default_sweep_betas() -> BetaGrid {
    BetaGrid::Range {
        start: 0.76,
        stop: 0.94,
        step: 0.02,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FerSweepConfig {
    /// Reconciliation dimensions to sweep.
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    /// Adds the BI-AWGN reference curve.
    #[serde(default = "yes")]
    pub bi_awgn: bool,
    /// Transmittance of the sweep's operating point.
    #[serde(default = "default_sweep_t")]
    pub transmittance: f64,
    #[serde(default = "default_sweep_betas")]
    pub betas: BetaGrid,
    #[serde(default = "default_sweep_trials")]
    pub trials: u64,
}

fn default_dims() -> Vec<usize> {
    vec![8, 128]
}

fn yes() -> bool {
    true
}

fn default_sweep_t() -> f64 {
    0.38
}

fn default_sweep_trials() -> u64 {
    500
}

impl Default for FerSweepConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            bi_awgn: true,
            transmittance: default_sweep_t(),
            betas: default_sweep_betas(),
            trials: default_sweep_trials(),
        }
    }
}

impl FerSweepConfig {
    pub fn models(&self) -> Result<Vec<LlrModel>> {
        let mut out = self
            .dims
            .iter()
            .map(|&d| Ok(LlrModel::Mdr(Dimension::new(d)?)))
            .collect::<Result<Vec<_>>>()?;
        if self.bi_awgn {
            out.push(LlrModel::BiAwgn);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    #[serde(default = "default_table_dim")]
    pub dim: usize,
    /// Explicit SNR grid; by default `snr_points` values spanning the
    /// transmittance range of the turbulence settings.
    #[serde(default)]
    pub snr_grid: Option<Vec<f64>>,
    #[serde(default = "default_snr_points")]
    pub snr_points: usize,
    #[serde(default = "default_table_betas")]
    pub betas: BetaGrid,
    #[serde(default = "default_table_trials")]
    pub trials: u64,
    #[serde(default)]
    pub lookup: SnrLookup,
    /// Where the table is stored; relative paths are inside the output directory.
    #[serde(default = "default_table_path")]
    pub path: PathBuf,
}

fn default_table_dim() -> usize {
    128
}

fn default_snr_points() -> usize {
    7
}

fn default_table_trials() -> u64 {
    100
}

fn default_table_path() -> PathBuf {
    PathBuf::from("beta_fer_table.json")
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            dim: default_table_dim(),
            snr_grid: None,
            snr_points: default_snr_points(),
            betas: default_table_betas(),
            trials: default_table_trials(),
            lookup: SnrLookup::default(),
            path: default_table_path(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    #[serde(default = "default_blocks")]
    pub blocks_per_setting: usize,
    /// Symbols per block used for parameter estimation; the whole block by default.
    #[serde(default)]
    pub pe_symbols: Option<usize>,
    /// Fixed efficiencies to sweep; all table columns by default.
    #[serde(default)]
    pub fixed_betas: Option<Vec<f64>>,
    /// Frames decoded per block at the adaptive choice to report an empirical FER.
    #[serde(default)]
    pub empirical_frames: u64,
}

fn default_blocks() -> usize {
    200
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            blocks_per_setting: default_blocks(),
            pe_symbols: None,
            fixed_betas: None,
            empirical_frames: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("config is not a valid RunConfig document")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Defaults for everything.
    pub fn default_config() -> Self {
        Self::from_json(&format!("{{\"schema_version\": {SCHEMA_VERSION}}}")).expect("defaults parse")
    }

    /// Checks every cross-field constraint; messages name the offending key.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        self.system.receiver().validate().context("system")?;
        self.system.security().validate().context("system")?;
        ensure!(self.system.block_size >= 10_000, "system.block_size must be at least 10000");
        ensure!(!self.turbulence.is_empty(), "turbulence: at least one setting is required");
        for (i, t) in self.turbulence.iter().enumerate() {
            t.validate().with_context(|| format!("turbulence[{i}]"))?;
        }
        self.modulation().context("modulation")?;
        self.protograph().context("code.protograph")?;
        ensure!(self.code.lift >= 2, "code.lift must be at least 2");
        self.girth()?;
        ensure!(self.decoder.max_iter > 0, "decoder.max_iter must be positive");

        let s = &self.fer_sweep;
        ensure!(!s.dims.is_empty(), "fer_sweep.dims is empty; list at least one dimension");
        s.models().context("fer_sweep.dims")?;
        ensure!(
            s.transmittance > 0.0 && s.transmittance <= 1.0,
            "fer_sweep.transmittance must lie in (0, 1]"
        );
        s.betas.values().context("fer_sweep.betas")?;
        ensure!(s.trials > 0, "fer_sweep.trials must be positive");

        let t = &self.table;
        Dimension::new(t.dim).context("table.dim")?;
        if let Some(g) = &t.snr_grid {
            ensure!(!g.is_empty(), "table.snr_grid is empty");
            ensure!(g.iter().all(|&x| x > 0.0 && x.is_finite()), "table.snr_grid values must be positive");
        } else {
            ensure!(t.snr_points >= 1, "table.snr_points must be at least 1");
        }
        let betas = t.betas.values().context("table.betas")?;
        ensure!(t.trials > 0, "table.trials must be positive");

        let c = &self.campaign;
        ensure!(c.blocks_per_setting > 0, "campaign.blocks_per_setting must be positive");
        let pe = self.pe_symbols();
        ensure!(pe >= 10_000, "campaign.pe_symbols must be at least 10000, got {pe}");
        ensure!(
            pe as u64 <= self.system.block_size,
            "campaign.pe_symbols {pe} exceeds system.block_size {}",
            self.system.block_size
        );
        if let Some(f) = &c.fixed_betas {
            for b in f {
                ensure!(
                    betas.iter().any(|g| (g - b).abs() < 1e-9),
                    "campaign.fixed_betas: {b} is not in table.betas"
                );
            }
        }
        Ok(())
    }

    pub fn modulation(&self) -> Result<Modulation> {
        match self.modulation {
            ModulationConfig::Gaussian => Ok(Modulation::Gaussian { variance: self.system.va }),
            ModulationConfig::PsQam { order, nu } => {
                let nu = match nu {
                    Some(nu) => nu,
                    None => default_shaping_rate(order, self.system.snr(self.mean_transmittance()))?,
                };
                Ok(Modulation::Shaped(build_ps_qam(order, nu, self.system.va)?))
            }
        }
    }

    pub fn mean_transmittance(&self) -> f64 {
        self.turbulence.iter().map(|t| t.mean_t).sum::<f64>() / self.turbulence.len().max(1) as f64
    }

    pub fn protograph(&self) -> Result<Protograph> {
        match &self.code.protograph {
            None => Ok(Protograph::default_code()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(Protograph::parse(&text)?)
            }
        }
    }

    pub fn girth(&self) -> Result<GirthTarget> {
        match self.code.girth {
            6 => Ok(GirthTarget::Six),
            8 => Ok(GirthTarget::Eight),
            g => bail!("code.girth must be 6 or 8, got {g}"),
        }
    }

    pub fn pe_symbols(&self) -> usize {
        self.campaign.pe_symbols.unwrap_or(self.system.block_size as usize)
    }

    pub fn table_model(&self) -> Result<LlrModel> {
        Ok(LlrModel::Mdr(Dimension::new(self.table.dim)?))
    }
}
