//! Subcommand implementations. Each writes its artifacts plus a
//! `manifest.json` into the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use cvqkd_core::adaptation::{
    build_table, measure_fer, run_campaign, BetaFerTable, CampaignConfig, CampaignReport, EmpiricalCheck, LlrModel,
    TableSpec,
};
use cvqkd_core::constellation::Modulation;
use cvqkd_core::fso_channel::sample_transmittance;
use cvqkd_core::ldpc::{expand_protograph, io::h_to_text, ExpandedCode, Protograph};
use cvqkd_core::rng::derive_seed;
use cvqkd_core::security::rate_for_efficiency;

use crate::config::RunConfig;

/// Sub-streams of the run seed, one per command.
const SWEEP_STREAM: u64 = 1;
const TABLE_STREAM: u64 = 2;
const CAMPAIGN_STREAM: u64 = 3;
const GRID_STREAM: u64 = 4;

/// Draws per setting used to place the automatic SNR grid.
const GRID_DRAWS: usize = 20_000;
const GRID_QUANTILE: f64 = 0.005;

/// A validated configuration bound to a seed and an output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Run {
    /// Applies the command-line overrides and validates.
    pub fn new(mut cfg: RunConfig, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let out = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        cfg.validate()?;
        Ok(Self { cfg, out })
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn build_code(&self) -> Result<ExpandedCode> {
        let p = self.cfg.protograph()?;
        let c = &self.cfg.code;
        Ok(expand_protograph(&p, c.lift, c.seed, self.cfg.girth()?)?)
    }

    fn table_path(&self) -> PathBuf {
        let p = &self.cfg.table.path;
        if p.is_absolute() {
            p.clone()
        } else {
            self.out.join(p)
        }
    }
}

/// `manifest.json`: one entry per command run into the directory.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    runs: BTreeMap<String, ManifestEntry>,
}

/// Everything needed to rerun one command.
#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    seed: u64,
    seeds: serde_json::Value,
    /// Effective configuration; `output_dir` is dropped since the manifest
    /// lives in it.
    config: RunConfig,
    code: serde_json::Value,
    outputs: Vec<OutputEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OutputEntry {
    file: String,
    bytes: u64,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

fn code_info(run: &Run, code: &ExpandedCode) -> Result<serde_json::Value> {
    let p = run.cfg.protograph()?;
    Ok(json!({
        "protograph": p.to_text(),
        "lift": run.cfg.code.lift,
        "seed": run.cfg.code.seed,
        "girth": run.cfg.code.girth,
        "n": code.n(),
        "k": code.k(),
        "h_sha256": sha256_hex(h_to_text(&code.h).as_bytes()),
    }))
}

fn write_manifest(run: &Run, command: &str, seeds: serde_json::Value, code: serde_json::Value, files: &[PathBuf]) -> Result<()> {
    let mut outputs = Vec::new();
    for f in files {
        let bytes = fs::read(f).with_context(|| format!("reading back {}", f.display()))?;
        let file = f
            .strip_prefix(&run.out)
            .unwrap_or(f)
            .to_string_lossy()
            .into_owned();
        outputs.push(OutputEntry {
            file,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let mut config = run.cfg.clone();
    config.output_dir = None;
    let path = run.path("manifest.json");
    let version = env!("CARGO_PKG_VERSION").to_string();
    let mut m = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .filter(|m| m.tool == "cvqkd" && m.version == version)
        .unwrap_or(Manifest {
            tool: "cvqkd".into(),
            version,
            runs: BTreeMap::new(),
        });
    m.runs.insert(
        command.to_string(),
        ManifestEntry {
            seed: run.seed(),
            seeds,
            config,
            code,
            outputs,
        },
    );
    write_text(&path, &(serde_json::to_string_pretty(&m)? + "\n"))
}

/// Writes the manifest for a command run by another module.
pub(crate) fn record(run: &Run, command: &str, seeds: serde_json::Value, code: &ExpandedCode, files: &[PathBuf]) -> Result<()> {
    write_manifest(run, command, seeds, code_info(run, code)?, files)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One point of a FER-vs-β curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub model: String,
    pub beta: f64,
    pub rate: f64,
    pub n_punctured: usize,
    pub n_shortened: usize,
    pub trials: u64,
    pub failures: u64,
    pub fer: f64,
    pub ci95: f64,
    pub mean_iterations: f64,
}

pub const SWEEP_HEADER: &str = "model,beta,snr,I_AB,rate,n_punctured,n_shortened,trials,failures,fer,ci95,mean_iterations";

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub snr: f64,
    pub i_ab: f64,
    pub points: Vec<SweepPoint>,
    pub files: Vec<PathBuf>,
}

impl SweepReport {
    pub fn curve(&self, model: &str) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.model == model).collect()
    }
}

fn model_key(m: LlrModel) -> u64 {
    match m {
        LlrModel::Mdr(d) => d.get() as u64,
        LlrModel::BiAwgn => 0,
    }
}

/// FER against β at the sweep transmittance for every configured model.
pub fn fer_sweep(run: &Run) -> Result<SweepReport> {
    run.prepare_out()?;
    let cfg = &run.cfg;
    let sweep = &cfg.fer_sweep;
    let code = run.build_code()?;
    let modulation = cfg.modulation()?;
    let snr = cfg.system.snr(sweep.transmittance);
    let i_ab = modulation.mutual_information(snr);
    let betas = sweep.betas.values()?;
    let base = derive_seed(run.seed(), &[SWEEP_STREAM]);

    let mut points = Vec::new();
    for model in sweep.models()? {
        for (j, &beta) in betas.iter().enumerate() {
            let rate = rate_for_efficiency(beta, i_ab);
            let seed = derive_seed(base, &[model_key(model), j as u64]);
            let (ra, failures, iters) =
                measure_fer(&code, model, &modulation, snr, rate, sweep.trials, cfg.decoder, seed)
                    .with_context(|| format!("{} at beta {beta}", model.label()))?;
            let fer = failures as f64 / sweep.trials as f64;
            let (lo, hi) = cvqkd_core::stats::wilson_interval(failures, sweep.trials, cvqkd_core::stats::Z95);
            eprintln!("fer-sweep {} beta {beta:.3}: {failures}/{}", model.label(), sweep.trials);
            points.push(SweepPoint {
                model: model.label(),
                beta,
                rate,
                n_punctured: ra.n_punctured,
                n_shortened: ra.n_shortened,
                trials: sweep.trials,
                failures,
                fer,
                ci95: 0.5 * (hi - lo),
                mean_iterations: iters,
            });
        }
    }

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for p in &points {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.model, p.beta, snr, i_ab, p.rate, p.n_punctured, p.n_shortened, p.trials, p.failures, p.fer, p.ci95,
            p.mean_iterations
        )
        .unwrap();
    }
    let path = run.path("fer_sweep.csv");
    write_text(&path, &csv)?;
    let files = vec![path];
    write_manifest(
        run,
        "fer-sweep",
        json!({ "sweep": base }),
        code_info(run, &code)?,
        &files,
    )?;
    Ok(SweepReport {
        snr,
        i_ab,
        points,
        files,
    })
}

/// Per-quadrature SNR grid for the table: explicit, or evenly spaced in dB
/// between the 0.5% and 99.5% transmittance quantiles of all settings.
pub fn snr_grid(run: &Run) -> Result<Vec<f64>> {
    let cfg = &run.cfg;
    if let Some(g) = &cfg.table.snr_grid {
        let mut g = g.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        return Ok(g);
    }
    let mut t = Vec::new();
    for (i, p) in cfg.turbulence.iter().enumerate() {
        let seed = derive_seed(run.seed(), &[GRID_STREAM, i as u64]);
        t.extend(sample_transmittance(p, GRID_DRAWS, seed)?);
    }
    t.sort_by(f64::total_cmp);
    let at = |q: f64| t[((t.len() - 1) as f64 * q).round() as usize];
    let (lo, hi) = (cfg.system.snr(at(GRID_QUANTILE)), cfg.system.snr(at(1.0 - GRID_QUANTILE)));
    let n = cfg.table.snr_points;
    if n == 1 || hi / lo < 1.0 + 1e-9 {
        let mid = cfg.system.snr(cfg.mean_transmittance());
        return Ok(vec![mid]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect())
}

/// A persisted table together with everything that determined it.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableFile {
    key: serde_json::Value,
    table: BetaFerTable,
}

fn table_key(run: &Run, grid: &[f64]) -> Result<serde_json::Value> {
    let cfg = &run.cfg;
    Ok(json!({
        "seed": derive_seed(run.seed(), &[TABLE_STREAM]),
        "protograph": cfg.protograph()?.to_text(),
        "code": cfg.code,
        "decoder": cfg.decoder,
        "system": cfg.system,
        "modulation": cfg.modulation,
        "dim": cfg.table.dim,
        "snr_grid": grid,
        "betas": cfg.table.betas.values()?,
        "trials": cfg.table.trials,
    }))
}

#[derive(Debug, Clone)]
pub struct TableOutcome {
    pub table: BetaFerTable,
    /// The table was read from disk instead of being measured.
    pub reused: bool,
    pub path: PathBuf,
}

fn measure_table(run: &Run, code: &ExpandedCode, modulation: &Modulation, grid: &[f64]) -> Result<BetaFerTable> {
    let cfg = &run.cfg;
    let betas = cfg.table.betas.values()?;
    let spec = TableSpec {
        model: cfg.table_model()?,
        modulation,
        snr_grid: grid,
        beta_grid: &betas,
        trials: cfg.table.trials,
        decoder: cfg.decoder,
        seed: derive_seed(run.seed(), &[TABLE_STREAM]),
    };
    eprintln!(
        "table-build: {} SNR points x {} betas, {} trials per cell",
        grid.len(),
        betas.len(),
        cfg.table.trials
    );
    Ok(build_table(code, cfg.code.seed, &spec)?)
}

fn load_table(path: &Path, key: &serde_json::Value) -> Option<BetaFerTable> {
    let text = fs::read_to_string(path).ok()?;
    let file: TableFile = serde_json::from_str(&text).ok()?;
    (file.key == *key).then_some(file.table)
}

fn obtain_table(run: &Run, code: &ExpandedCode, modulation: &Modulation, rebuild: bool) -> Result<TableOutcome> {
    let grid = snr_grid(run)?;
    let key = table_key(run, &grid)?;
    let path = run.table_path();
    if !rebuild {
        if let Some(table) = load_table(&path, &key) {
            eprintln!("using cached table {}", path.display());
            return Ok(TableOutcome {
                table,
                reused: true,
                path,
            });
        }
    }
    let table = measure_table(run, code, modulation, &grid)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let file = TableFile { key, table };
    write_text(&path, &(serde_json::to_string_pretty(&file)? + "\n"))?;
    Ok(TableOutcome {
        table: file.table,
        reused: false,
        path,
    })
}

/// Measures the β–FER table and stores it, along with a tidy CSV view.
pub fn table_build(run: &Run) -> Result<TableOutcome> {
    run.prepare_out()?;
    let code = run.build_code()?;
    let modulation = run.cfg.modulation()?;
    let out = obtain_table(run, &code, &modulation, true)?;
    let csv_path = run.path("beta_fer_table.csv");
    write_text(&csv_path, &table_csv(&out.table))?;
    let files = vec![out.path.clone(), csv_path];
    write_manifest(
        run,
        "table-build",
        json!({ "table": derive_seed(run.seed(), &[TABLE_STREAM]), "snr_grid": derive_seed(run.seed(), &[GRID_STREAM]) }),
        code_info(run, &code)?,
        &files,
    )?;
    Ok(out)
}

pub const TABLE_HEADER: &str = "snr,beta,rate,available,trials,failures,fer_raw,fer,ci95,mean_iterations";

pub fn table_csv(t: &BetaFerTable) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for c in &t.cells {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.snr, c.beta, c.rate, c.available, c.trials, c.failures, c.fer_raw, c.fer, c.fer_ci, c.mean_iterations
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub table_reused: bool,
    pub files: Vec<PathBuf>,
}

pub const GAINS_HEADER: &str = "setting_id,sigma_I,beta_jitter,mean_T,blocks,best_fixed_beta,best_fixed_skr,adaptive_skr,adaptive_ci95,gain,gain_abs,gain_abs_ci95,skipped_blocks,switched_blocks";

/// Fixed-β sweep against adaptive β over every turbulence setting.
pub fn skr_campaign(run: &Run) -> Result<CampaignOutcome> {
    run.prepare_out()?;
    let cfg = &run.cfg;
    let code = run.build_code()?;
    let modulation = cfg.modulation()?;
    let tab = obtain_table(run, &code, &modulation, false)?;
    let fixed = cfg.campaign.fixed_betas.clone().unwrap_or_else(|| tab.table.beta_grid.clone());
    let empirical = (cfg.campaign.empirical_frames > 0).then_some(EmpiricalCheck {
        code: &code,
        frames_per_block: cfg.campaign.empirical_frames,
        decoder: cfg.decoder,
    });
    let seed = derive_seed(run.seed(), &[CAMPAIGN_STREAM]);
    let cc = CampaignConfig {
        settings: &cfg.turbulence,
        blocks_per_setting: cfg.campaign.blocks_per_setting,
        receiver: cfg.system.receiver(),
        security: cfg.system.security(),
        modulation: &modulation,
        table: &tab.table,
        fixed_betas: &fixed,
        lookup: cfg.table.lookup,
        pe_symbols: cfg.pe_symbols(),
        seed,
        empirical,
    };
    eprintln!(
        "skr-campaign: {} settings x {} blocks",
        cfg.turbulence.len(),
        cfg.campaign.blocks_per_setting
    );
    let report = run_campaign(&cc)?;

    let mut rows = Vec::new();
    report.write_csv(&mut rows)?;
    let rows_path = run.path("campaign.csv");
    fs::write(&rows_path, rows)?;
    let mut summary = Vec::new();
    report.write_summary_csv(&mut summary)?;
    let summary_path = run.path("campaign_summary.csv");
    fs::write(&summary_path, summary)?;
    let mut gains = String::from(GAINS_HEADER);
    gains.push('\n');
    for s in &report.summaries {
        writeln!(
            gains,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.setting_id,
            s.sigma_i,
            s.beta_jitter,
            s.mean_t,
            s.blocks,
            s.best_fixed_beta,
            s.best_fixed_skr,
            s.adaptive_skr,
            s.adaptive_ci,
            s.gain,
            s.gain_abs,
            s.gain_abs_ci,
            s.skipped_blocks,
            s.switched_blocks
        )
        .unwrap();
    }
    let gains_path = run.path("gains.csv");
    write_text(&gains_path, &gains)?;

    let files = vec![rows_path, summary_path, gains_path, tab.path.clone()];
    write_manifest(
        run,
        "skr-campaign",
        json!({
            "campaign": seed,
            "table": derive_seed(run.seed(), &[TABLE_STREAM]),
            "snr_grid": derive_seed(run.seed(), &[GRID_STREAM]),
        }),
        code_info(run, &code)?,
        &files,
    )?;
    Ok(CampaignOutcome {
        report,
        table_reused: tab.reused,
        files,
    })
}

/// Exports the lifted parity-check matrix, the protograph and, for shaped
/// modulation, the constellation.
pub fn dump_code(run: &Run) -> Result<Vec<PathBuf>> {
    run.prepare_out()?;
    let code = run.build_code()?;
    let h_path = run.path("H.txt");
    write_text(&h_path, &h_to_text(&code.h))?;
    let p_path = run.path("protograph.txt");
    let p: Protograph = run.cfg.protograph()?;
    write_text(&p_path, &p.to_text())?;
    let mut files = vec![h_path, p_path];
    let info = json!({
        "n_vars": code.n_vars(),
        "n": code.n(),
        "k": code.k(),
        "design_rate": code.design_rate(),
        "info_positions": code.info_positions().len(),
        "state_punctured": code.state_punctured_positions().len(),
        "transmitted": code.transmitted_positions().len(),
        "edges": code.h.n_edges(),
    });
    let info_path = run.path("code_info.json");
    write_text(&info_path, &(serde_json::to_string_pretty(&info)? + "\n"))?;
    files.push(info_path);
    if let Modulation::Shaped(c) = run.cfg.modulation()? {
        let path = run.path("constellation.csv");
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        files.push(path);
    }
    write_manifest(run, "dump-code", json!({}), code_info(run, &code)?, &files)?;
    Ok(files)
}
