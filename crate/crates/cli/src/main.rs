use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cvqkd_cli::commands::{self, Run};
use cvqkd_cli::config::RunConfig;
use cvqkd_cli::validate::validate;
use cvqkd_cli::Failure;

#[derive(Debug, Parser)]
#[command(name = "cvqkd", version, about = "CV-QKD reconciliation and key-rate experiments")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true, env = "CVQKD_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, env = "CVQKD_SEED")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "CVQKD_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, env = "CVQKD_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// FER against reconciliation efficiency for each dimension and BI-AWGN.
    FerSweep,
    /// Fixed against adaptive efficiency over the turbulence settings.
    SkrCampaign,
    /// Measures and stores the efficiency-FER table.
    TableBuild,
    /// Runs the invariant checks; exits 4 if any fails.
    Validate,
    /// Exports H, the protograph and the constellation.
    DumpCode,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default_config()),
    }
    .map_err(Failure::Config)?;
    let run = Run::new(cfg, cli.seed, cli.out).map_err(Failure::Config)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build_global()
        .map_err(|e| Failure::Runtime(e.into()))?;

    let rt = Failure::Runtime;
    match cli.command {
        Command::FerSweep => {
            let r = commands::fer_sweep(&run).map_err(rt)?;
            eprintln!("wrote {} points to {}", r.points.len(), run.out.display());
        }
        Command::SkrCampaign => {
            let o = commands::skr_campaign(&run).map_err(rt)?;
            for s in &o.report.summaries {
                println!(
                    "setting {} sigma_I {} beta_jitter {}: best fixed beta {} skr {:.5}, adaptive {:.5} (gain {:+.2}%)",
                    s.setting_id,
                    s.sigma_i,
                    s.beta_jitter,
                    s.best_fixed_beta,
                    s.best_fixed_skr,
                    s.adaptive_skr,
                    100.0 * s.gain
                );
            }
        }
        Command::TableBuild => {
            let t = commands::table_build(&run).map_err(rt)?;
            eprintln!("table written to {}", t.path.display());
        }
        Command::Validate => {
            let checks = validate(&run).map_err(rt)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(Failure::Validation(failed));
            }
        }
        Command::DumpCode => {
            for f in commands::dump_code(&run).map_err(rt)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { cvqkd_cli::exit::CONFIG } else { cvqkd_cli::exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
