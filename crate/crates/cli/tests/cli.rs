use std::path::Path;
use std::process::{Command, Output};

use cvqkd_cli::commands::{self, Run};
use cvqkd_cli::config::{BetaGrid, RunConfig};
use cvqkd_core::ldpc::io::read_h;

fn small() -> RunConfig {
    let mut c = RunConfig::default_config();
    c.code.lift = 64;
    c.fer_sweep.dims = vec![8];
    c.fer_sweep.trials = 10;
    c.fer_sweep.betas = BetaGrid::List(vec![0.85]);
    c.table.dim = 8;
    c.table.snr_points = 2;
    c.table.trials = 10;
    c.table.betas = BetaGrid::List(vec![0.9, 0.95]);
    c.campaign.blocks_per_setting = 5;
    c
}

fn cvqkd(args: &[&str], dir: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvqkd"));
    cmd.args(args).current_dir(dir);
    for k in ["CVQKD_CONFIG", "CVQKD_SEED", "CVQKD_WORKERS", "CVQKD_OUT"] {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"schema_version": 1, "sytem": {}}"#).unwrap();
    let o = cvqkd(&["--config", p.to_str().unwrap(), "validate"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sytem"));

    std::fs::write(&p, r#"{"schema_version": 1, "fer_sweep": {"dims": []}}"#).unwrap();
    let o = cvqkd(&["--config", p.to_str().unwrap(), "fer-sweep"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fer_sweep.dims"));

    let o = cvqkd(&["frobnicate"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_validation_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    // heavy clipping at mean_T = 1 keeps the batch mean well below target
    cfg.turbulence[0].mean_t = 1.0;
    cfg.turbulence[0].sigma_i = 0.5;
    let path = write_config(dir.path(), &cfg);
    let o = cvqkd(&["--config", &path, "--out", "v", "validate"], dir.path(), &[]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL fading_statistics"), "{stdout}");
    assert!(dir.path().join("v/validation.csv").exists());
}

#[test]
fn campaign_reuses_a_matching_table() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small(), None, Some(dir.path().to_path_buf())).unwrap();
    let built = commands::table_build(&run).unwrap();
    assert!(!built.reused);
    let stamp = std::fs::metadata(&built.path).unwrap().modified().unwrap();
    let c = commands::skr_campaign(&run).unwrap();
    assert!(c.table_reused);
    assert_eq!(std::fs::metadata(&built.path).unwrap().modified().unwrap(), stamp);

    // a different trial count invalidates the cache
    let mut cfg = small();
    cfg.table.trials = 11;
    let run2 = Run::new(cfg, None, Some(dir.path().to_path_buf())).unwrap();
    assert!(!commands::skr_campaign(&run2).unwrap().table_reused);
    // and so does a different seed
    let run3 = Run::new(small(), Some(5), Some(dir.path().to_path_buf())).unwrap();
    assert!(!commands::skr_campaign(&run3).unwrap().table_reused);
}

#[test]
fn dumped_h_reimports_identically() {
    let dir = tempfile::tempdir().unwrap();
    let run = Run::new(small(), None, Some(dir.path().to_path_buf())).unwrap();
    commands::dump_code(&run).unwrap();
    let h = read_h(&dir.path().join("H.txt")).unwrap();
    assert_eq!(h, run.build_code().unwrap().h);
    let text = std::fs::read_to_string(dir.path().join("protograph.txt")).unwrap();
    assert_eq!(cvqkd_core::ldpc::Protograph::parse(&text).unwrap(), run.cfg.protograph().unwrap());
}

#[test]
fn shaped_constellation_is_exported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_json(r#"{"schema_version": 1, "code": {"lift": 32}, "modulation": {"kind": "ps_qam", "order": 64, "nu": 0.05}}"#).unwrap();
    let run = Run::new(cfg, None, Some(dir.path().to_path_buf())).unwrap();
    commands::dump_code(&run).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("constellation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn env_overrides_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small());
    let o = cvqkd(
        &["fer-sweep"],
        dir.path(),
        &[("CVQKD_CONFIG", &path), ("CVQKD_SEED", "99"), ("CVQKD_OUT", "a"), ("CVQKD_WORKERS", "1")],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    let entry = &manifest["runs"]["fer-sweep"];
    assert_eq!(entry["seed"], 99);

    // the recorded config alone reproduces the outputs
    let replay = dir.path().join("replay.json");
    std::fs::write(&replay, serde_json::to_string(&entry["config"]).unwrap()).unwrap();
    let o = cvqkd(&["--config", replay.to_str().unwrap(), "--out", "b", "fer-sweep"], dir.path(), &[]);
    assert!(o.status.success());
    for f in ["fer_sweep.csv", "manifest.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}
