use std::path::Path;
use std::process::Command;

use star_sim::cli;
use star_sim::config::{load_config, write_config, RunConfig};
use star_sim::io;

const BIN: &str = env!("CARGO_BIN_EXE_star-sim");

const SMALL: &str = r#"
[model]
gamma = 1.5
theta = 0.5
nu1 = 1
nu2 = 1

[solver]
n = 64
t_end = 30
output_stride = 20
snapshot_stride = 1000
"#;

fn write_small(dir: &Path, out: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{out}.toml"));
    let text = format!("{SMALL}\n[output]\ndirectory = {:?}\n", dir.join(out));
    std::fs::write(&path, text).unwrap();
    path
}

fn star_sim(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().unwrap()
}

#[test]
fn simulate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let cfg = write_small(dir.path(), name);
        let out = star_sim(&["simulate", "--config", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a/series.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/series.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for f in ["profile.csv", "profile.meta.json", "series.schema.json", "config.effective.toml", "summary.json"] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }
}

#[test]
fn effective_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write_small(dir.path(), "run")).unwrap();
    let echo = dir.path().join("echo.toml");
    write_config(&cfg, &echo).unwrap();
    assert_eq!(load_config(&echo).unwrap(), cfg);
}

#[test]
fn rates_flags_follow_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write_small(dir.path(), "run")).unwrap();
    cli::cmd_simulate(&cfg).unwrap();
    let series = dir.path().join("run/series.csv");
    let out = star_sim(&["rates", "--series", series.to_str().unwrap(), "--slack", "0.01"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: io::RatesReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/rates.json")).unwrap()).unwrap();
    assert_eq!(report.safety, 0.5);
    assert!(!report.entries.is_empty());
    for e in &report.entries {
        let fit = e.fit.expect("fit available on a stable run");
        assert!((e.threshold - (-0.5 * e.predicted + 0.01)).abs() < 1e-15);
        assert_eq!(e.pass, fit.slope <= e.threshold, "{}", e.key);
    }
    assert!(report.entries.iter().find(|e| e.key == "sup_r_err").unwrap().pass);
}

#[test]
fn probe_reads_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load_config(&write_small(dir.path(), "run")).unwrap();
    cli::cmd_simulate(&cfg).unwrap();
    let snap = io::snapshot_path(&dir.path().join("run"), 1000);
    let s = io::read_snapshot(&snap).unwrap();
    let boundary = *s.r.last().unwrap();
    let at_boundary = cli::cmd_probe(&snap, boundary).unwrap();
    assert_eq!(at_boundary.rho, 0.0);
    let inside = cli::cmd_probe(&snap, s.r[10]).unwrap();
    assert!((inside.x - s.x[10]).abs() < 1e-12 * boundary);
    assert!((inside.rho - s.f[10]).abs() <= 1e-12 * s.f[10]);
    let out = star_sim(&["probe", "--snapshot", snap.to_str().unwrap(), "--r", &format!("{}", 2.0 * boundary)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_ordered_isolated_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = RunConfig::from_toml(SMALL).unwrap();
    base.solver.t_end = 12.0;
    let gammas = [1.45, 1.5, 1.6];
    // theta = 0.74 is only admissible for gamma >= 1.48
    let thetas = [0.3, 0.5, 0.74];
    let eps = [1e-3];
    let first = cli::cmd_sweep(&base, &gammas, &thetas, &eps, &dir.path().join("s1"), Some(3)).unwrap();
    let second = cli::cmd_sweep(&base, &gammas, &thetas, &eps, &dir.path().join("s2"), Some(1)).unwrap();
    assert_eq!(first.len(), 9);
    assert!(first.iter().zip(&second).all(|(a, b)| a.run == b.run && a.ok == b.ok));
    let order: Vec<(f64, f64)> = first.iter().map(|r| (r.gamma, r.theta)).collect();
    let expected: Vec<(f64, f64)> = gammas.iter().flat_map(|&g| thetas.iter().map(move |&t| (g, t))).collect();
    assert_eq!(order, expected);
    let failed: Vec<&str> = first.iter().filter(|r| !r.ok).map(|r| r.run.as_str()).collect();
    assert_eq!(failed, vec!["run_002"]);
    assert!(first[2].error.contains("theta"));
    assert!(first.iter().filter(|r| r.ok).all(|r| r.e0 > 0.0 && r.e_end.is_finite()));
    for r in first.iter().filter(|r| r.ok) {
        assert!(dir.path().join("s1").join(&r.run).join("series.csv").exists());
    }
    let s1 = std::fs::read(dir.path().join("s1/summary.csv")).unwrap();
    let s2 = std::fs::read(dir.path().join("s2/summary.csv")).unwrap();
    assert_eq!(s1, s2);
    assert_eq!(String::from_utf8(s1).unwrap().lines().count(), 10);
}

#[test]
fn verify_passes_on_defaults() {
    let out = star_sim(&["verify", "--t-end", "1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("two_form_viscosity_rel_l2"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn exit_codes_distinguish_validation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SMALL.replace("theta = 0.5", "theta = 0.9")).unwrap();
    let out = star_sim(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta must satisfy 0 < theta <= gamma/2"));

    std::fs::write(&bad, format!("{SMALL}\n[solver_extra]\nx = 1\n")).unwrap();
    assert_eq!(star_sim(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(star_sim(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn lane_emden_writes_profile_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("le");
    let status = star_sim(&["lane-emden", "--gamma", "1.5", "--mass", "1", "--n", "128", "--output", out.to_str().unwrap()]);
    assert!(status.status.success());
    let csv = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,rho_bar,phi,rho_pow_gamma_minus_1");
    assert_eq!(csv.lines().count(), 130);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("profile.meta.json")).unwrap()).unwrap();
    for key in ["gamma", "M", "R_bar", "rho0", "C_pv", "n"] {
        assert!(meta.get(key).is_some(), "{key}");
    }
}
