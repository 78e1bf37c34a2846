use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vfl(dir: &Path, command: &str, config: &str, extra: &[&str], envs: &[(&str, &str)]) -> Output {
    let cfg = dir.join(format!("{command}.cfg"));
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vfl"));
    cmd.arg(command).arg("--config").arg(&cfg).args(extra);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_one_line(o: &Output) {
    let err = stderr(o);
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err:?}");
}

const SIMULATE: &str = "grid.cells = 16\nstepper.t_end = 0.2\ninitial.source = random\ninitial.epsilon = 0.01\n";

#[test]
fn simulate_writes_a_headed_series() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = vfl(tmp.path(), "simulate", &format!("{SIMULATE}output.fields = true\n"), &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,det_residual"), "{header}");
    let width = header.split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 2);
    assert!(rows.iter().all(|r| r.split(',').count() == width));
    for name in ["rho.bin", "u.bin", "F.bin"] {
        assert!(out.join(name).metadata().unwrap().len() > 0, "{name}");
    }
}

#[test]
fn same_seed_gives_identical_output() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, seed: &str, threads: &str| {
        let out = tmp.path().join(name);
        let o = vfl(tmp.path(), "simulate", SIMULATE, &["--out", out.to_str().unwrap(), "--seed", seed], &[("VFL_THREADS", threads)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("diagnostics.csv")).unwrap()
    };
    let a = run("a", "7", "1");
    assert_eq!(a, run("b", "7", "1"));
    assert_eq!(a, run("c", "7", "2"));
    assert_ne!(a, run("d", "8", "1"));
}

#[test]
fn config_errors_exit_one_with_line_numbers() {
    let tmp = TempDir::new().unwrap();
    let o = vfl(tmp.path(), "simulate", "grid.cells = 16\ngrid.colour = red\n", &[], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_one_line(&o);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = vfl(tmp.path(), "simulate", "material.mu = 1\nmaterial.lambda = -5\n", &[], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ellipticity"), "{}", stderr(&o));

    let o = vfl(tmp.path(), "no-such-command", "", &[], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_one_line(&o);

    let missing = Command::new(env!("CARGO_BIN_EXE_vfl"))
        .args(["simulate", "--config"])
        .arg(tmp.path().join("absent.cfg"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn unstable_probe_exits_two_and_keeps_partial_series() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = vfl(tmp.path(), "stability-probe", "grid.cells = 16\nstepper.t_end = 1\nprobe.factor = 10\n", &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_one_line(&o);
    assert!(stderr(&o).starts_with("numerical:"));
    let csv = fs::read_to_string(out.join("probe.csv")).unwrap();
    assert!(csv.lines().count() >= 2);
    assert!(csv.lines().last().unwrap().starts_with("# aborted:"));
    let summary = fs::read_to_string(out.join("probe_summary.csv")).unwrap();
    assert!(summary.trim_end().ends_with("false"), "{summary}");
}

#[test]
fn stable_probe_completes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = vfl(tmp.path(), "stability-probe", "grid.cells = 16\nstepper.t_end = 0.2\nprobe.factor = 0.5\n", &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("probe_summary.csv")).unwrap();
    assert!(summary.trim_end().ends_with("true"), "{summary}");
}

#[test]
fn failed_thresholds_exit_three() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = vfl(tmp.path(), "check-invariants", "grid.cells = 16\nstepper.t_end = 0.2\ncheck.growth = 0.5\n", &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_one_line(&o);
    let checks = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(checks.starts_with("check,value,threshold,pass"));
    assert!(checks.contains(",false"));

    let out = tmp.path().join("ok");
    let o = vfl(tmp.path(), "check-invariants", "grid.cells = 16\nstepper.t_end = 0.2\n", &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!fs::read_to_string(out.join("checks.csv")).unwrap().contains(",false"));
}

#[test]
fn mms_and_lame_commands_succeed() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mms");
    let o = vfl(
        tmp.path(),
        "mms-convergence",
        "initial.case = steady_stretch\nmms.grids = 16, 32, 64\nstepper.scheme = imex\n",
        &["--out", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("convergence.csv")).unwrap().lines().count() > 1);

    let out = tmp.path().join("lame");
    let o = vfl(tmp.path(), "lame-test", "grid.cells = 16\n", &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("lame.csv")).unwrap();
    assert!(csv.starts_with("case,realization,error,residual,iterations,pass"));
    assert!(!csv.contains(",false"));
}
