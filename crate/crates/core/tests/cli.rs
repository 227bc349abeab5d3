//! End-to-end tests of the `opmm` binary.

use std::path::Path;
use std::process::{Command, Output};

use opmm::harness::{regrets_from_csv, summary_path};

const CONVEX: &str = r#"
schema_version = 1
horizon = 64

[params]
preset = "theorem1"

[set]
kind = "box"
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[constraints]
family = "linear"
a = [[1.0, 1.0], [1.0, -1.0]]
b = [0.5, 0.5]
slater = [0.0, 0.0]

[stream]
kind = "linear-drift"
seed = 7
scale = 1.0
period = 40.0
"#;

const NONCONVEX: &str = r#"
schema_version = 1
horizon = 32

[params]
preset = "theorem1"

[set]
kind = "box"
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[constraints]
family = "sine"
a = [[1.0, 0.5]]
b = [0.3]
slater = [0.0, 0.0]

[stream]
kind = "nonconvex-smooth"
seed = 5
scale = 1.0
amplitude = 0.5
period = 100.0
"#;

fn opmm(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opmm"))
        .arg(args[0])
        .arg("--config")
        .arg(config)
        .args(&args[1..])
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONVEX);
    let csv = dir.path().join("out.csv");
    let out = opmm(&["run", "--out", csv.to_str().unwrap()], &cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 65);
    let summary = std::fs::read_to_string(summary_path(&csv)).unwrap();
    let parsed: toml::Table = toml::from_str(&summary).unwrap();
    let regrets = parsed["regrets"].as_table().unwrap();
    let from_csv = regrets_from_csv(&text).unwrap();
    let close = |key: &str, v: f64| (regrets[key].as_float().unwrap() - v).abs() <= 1e-12;
    assert!(close("lagrangian", from_csv.lagrangian));
    assert!(close("max_violation", from_csv.max_violation));
    assert!(close("complementarity", from_csv.complementarity));
    assert!(close("objective", from_csv.objective));
    assert!(summary.contains("f_(T+1)"));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), summary);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let base = write(dir.path(), "a.toml", CONVEX);
    let reseeded = write(dir.path(), "b.toml", &CONVEX.replace("seed = 7", "seed = 9"));
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(opmm(&["run", "--seed", "9", "--out", a.to_str().unwrap()], &base)
        .status
        .success());
    assert!(opmm(&["run", "--out", b.to_str().unwrap()], &reseeded).status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn primal_and_dual_csv_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONVEX);
    let p = dir.path().join("p.csv");
    let d = dir.path().join("d.csv");
    assert!(opmm(&["run", "--out", p.to_str().unwrap()], &cfg).status.success());
    assert!(opmm(&["run", "--route", "dual", "--out", d.to_str().unwrap()], &cfg)
        .status
        .success());
    let rows = |path: &Path| -> Vec<Vec<f64>> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').take(9).map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    for (a, b) in rows(&p).iter().zip(rows(&d).iter()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-5, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn check_reports_pass_and_planted_failure() {
    let dir = tempfile::tempdir().unwrap();
    let convex = write(dir.path(), "c.toml", CONVEX);
    let out = opmm(&["check", "--route", "dual"], &convex);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("OK"));

    let nonconvex = write(dir.path(), "n.toml", NONCONVEX);
    let out = opmm(&["check"], &nonconvex);
    assert!(!out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.lines().any(|l| l.starts_with("FAIL") && l.contains("B2")),
        "{text}"
    );
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.toml",
        &CONVEX.replace("schema_version = 1", "schema_version = 2"),
    );
    let out = opmm(&["run", "--out", dir.path().join("x.csv").to_str().unwrap()], &bad);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("schema_version"));

    let nonconvex = write(dir.path(), "n.toml", NONCONVEX);
    let out = opmm(
        &[
            "run",
            "--route",
            "dual",
            "--out",
            dir.path().join("y.csv").to_str().unwrap(),
        ],
        &nonconvex,
    );
    assert!(!out.status.success());

    let convex = write(dir.path(), "c.toml", CONVEX);
    let out = opmm(&["sweep", "--horizons", "8,16,32"], &convex);
    assert!(!out.status.success());
}

#[test]
fn strict_mode_aborts_on_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let starved = CONVEX.replace("[set]", "[inner]\nmax_iters = 0\ntol = 1e-14\n\n[set]");
    let cfg = write(dir.path(), "s.toml", &starved);
    let lenient = opmm(&["run", "--out", dir.path().join("l.csv").to_str().unwrap()], &cfg);
    assert!(lenient.status.success());
    assert!(String::from_utf8(lenient.stderr).unwrap().contains("iteration cap"));
    let strict = opmm(
        &["run", "--strict", "--out", dir.path().join("s.csv").to_str().unwrap()],
        &cfg,
    );
    assert!(!strict.status.success());
}

#[test]
fn sweep_emits_rows_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONVEX);
    let out_csv = dir.path().join("sweep.csv");
    let out = opmm(
        &[
            "sweep",
            "--horizons",
            "16,32,64,128",
            "--out",
            out_csv.to_str().unwrap(),
        ],
        &cfg,
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_csv).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(String::from_utf8(out.stdout).unwrap().contains("slope complementarity"));
}
