//! Exercises the C ABI from Rust and, when a C compiler is present, from C.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use opmm::harness::{self, RunConfig};
use opmm_ffi::*;

const CONFIG: &str = r#"
schema_version = 1
horizon = 32

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

fn last_error() -> String {
    unsafe { CStr::from_ptr(opmm_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_session(text: &str) -> *mut OpmmSession {
    let c = CString::new(text).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { opmm_session_new(c.as_ptr(), &mut s) },
        OpmmStatus::Ok,
        "{}",
        last_error()
    );
    s
}

#[test]
fn projections() {
    let mut out = [0.0; 2];
    unsafe {
        let st = opmm_project_box(
            [0.0, 0.0].as_ptr(),
            [1.0, 1.0].as_ptr(),
            [2.0, -3.0].as_ptr(),
            2,
            out.as_mut_ptr(),
        );
        assert_eq!(st, OpmmStatus::Ok);
        assert_eq!(out, [1.0, 0.0]);
        let st = opmm_project_ball([0.0, 0.0].as_ptr(), 1.0, [3.0, 4.0].as_ptr(), 2, out.as_mut_ptr());
        assert_eq!(st, OpmmStatus::Ok);
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);
        let st = opmm_project_simplex([1.0, 1.0].as_ptr(), 2, out.as_mut_ptr());
        assert_eq!(st, OpmmStatus::Ok);
        assert_eq!(out, [0.5, 0.5]);
        // lower above upper
        let st = opmm_project_box(
            [1.0, 0.0].as_ptr(),
            [0.0, 1.0].as_ptr(),
            [0.0, 0.0].as_ptr(),
            2,
            out.as_mut_ptr(),
        );
        assert_eq!(st, OpmmStatus::InvalidInput);
        assert!(!last_error().is_empty());
        let st = opmm_project_simplex(ptr::null(), 2, out.as_mut_ptr());
        assert_eq!(st, OpmmStatus::NullPointer);
        assert_eq!(last_error(), "x is null");
    }
}

#[test]
fn session_matches_harness_run() {
    let s = new_session(CONFIG);
    let mut n = 0;
    let mut p = 0;
    let mut t = 0;
    let mut regrets = OpmmRegrets::default();
    unsafe {
        assert_eq!(opmm_session_shape(s, &mut n, &mut p, &mut t), OpmmStatus::Ok);
        assert_eq!((n, p, t), (2, 2, 0));
        // no rounds yet
        assert_eq!(opmm_session_regrets(s, &mut regrets), OpmmStatus::InvalidInput);
        for _ in 0..32 {
            assert_eq!(opmm_session_step(s), OpmmStatus::Ok);
        }
        assert_eq!(opmm_session_step(s), OpmmStatus::Done);
        assert_eq!(opmm_session_regrets(s, &mut regrets), OpmmStatus::Ok);
    }
    let reference = harness::run(&RunConfig::from_toml(CONFIG).unwrap(), None).unwrap();
    let r = &reference.summary.regrets;
    assert_eq!(regrets.rounds, 32);
    assert_eq!(
        (
            regrets.lagrangian,
            regrets.max_violation,
            regrets.complementarity,
            regrets.objective
        ),
        (r.lagrangian, r.max_violation, r.complementarity, r.objective)
    );
    let mut x = [0.0; 2];
    let mut lambda = [0.0; 2];
    unsafe {
        assert_eq!(opmm_session_x(s, x.as_mut_ptr(), 2), OpmmStatus::Ok);
        assert_eq!(opmm_session_lambda(s, lambda.as_mut_ptr(), 2), OpmmStatus::Ok);
        assert_eq!(opmm_session_x(s, x.as_mut_ptr(), 1), OpmmStatus::Dimension);
    }
    assert_eq!(x.to_vec(), reference.summary.final_state.x);
    assert_eq!(lambda.to_vec(), reference.summary.final_state.lambda);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(opmm_session_write_csv(s, c_path.as_ptr()), OpmmStatus::Ok);
        opmm_session_free(s);
    }
    assert_eq!(std::fs::read_to_string(path).unwrap(), reference.csv);
}

#[test]
fn bad_inputs_report_errors() {
    let mut s = ptr::null_mut();
    unsafe {
        let bad = CString::new("schema_version = 2").unwrap();
        assert_eq!(opmm_session_new(bad.as_ptr(), &mut s), OpmmStatus::Config);
        assert!(s.is_null());
        assert!(last_error().contains("config"), "{}", last_error());
        assert_eq!(opmm_session_new(ptr::null(), &mut s), OpmmStatus::NullPointer);
        assert_eq!(opmm_session_new(bad.as_ptr(), ptr::null_mut()), OpmmStatus::NullPointer);
        assert_eq!(opmm_session_step(ptr::null_mut()), OpmmStatus::NullPointer);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            opmm_session_new(invalid.as_ptr().cast(), &mut s),
            OpmmStatus::InvalidUtf8
        );
        opmm_session_free(ptr::null_mut());
    }
    let s = new_session(CONFIG);
    unsafe {
        let dir = CString::new("/nonexistent-dir/x.csv").unwrap();
        assert_eq!(opmm_session_write_csv(s, dir.as_ptr()), OpmmStatus::Io);
        opmm_session_free(s);
    }
}

#[test]
fn strict_solver_failure_maps_to_status() {
    let starved = CONFIG
        .replace("horizon = 32\n", "horizon = 32\nstrict = true\n")
        .replace("[set]", "[inner]\nmax_iters = 0\ntol = 1e-14\n\n[set]");
    let s = new_session(&starved);
    unsafe {
        assert_eq!(opmm_session_run(s), OpmmStatus::Solver);
        opmm_session_free(s);
    }
}

/// Directory holding the cdylib built alongside this test binary. Cargo
/// rebuilds the copy in `deps/` for test runs; the uplifted one may be stale.
fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = lib_dir();
    assert!(lib_dir.join("libopmm_ffi.so").exists() || lib_dir.join("libopmm_ffi.dylib").exists());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/smoke.c"))
        .arg("-o")
        .arg(&exe)
        .arg("-L")
        .arg(&lib_dir)
        .args(["-lopmm_ffi", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = dir.path().join("c.csv");
    let out = Command::new(&exe)
        .arg(&csv)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .env("DYLD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
    let reference = harness::run(&RunConfig::from_toml(CONFIG).unwrap(), None).unwrap();
    assert_eq!(std::fs::read_to_string(csv).unwrap(), reference.csv);
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .is_ok_and(|o| o.status.success())
        {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
