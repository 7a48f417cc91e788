use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ppfe_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ppfe_last_error()) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut PpfeScenario {
    let name = CString::new(name).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ppfe_scenario_from_preset(name.as_ptr(), &mut h) }, PpfeStatus::Ok);
    assert!(!h.is_null());
    h
}

fn series(f: unsafe extern "C" fn(*const PpfeRunResult, *mut f64, usize, *mut usize) -> PpfeStatus, r: *const PpfeRunResult) -> Vec<f64> {
    let mut n = 0;
    assert_eq!(unsafe { f(r, ptr::null_mut(), 0, &mut n) }, if n == 0 { PpfeStatus::Ok } else { PpfeStatus::InvalidArgument });
    let mut out = vec![0.0; n];
    let mut written = 0;
    assert_eq!(unsafe { f(r, out.as_mut_ptr(), out.len(), &mut written) }, PpfeStatus::Ok);
    assert_eq!(written, n);
    out
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(ppfe_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_matches_library() {
    let h = preset("three-tank-groupA1");
    unsafe {
        assert_eq!(ppfe_scenario_set_trials(h, 8), PpfeStatus::Ok);
        assert_eq!(ppfe_scenario_set_horizon(h, 60), PpfeStatus::Ok);
        assert_eq!(ppfe_scenario_set_seed(h, 3), PpfeStatus::Ok);
        assert_eq!(ppfe_scenario_set_workers(h, 2), PpfeStatus::Ok);
    }
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ppfe_run(h, &mut r) }, PpfeStatus::Ok);
    let mut horizon = 0;
    assert_eq!(unsafe { ppfe_result_horizon(r, &mut horizon) }, PpfeStatus::Ok);
    assert_eq!(horizon, 60);

    let mut s = ppfe::scenario::preset("three-tank-groupA1").unwrap();
    s.trials = 8;
    s.horizon = 60;
    s.seed = 3;
    let expected = ppfe::harness::run_monte_carlo(&s).unwrap();
    assert_eq!(series(ppfe_result_mse_legit, r), expected.mse_legit);
    assert_eq!(series(ppfe_result_mse_eve, r), expected.mse_eve);
    assert_eq!(series(ppfe_result_trace_emp_cov, r), expected.trace_emp_cov());
    assert_eq!(series(ppfe_result_trace_bound, r), expected.trace_bound().unwrap());

    let mut small = [0.0; 4];
    let mut needed = 0;
    assert_eq!(unsafe { ppfe_result_mse_legit(r, small.as_mut_ptr(), small.len(), &mut needed) }, PpfeStatus::InvalidArgument);
    assert_eq!(needed, 60);
    assert!(last_error().contains("60 needed"));

    unsafe {
        ppfe_result_free(r);
        ppfe_scenario_free(h);
    }
}

#[test]
fn toml_scenarios_and_missing_bound() {
    let text = CString::new(
        r#"
        preset = "three-tank"
        [run]
        horizon = 20
        trials = 2
        bound = false
        "#,
    )
    .unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ppfe_scenario_from_toml(text.as_ptr(), &mut h) }, PpfeStatus::Ok);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ppfe_run(h, &mut r) }, PpfeStatus::Ok);
    let mut buf = [0.0; 20];
    assert_eq!(unsafe { ppfe_result_trace_bound(r, buf.as_mut_ptr(), 20, ptr::null_mut()) }, PpfeStatus::Unavailable);
    unsafe {
        ppfe_result_free(r);
        ppfe_scenario_free(h);
    }

    let bad = CString::new("[model]\nbogus = 1\n").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ppfe_scenario_from_toml(bad.as_ptr(), &mut h) }, PpfeStatus::Config);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn errors_map_to_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ppfe_scenario_from_preset(ptr::null(), &mut h) }, PpfeStatus::NullPointer);
    assert_eq!(last_error(), "name is null");
    let unknown = CString::new("nope").unwrap();
    assert_eq!(unsafe { ppfe_scenario_from_preset(unknown.as_ptr(), &mut h) }, PpfeStatus::Config);
    assert_eq!(unsafe { ppfe_scenario_set_seed(ptr::null_mut(), 1) }, PpfeStatus::NullPointer);

    let h = preset("three-tank");
    assert_eq!(unsafe { ppfe_scenario_set_trials(h, 0) }, PpfeStatus::InvalidArgument);
    assert_eq!(unsafe { ppfe_scenario_set_horizon(h, 0) }, PpfeStatus::InvalidArgument);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ppfe_run(ptr::null(), &mut r) }, PpfeStatus::NullPointer);
    assert_eq!(unsafe { ppfe_run(h, ptr::null_mut()) }, PpfeStatus::NullPointer);
    unsafe {
        ppfe_scenario_free(h);
        ppfe_scenario_free(ptr::null_mut());
        ppfe_result_free(ptr::null_mut());
    }

    let gamma = [0.5, 1.5];
    let mut c = 0.0;
    assert_eq!(unsafe { ppfe_total_capacity(gamma.as_ptr(), 2, &mut c) }, PpfeStatus::InvalidArgument);
}

#[test]
fn analysis_helpers() {
    let gamma = [0.9, 0.95, 0.85];
    let mut c = 0.0;
    assert_eq!(unsafe { ppfe_total_capacity(gamma.as_ptr(), 3, &mut c) }, PpfeStatus::Ok);
    assert!((c - 3.5977).abs() < 1e-3);

    let a = [2.0, 1.0, 0.0, 0.5];
    let (mut m, mut h) = (0.0, 0.0);
    assert_eq!(unsafe { ppfe_mahler(a.as_ptr(), 2, &mut m, &mut h) }, PpfeStatus::Ok);
    assert_eq!(m, 2.0);
    assert!((h - 2f64.ln()).abs() < 1e-15);
    assert_eq!(unsafe { ppfe_mahler(a.as_ptr(), 0, &mut m, &mut h) }, PpfeStatus::InvalidArgument);
}

#[test]
fn quantize_is_reproducible_and_on_lattice() {
    let x = [0.123, -0.456, 0.02];
    let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
    assert_eq!(unsafe { ppfe_quantize(x.as_ptr(), 3, 0.01, 7, 0, a.as_mut_ptr()) }, PpfeStatus::Ok);
    assert_eq!(unsafe { ppfe_quantize(x.as_ptr(), 3, 0.01, 7, 0, b.as_mut_ptr()) }, PpfeStatus::Ok);
    assert_eq!(a, b);
    for (q, v) in a.iter().zip(x) {
        assert!((q - v).abs() < 0.01 + 1e-12);
        assert!(((q / 0.01).round() * 0.01 - q).abs() < 1e-12);
    }
    assert_eq!(a[2], 0.02);
    assert_eq!(unsafe { ppfe_quantize(x.as_ptr(), 3, -1.0, 7, 0, a.as_mut_ptr()) }, PpfeStatus::InvalidArgument);
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ppfe.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    for name in [
        "ppfe_version",
        "ppfe_last_error",
        "ppfe_scenario_from_preset",
        "ppfe_scenario_from_toml",
        "ppfe_scenario_free",
        "ppfe_scenario_set_seed",
        "ppfe_scenario_set_trials",
        "ppfe_scenario_set_horizon",
        "ppfe_scenario_set_workers",
        "ppfe_run",
        "ppfe_result_free",
        "ppfe_result_horizon",
        "ppfe_result_mse_legit",
        "ppfe_result_mse_eve",
        "ppfe_result_trace_emp_cov",
        "ppfe_result_trace_bound",
        "ppfe_total_capacity",
        "ppfe_mahler",
        "ppfe_quantize",
        "PPFE_STATUS_UNAVAILABLE",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    // Syntax check with the system C compiler when one is installed.
    let dir = scratch_dir();
    let src = dir.join("check.c");
    std::fs::write(&src, "#include \"ppfe.h\"\nint main(void) { PpfeScenario *s = 0; return ppfe_scenario_from_preset(\"three-tank\", &s) == PPFE_STATUS_OK ? 0 : 1; }\n").unwrap();
    let include = header_path.parent().unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg("-I").arg(include).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found; header syntax check skipped"),
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

fn scratch_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("ppfe-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
