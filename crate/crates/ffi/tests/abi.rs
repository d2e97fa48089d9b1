use lipcert_ffi::*;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

const POISSON: &str = r#"
name = "ffi_poisson"
[domain]
kind = "disc"
center = [0.0, 0.0]
radius = 1.0
h = 0.125
[lagrangian]
name = "quadratic"
[g]
kind = "constant"
value = 1.0
[phi]
kind = "affine"
a = [0.0, 0.0]
b = 0.0
[schedule]
k = [4, 16]
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { lc_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn scenario(text: &str) -> *mut LcScenario {
    let c = CString::new(text).unwrap();
    let mut s = ptr::null_mut();
    let st = unsafe { lc_scenario_from_toml(c.as_ptr(), &mut s) };
    assert_eq!(st, LcStatus::Ok, "{}", last_error());
    s
}

#[test]
fn solve_roundtrip_through_handles() {
    let s = scenario(POISSON);
    let name = unsafe { lc_scenario_name(s) };
    assert_eq!(unsafe { CStr::from_ptr(name) }.to_str().unwrap(), "ffi_poisson");
    unsafe { lc_string_free(name) };

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { lc_run(s, LcStage::Solve as i32, &mut r) }, LcStatus::Ok);
    let n = unsafe { lc_run_vertex_count(r) };
    assert!(n > 20);

    let mut written = 0usize;
    let st = unsafe { lc_run_solution(r, ptr::null_mut(), 0, &mut written) };
    assert_eq!(st, LcStatus::BufferTooSmall);
    assert_eq!(written, n);

    let mut u = vec![0.0; n];
    let mut xy = vec![0.0; 2 * n];
    assert_eq!(unsafe { lc_run_solution(r, u.as_mut_ptr(), n, &mut written) }, LcStatus::Ok);
    assert_eq!(unsafe { lc_run_vertices(r, xy.as_mut_ptr(), 2 * n, &mut written) }, LcStatus::Ok);
    for i in 0..n {
        let exact = (xy[2 * i] * xy[2 * i] + xy[2 * i + 1] * xy[2 * i + 1] - 1.0) / 4.0;
        assert!((u[i] - exact).abs() < 0.03, "vertex {i}: {} vs {exact}", u[i]);
    }

    let json = unsafe { CStr::from_ptr(lc_run_report_json(r)) }.to_str().unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["stage"], "solve");
    assert_eq!(unsafe { lc_run_exit_code(r) }, v["exit_code"].as_i64().unwrap() as i32);

    let dir = tempfile::tempdir().unwrap();
    let d = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lc_run_write_bundle(r, d.as_ptr()) }, LcStatus::Ok);
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("u.csv").exists());

    unsafe {
        lc_run_free(r);
        lc_scenario_free(s);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let bad = CString::new("name = \"x\"\n[domain]\nkind = \"disc\"\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { lc_scenario_from_toml(bad.as_ptr(), &mut s) }, LcStatus::Scenario);
    assert!(s.is_null());
    assert!(!last_error().is_empty());

    let unknown = POISSON.replace("\"quadratic\"", "\"no_such_lagrangian\"");
    let c = CString::new(unknown).unwrap();
    let st = unsafe { lc_scenario_from_toml(c.as_ptr(), &mut s) };
    assert_eq!(st, LcStatus::Scenario, "{}", last_error());

    assert_eq!(unsafe { lc_scenario_from_toml(ptr::null(), &mut s) }, LcStatus::NullPointer);
    let invalid = [0xffu8 as c_char, 0];
    assert_eq!(unsafe { lc_scenario_from_toml(invalid.as_ptr(), &mut s) }, LcStatus::InvalidUtf8);

    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_ne!(unsafe { lc_scenario_load(missing.as_ptr(), &mut s) }, LcStatus::Ok);

    let good = scenario(POISSON);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { lc_run(good, 42, &mut r) }, LcStatus::InvalidStage);
    assert!(r.is_null());
    assert_eq!(unsafe { lc_run(ptr::null(), 0, &mut r) }, LcStatus::NullPointer);
    unsafe { lc_scenario_free(good) };

    let mut a = 0.0;
    assert_eq!(unsafe { lc_holder_exponent(2.0, 2.0, &mut a) }, LcStatus::Ok);
    assert_eq!(a, 1.0 / 7.0);
    assert_eq!(unsafe { lc_holder_exponent(1.5, 2.0, &mut a) }, LcStatus::Numerical);

    // success clears the message
    assert_eq!(unsafe { lc_holder_exponent(3.0, 2.0, &mut a) }, LcStatus::Ok);
    assert_eq!(unsafe { lc_last_error(ptr::null_mut(), 0) }, 0);
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        lc_run_free(ptr::null_mut());
        lc_scenario_free(ptr::null_mut());
        lc_string_free(ptr::null_mut());
        assert_eq!(lc_run_exit_code(ptr::null()), -1);
        assert_eq!(lc_run_vertex_count(ptr::null()), 0);
        assert!(lc_run_report_json(ptr::null()).is_null());
        assert!(lc_scenario_name(ptr::null()).is_null());
    }
    let cat = lc_catalog();
    let text = unsafe { CStr::from_ptr(cat) }.to_str().unwrap().to_owned();
    unsafe { lc_string_free(cat) };
    for name in ["torsion", "quadratic", "double_well"] {
        assert!(text.contains(name));
    }
    let v = unsafe { CStr::from_ptr(lc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn hypothesis_failures_are_reported_not_errors() {
    let spike = POISSON.replace(
        "[phi]\nkind = \"affine\"\na = [0.0, 0.0]\nb = 0.0",
        "[phi]\nkind = \"named\"\nname = \"spike\"\nanchor = [1.0, 0.0]\n[checks]\nlbsc_rank = 10.0",
    );
    let s = scenario(&spike);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { lc_run(s, LcStage::Check as i32, &mut r) }, LcStatus::Ok);
    assert_eq!(unsafe { lc_run_exit_code(r) }, 2);
    assert!(unsafe { lc_run_failure_count(r) } >= 1);
    let mut written = 0;
    let mut u = [0.0; 4];
    assert_eq!(unsafe { lc_run_solution(r, u.as_mut_ptr(), 4, &mut written) }, LcStatus::Numerical);
    unsafe {
        lc_run_free(r);
        lc_scenario_free(s);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lipcert.h")
}

#[test]
fn generated_header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "typedef struct LcScenario LcScenario;",
        "typedef struct LcRun LcRun;",
        "LC_STATUS_BUFFER_TOO_SMALL = 7",
        "LC_STAGE_RUN = 5",
        "enum LcStatus lc_run(const struct LcScenario *s, int32_t stage, struct LcRun **out);",
        "size_t lc_last_error(char *buf, size_t len);",
        "void lc_run_free(struct LcRun *r);",
    ] {
        assert!(h.contains(sym), "missing `{sym}`");
    }
}

/// Compiles examples/smoke.c against the static library when a C compiler
/// is on PATH.
#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("liblipcert_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .arg(manifest.join("examples/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("exit 0"), "{stdout}");
    assert!(stdout.contains("min -0.2"), "{stdout}");
}
