//! C ABI over the `lipcert` pipeline.
//!
//! Objects cross the boundary as opaque handles (`LcScenario`, `LcRun`) that
//! the caller releases with the matching `_free` function. Every fallible call
//! returns an [`LcStatus`]; the message of the most recent failure on the
//! calling thread is available through [`lc_last_error`]. Strings returned by
//! the library are owned by the caller and released with [`lc_string_free`].

use lipcert::pipeline::{run, RunOutcome, Stage};
use lipcert::report::{write_bundle, Metadata};
use lipcert::scenario::Scenario;
use lipcert::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The scenario text or file could not be parsed or failed validation.
    Scenario = 3,
    /// Reading or writing files failed.
    Io = 4,
    /// A structural hypothesis was rejected before any computation.
    Hypothesis = 5,
    /// A numerical routine reported an error (bad argument, contract violation).
    Numerical = 6,
    /// The caller's buffer is too small; the required length was reported.
    BufferTooSmall = 7,
    /// An unknown stage code was passed.
    InvalidStage = 8,
    /// A Rust panic was caught at the boundary.
    Panic = 9,
}

/// Pipeline stages accepted by [`lc_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcStage {
    Check = 0,
    Conjugate = 1,
    Solve = 2,
    Certify = 3,
    Repair = 4,
    Run = 5,
}

impl From<LcStage> for Stage {
    fn from(s: LcStage) -> Stage {
        match s {
            LcStage::Check => Stage::Check,
            LcStage::Conjugate => Stage::Conjugate,
            LcStage::Solve => Stage::Solve,
            LcStage::Certify => Stage::Certify,
            LcStage::Repair => Stage::Repair,
            LcStage::Run => Stage::Run,
        }
    }
}

fn stage_from_code(code: i32) -> Option<LcStage> {
    Some(match code {
        0 => LcStage::Check,
        1 => LcStage::Conjugate,
        2 => LcStage::Solve,
        3 => LcStage::Certify,
        4 => LcStage::Repair,
        5 => LcStage::Run,
        _ => return None,
    })
}

/// Parsed, validated scenario.
pub struct LcScenario {
    inner: Scenario,
}

/// Result of one pipeline run: mesh, report and artifacts.
pub struct LcRun {
    inner: RunOutcome,
    report_json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LcStatus {
    match e {
        Error::Scenario(_) | Error::Toml(_) | Error::UnknownCatalog(_) | Error::InvalidDomain(_) => LcStatus::Scenario,
        Error::Io(_) | Error::Json(_) => LcStatus::Io,
        Error::Hypothesis(_) | Error::LbscFailed { .. } | Error::NotConvex { .. } => LcStatus::Hypothesis,
        _ => LcStatus::Numerical,
    }
}

fn fail(e: Error) -> LcStatus {
    let st = status_of(&e);
    set_error(e.to_string());
    st
}

/// Runs `body` with panics converted to [`LcStatus::Panic`].
fn guard(body: impl FnOnce() -> LcStatus) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(st) => st,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            LcStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, LcStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(LcStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        LcStatus::InvalidUtf8
    })
}

fn to_c_string(s: String) -> CString {
    CString::new(s.replace('\0', " ")).expect("NUL bytes removed")
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of the calling thread into `buf`
/// (NUL-terminated, truncated to `len` bytes) and returns the full message
/// length excluding the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` is null or points to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Newline-separated listing of the built-in Lagrangians, traces and sources.
/// Free with [`lc_string_free`].
#[no_mangle]
pub extern "C" fn lc_catalog() -> *mut c_char {
    to_c_string(lipcert::scenario::list_catalog()).into_raw()
}

/// Parses and validates a scenario from TOML text. Relative CSV paths are
/// resolved against the current directory.
///
/// # Safety
/// `toml` is a valid NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_from_toml(toml: *const c_char, out: *mut *mut LcScenario) -> LcStatus {
    guard(|| {
        clear_error();
        if out.is_null() {
            set_error("null output pointer");
            return LcStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(st) => return st,
        };
        match Scenario::from_toml(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LcScenario { inner: s }));
                LcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Loads and validates a scenario file; relative CSV paths resolve against
/// the file's directory.
///
/// # Safety
/// `path` is a valid NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_load(path: *const c_char, out: *mut *mut LcScenario) -> LcStatus {
    guard(|| {
        clear_error();
        if out.is_null() {
            set_error("null output pointer");
            return LcStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let p = match read_str(path) {
            Ok(t) => t,
            Err(st) => return st,
        };
        match Scenario::load(Path::new(p)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LcScenario { inner: s }));
                LcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Scenario name. Free with [`lc_string_free`]; null if `s` is null.
///
/// # Safety
/// `s` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_name(s: *const LcScenario) -> *mut c_char {
    match s.as_ref() {
        Some(s) => to_c_string(s.inner.name.clone()).into_raw(),
        None => ptr::null_mut(),
    }
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `s` is null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_scenario_free(s: *mut LcScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs the pipeline up to `stage` (an [`LcStage`] value). Certificate
/// failures are findings, not errors: the call still returns `Ok` and the
/// verdict is in [`lc_run_exit_code`] and the report.
///
/// # Safety
/// `s` is a live scenario handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_run(s: *const LcScenario, stage: i32, out: *mut *mut LcRun) -> LcStatus {
    guard(|| {
        clear_error();
        if out.is_null() {
            set_error("null output pointer");
            return LcStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let Some(s) = s.as_ref() else {
            set_error("null scenario handle");
            return LcStatus::NullPointer;
        };
        let Some(stage) = stage_from_code(stage) else {
            set_error(format!("unknown stage code {stage}"));
            return LcStatus::InvalidStage;
        };
        let outcome = match run(&s.inner, stage.into()) {
            Ok(o) => o,
            Err(e) => return fail(e),
        };
        let json = to_c_string(outcome.report.to_json());
        *out = Box::into_raw(Box::new(LcRun { inner: outcome, report_json: json }));
        LcStatus::Ok
    })
}

/// Exit code of the run: 0 success, 1 internal error, 2 hypothesis failure,
/// 3 nonconvergence, 4 certificate failure; -1 for a null handle.
///
/// # Safety
/// `r` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_run_exit_code(r: *const LcRun) -> i32 {
    r.as_ref().map_or(-1, |r| r.inner.report.exit_code)
}

/// Number of failures recorded in the report; 0 for a null handle.
///
/// # Safety
/// `r` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_run_failure_count(r: *const LcRun) -> usize {
    r.as_ref().map_or(0, |r| r.inner.report.failures.len())
}

/// The JSON report, borrowed from the handle and valid until
/// [`lc_run_free`]. Null for a null handle.
///
/// # Safety
/// `r` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_run_report_json(r: *const LcRun) -> *const c_char {
    r.as_ref().map_or(ptr::null(), |r| r.report_json.as_ptr())
}

/// Number of mesh vertices; 0 for a null handle.
///
/// # Safety
/// `r` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_run_vertex_count(r: *const LcRun) -> usize {
    r.as_ref().map_or(0, |r| r.inner.mesh.n_vertices())
}

/// Copies the final per-vertex solution (the repaired field when a repair
/// ran) into `buf`. `len` is the buffer length in doubles; `written`
/// receives the number of values. Returns `BufferTooSmall` with `written`
/// set to the required length when `len` is too small, and `Numerical`
/// when the stage produced no solution.
///
/// # Safety
/// `r` is a live handle; `buf` points to `len` writable doubles or is null
/// with `len == 0`; `written` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_run_solution(r: *const LcRun, buf: *mut f64, len: usize, written: *mut usize) -> LcStatus {
    guard(|| {
        clear_error();
        let (Some(r), false) = (r.as_ref(), written.is_null()) else {
            set_error("null run handle or output pointer");
            return LcStatus::NullPointer;
        };
        let art = &r.inner.artifacts;
        let Some(u) = art.u_repaired.as_ref().or(art.u.as_ref()) else {
            *written = 0;
            set_error("this stage produced no solution");
            return LcStatus::Numerical;
        };
        *written = u.len();
        if len < u.len() || buf.is_null() {
            set_error(format!("buffer holds {len} values, {} needed", u.len()));
            return LcStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(u.as_ptr(), buf, u.len());
        LcStatus::Ok
    })
}

/// Copies vertex coordinates as interleaved (x, y) pairs; same buffer
/// protocol as [`lc_run_solution`] with `len` counted in doubles.
///
/// # Safety
/// As for [`lc_run_solution`].
#[no_mangle]
pub unsafe extern "C" fn lc_run_vertices(r: *const LcRun, buf: *mut f64, len: usize, written: *mut usize) -> LcStatus {
    guard(|| {
        clear_error();
        let (Some(r), false) = (r.as_ref(), written.is_null()) else {
            set_error("null run handle or output pointer");
            return LcStatus::NullPointer;
        };
        let verts = &r.inner.mesh.vertices;
        *written = 2 * verts.len();
        if len < 2 * verts.len() || buf.is_null() {
            set_error(format!("buffer holds {len} values, {} needed", 2 * verts.len()));
            return LcStatus::BufferTooSmall;
        }
        for (i, v) in verts.iter().enumerate() {
            *buf.add(2 * i) = v.x;
            *buf.add(2 * i + 1) = v.y;
        }
        LcStatus::Ok
    })
}

/// Writes the output bundle (report.json, CSV files, patches.jsonl) into
/// `dir`, creating it if needed.
///
/// # Safety
/// `r` is a live handle; `dir` is a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lc_run_write_bundle(r: *const LcRun, dir: *const c_char) -> LcStatus {
    guard(|| {
        clear_error();
        let Some(r) = r.as_ref() else {
            set_error("null run handle");
            return LcStatus::NullPointer;
        };
        let d = match read_str(dir) {
            Ok(d) => d,
            Err(st) => return st,
        };
        let meta = Metadata {
            tool: "lipcert-ffi".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            started_unix: 0,
            elapsed_seconds: 0.0,
            scenario_file: None,
        };
        match write_bundle(Path::new(d), &r.inner.mesh, &r.inner.report, &r.inner.artifacts, &meta) {
            Ok(()) => LcStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `r` is null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lc_run_free(r: *mut LcRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Boundary Hölder exponent (2p−n−1)/(4p+n−3) for growth order `p` in
/// dimension `n`. Rejects p ≤ (n+1)/2.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lc_holder_exponent(p: f64, n: f64, out: *mut f64) -> LcStatus {
    guard(|| {
        clear_error();
        if out.is_null() {
            set_error("null output pointer");
            return LcStatus::NullPointer;
        }
        match lipcert::certify::holder_exponent(p, n) {
            Ok(a) => {
                *out = a;
                LcStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
