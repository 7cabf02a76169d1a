//! C ABI for the transonic solvers.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every entry point returns a [`TransonicStatus`];
//! on failure the message is available from [`transonic_last_error`] on the
//! same thread until the next call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use transonic::cli::{self, RunConfig, RunOptions, SolveReport};
use transonic::verify::VerifyReport;

/// Result of every call. Values 2 to 4 match the exit codes of the binary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransonicStatus {
    Ok = 0,
    /// Null pointer, invalid UTF-8 or a handle of the wrong kind.
    InvalidArgument = 1,
    /// The configuration or input data were rejected.
    Validation = 2,
    /// A solver failed to produce a state.
    Solver = 3,
    /// The property suite ran and at least one check failed.
    VerifyFailed = 4,
    /// The requested entry does not exist in the report.
    NotFound = 5,
    /// A panic was caught at the boundary.
    Panic = 6,
}

/// Parsed and validated run configuration.
pub struct TransonicConfig {
    inner: RunConfig,
}

enum ReportKind {
    Solve(Box<SolveReport>),
    Verify(VerifyReport),
}

/// Result of a solve or of a verification run.
pub struct TransonicReport {
    inner: ReportKind,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(TransonicStatus, String);

impl From<transonic::Error> for Fail {
    fn from(e: transonic::Error) -> Self {
        let status = if cli::exit_code(&e) == 2 { TransonicStatus::Validation } else { TransonicStatus::Solver };
        Fail(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(TransonicStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TransonicStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TransonicStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            TransonicStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, Fail> {
    p.as_mut().ok_or_else(|| invalid("output pointer is null"))
}

fn into_handle(kind: ReportKind) -> *mut TransonicReport {
    let text = match &kind {
        ReportKind::Solve(r) => r.to_json(),
        ReportKind::Verify(r) => serde_json::to_string_pretty(r).expect("report serialises"),
    };
    let json = CString::new(text).expect("JSON has no interior NUL");
    Box::into_raw(Box::new(TransonicReport { inner: kind, json }))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn transonic_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn transonic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fix the number of solver worker threads for the whole process. Only the
/// first call can take effect; later calls report `Validation`.
#[no_mangle]
pub extern "C" fn transonic_set_threads(threads: usize) -> TransonicStatus {
    guard(|| {
        if threads == 0 {
            return Err(invalid("threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Fail(TransonicStatus::Validation, format!("thread pool: {e}")))
    })
}

/// Parse and validate a JSON configuration.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn transonic_config_from_json(json: *const c_char, out: *mut *mut TransonicConfig) -> TransonicStatus {
    guard(|| {
        let out = out_arg(out)?;
        let cfg = RunConfig::from_json(str_arg(json, "json")?)?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(TransonicConfig { inner: cfg }));
        Ok(())
    })
}

/// Load, parse and validate a JSON configuration file.
///
/// # Safety
/// As for [`transonic_config_from_json`], with `path` a file path.
#[no_mangle]
pub unsafe extern "C" fn transonic_config_load(path: *const c_char, out: *mut *mut TransonicConfig) -> TransonicStatus {
    guard(|| {
        let out = out_arg(out)?;
        let cfg = RunConfig::load(&PathBuf::from(str_arg(path, "path")?))?;
        cfg.validate()?;
        *out = Box::into_raw(Box::new(TransonicConfig { inner: cfg }));
        Ok(())
    })
}

/// Release a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn transonic_config_free(cfg: *mut TransonicConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

#[derive(Clone, Copy)]
enum Run {
    Background,
    Potential,
    Beltrami,
    Verify,
}

unsafe fn run(run: Run, cfg: *const TransonicConfig, out_dir: *const c_char, out: *mut *mut TransonicReport) -> TransonicStatus {
    let mut verify_failed = false;
    let status = guard(|| {
        let out = out_arg(out)?;
        let cfg = &cfg.as_ref().ok_or_else(|| invalid("config is null"))?.inner;
        let opts = RunOptions { out: PathBuf::from(str_arg(out_dir, "out_dir")?), timings: false };
        let kind = match run {
            Run::Background => ReportKind::Solve(Box::new(cli::run_background(cfg, &opts)?)),
            Run::Potential => ReportKind::Solve(Box::new(cli::run_potential(cfg, &opts)?)),
            Run::Beltrami => ReportKind::Solve(Box::new(cli::run_beltrami(cfg, &opts)?)),
            Run::Verify => {
                let r = cli::run_verify(cfg, &opts)?;
                verify_failed = !r.passed();
                ReportKind::Verify(r)
            }
        };
        *out = into_handle(kind);
        Ok(())
    });
    if status == TransonicStatus::Ok && verify_failed {
        set_error("one or more verification checks failed");
        return TransonicStatus::VerifyFailed;
    }
    status
}

/// Background profile and admissibility margins; files go to `out_dir`.
///
/// # Safety
/// `cfg` must be a live config handle, `out_dir` a NUL-terminated path and
/// `out` writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn transonic_run_background(cfg: *const TransonicConfig, out_dir: *const c_char, out: *mut *mut TransonicReport) -> TransonicStatus {
    run(Run::Background, cfg, out_dir, out)
}

/// Irrotational fixed point.
///
/// # Safety
/// As for [`transonic_run_background`].
#[no_mangle]
pub unsafe extern "C" fn transonic_solve_potential(cfg: *const TransonicConfig, out_dir: *const c_char, out: *mut *mut TransonicReport) -> TransonicStatus {
    run(Run::Potential, cfg, out_dir, out)
}

/// Rotational fixed point.
///
/// # Safety
/// As for [`transonic_run_background`].
#[no_mangle]
pub unsafe extern "C" fn transonic_solve_beltrami(cfg: *const TransonicConfig, out_dir: *const c_char, out: *mut *mut TransonicReport) -> TransonicStatus {
    run(Run::Beltrami, cfg, out_dir, out)
}

/// Property suite. A report is produced even when checks fail, in which case
/// the status is `VerifyFailed`.
///
/// # Safety
/// As for [`transonic_run_background`].
#[no_mangle]
pub unsafe extern "C" fn transonic_verify(cfg: *const TransonicConfig, out_dir: *const c_char, out: *mut *mut TransonicReport) -> TransonicStatus {
    run(Run::Verify, cfg, out_dir, out)
}

/// Report as JSON. The string is owned by the report.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn transonic_report_json(report: *const TransonicReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Named residual of a solve report.
///
/// # Safety
/// `report` must be a live report handle, `name` a NUL-terminated string and
/// `value` writable.
#[no_mangle]
pub unsafe extern "C" fn transonic_report_residual(report: *const TransonicReport, name: *const c_char, value: *mut f64) -> TransonicStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| invalid("report is null"))?;
        let value = value.as_mut().ok_or_else(|| invalid("value is null"))?;
        let name = str_arg(name, "name")?;
        let ReportKind::Solve(s) = &r.inner else {
            return Err(invalid("not a solve report"));
        };
        *value = *s.residuals.get(name).ok_or_else(|| Fail(TransonicStatus::NotFound, format!("no residual named {name}")))?;
        Ok(())
    })
}

/// Largest sonic-surface displacement of a solve report.
///
/// # Safety
/// `report` must be a live report handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn transonic_report_sup_xi(report: *const TransonicReport, value: *mut f64) -> TransonicStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| invalid("report is null"))?;
        let value = value.as_mut().ok_or_else(|| invalid("value is null"))?;
        let ReportKind::Solve(s) = &r.inner else {
            return Err(invalid("not a solve report"));
        };
        *value = s.sonic.as_ref().ok_or_else(|| Fail(TransonicStatus::NotFound, "report has no sonic surface".into()))?.sup_xi;
        Ok(())
    })
}

/// Number of checks and of failed checks in a verify report.
///
/// # Safety
/// `report` must be a live report handle; `checks` and `failed` writable.
#[no_mangle]
pub unsafe extern "C" fn transonic_report_checks(report: *const TransonicReport, checks: *mut usize, failed: *mut usize) -> TransonicStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| invalid("report is null"))?;
        let (checks, failed) = (checks.as_mut().ok_or_else(|| invalid("checks is null"))?, failed.as_mut().ok_or_else(|| invalid("failed is null"))?);
        let ReportKind::Verify(v) = &r.inner else {
            return Err(invalid("not a verify report"));
        };
        *checks = v.checks.len();
        *failed = v.failures();
        Ok(())
    })
}

/// Release a report. Null is ignored.
///
/// # Safety
/// `report` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn transonic_report_free(report: *mut TransonicReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
