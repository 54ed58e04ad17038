//! C ABI over the `coagbreak` solver.
//!
//! Every fallible function returns a [`CbStatus`]; on failure the message is
//! kept per thread and read with `cb_last_error_message`. Handles are opaque
//! and owned by the caller once returned; release each with its `_free`
//! function. Strings returned as `char *` are released with `cb_string_free`.
//! Pointer requirements are stated on each function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use coagbreak::io::config::{load_config, parse_config, RunConfig};
use coagbreak::io::output::{write_moments, write_trajectory, VerificationReport};
use coagbreak::io::pipeline::{run_config, verify_config};
use coagbreak::solver::Trajectory;
use coagbreak::verification::mass_defect;
use coagbreak::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbStatus {
    Ok = 0,
    CheckFailed = 1,
    InvalidConfig = 2,
    Numerical = 3,
    Io = 4,
    NullPointer = 5,
    InvalidArgument = 6,
    Panic = 7,
}

/// Moment log entry; `flux_out` is cumulative.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbMoments {
    pub t: f64,
    pub m_neg: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub flux_out: f64,
}

pub struct CbConfig(RunConfig);
pub struct CbTrajectory(Trajectory);
pub struct CbReport(VerificationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("interior nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> CbStatus {
    match err {
        Error::CheckFailed(_) => CbStatus::CheckFailed,
        Error::Io { .. } => CbStatus::Io,
        e if e.is_numerical() => CbStatus::Numerical,
        _ => CbStatus::InvalidConfig,
    }
}

struct Failure(CbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            CbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            CbStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    let mut bytes = s.into_bytes();
    bytes.retain(|&b| b != 0);
    CString::new(bytes)
        .expect("interior nul bytes removed")
        .into_raw()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn cb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_config_default(out: *mut *mut CbConfig) -> CbStatus {
    guard(|| put(out, CbConfig(RunConfig::default())))
}

/// Parses configuration text; every problem is reported in one message.
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_config_parse(text: *const c_char, out: *mut *mut CbConfig) -> CbStatus {
    guard(|| {
        let text = str_arg(text, "config text")?;
        let cfg =
            parse_config(text).map_err(|e| Failure(CbStatus::InvalidConfig, e.to_string()))?;
        put(out, CbConfig(cfg))
    })
}

/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_config_load(path: *const c_char, out: *mut *mut CbConfig) -> CbStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let cfg = load_config(Path::new(path))?;
        put(out, CbConfig(cfg))
    })
}

/// Canonical text of the configuration, or NULL if `cfg` is NULL.
/// `cfg` must be NULL or a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn cb_config_emit(cfg: *const CbConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => into_c_string(c.0.emit()),
        None => ptr::null_mut(),
    }
}

/// Hex SHA-256 fingerprint, or NULL if `cfg` is NULL.
/// `cfg` must be NULL or a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn cb_config_fingerprint(cfg: *const CbConfig) -> *mut c_char {
    match cfg.as_ref() {
        Some(c) => into_c_string(c.0.fingerprint()),
        None => ptr::null_mut(),
    }
}

/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_config_free(cfg: *mut CbConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Integrates the configured scenario.
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_run(cfg: *const CbConfig, out: *mut *mut CbTrajectory) -> CbStatus {
    guard(|| {
        let cfg = handle(cfg, "config")?;
        let traj = run_config(&cfg.0)?;
        put(out, CbTrajectory(traj))
    })
}

/// Integrates and runs every enabled check. A failed check is not an error:
/// inspect the report with `cb_report_passed`. `out_traj` may be NULL.
/// `cfg` must be a live configuration handle, `out_report` a valid pointer
/// and `out_traj` NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_verify(
    cfg: *const CbConfig,
    seed: u64,
    out_traj: *mut *mut CbTrajectory,
    out_report: *mut *mut CbReport,
) -> CbStatus {
    guard(|| {
        let cfg = handle(cfg, "config")?;
        if out_report.is_null() {
            return Err(null("report output pointer"));
        }
        let (traj, report) = verify_config(&cfg.0, seed)?;
        if !out_traj.is_null() {
            put(out_traj, CbTrajectory(traj))?;
        }
        put(out_report, CbReport(report))
    })
}

/// Number of stored snapshots, 0 for NULL.
/// `traj` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_snapshot_count(traj: *const CbTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.snapshots.len())
}

/// Number of mesh cells, 0 for NULL.
/// `traj` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_cell_count(traj: *const CbTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.mesh().len())
}

/// `traj` must be a live trajectory handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_time(
    traj: *const CbTrajectory,
    index: usize,
    out: *mut f64,
) -> CbStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        let snap = traj
            .0
            .snapshots
            .get(index)
            .ok_or_else(|| out_of_range(index, traj.0.snapshots.len()))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = snap.time;
        Ok(())
    })
}

fn out_of_range(index: usize, len: usize) -> Failure {
    Failure(
        CbStatus::InvalidArgument,
        format!("snapshot index {index} out of range (count {len})"),
    )
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(Failure(
            CbStatus::InvalidArgument,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the cell centers into `buf`, which must hold `cb_trajectory_cell_count` values.
/// `traj` must be a live trajectory handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_centers(
    traj: *const CbTrajectory,
    buf: *mut f64,
    len: usize,
) -> CbStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        copy_out(traj.0.mesh().centers(), buf, len)
    })
}

/// Copies the densities of snapshot `index` into `buf`.
/// `traj` must be a live trajectory handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_values(
    traj: *const CbTrajectory,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> CbStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        let snap = traj
            .0
            .snapshots
            .get(index)
            .ok_or_else(|| out_of_range(index, traj.0.snapshots.len()))?;
        copy_out(&snap.values, buf, len)
    })
}

/// Moments of snapshot `index`.
/// `traj` must be a live trajectory handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_moments(
    traj: *const CbTrajectory,
    index: usize,
    out: *mut CbMoments,
) -> CbStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        let m = traj
            .0
            .moments
            .get(index)
            .ok_or_else(|| out_of_range(index, traj.0.moments.len()))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = CbMoments {
            t: m.t,
            m_neg: m.m_neg,
            m0: m.m0,
            m1: m.m1,
            m2: m.m2,
            flux_out: m.flux_out,
        };
        Ok(())
    })
}

/// Relative mass lost through the truncation boundaries by the final time.
/// `traj` must be a live trajectory handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_mass_defect(
    traj: *const CbTrajectory,
    out: *mut f64,
) -> CbStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = mass_defect(&traj.0);
        Ok(())
    })
}

/// Writes the trajectory and moment CSV files; either path may be NULL to skip it.
/// `traj` must be a live trajectory handle; paths NULL or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_write_csv(
    traj: *const CbTrajectory,
    trajectory_path: *const c_char,
    moments_path: *const c_char,
) -> CbStatus {
    guard(|| {
        let traj = handle(traj, "trajectory")?;
        if !trajectory_path.is_null() {
            write_trajectory(
                &traj.0,
                Path::new(str_arg(trajectory_path, "trajectory path")?),
            )?;
        }
        if !moments_path.is_null() {
            write_moments(&traj.0, Path::new(str_arg(moments_path, "moments path")?))?;
        }
        Ok(())
    })
}

/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_trajectory_free(traj: *mut CbTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// 1 if every check passed, 0 if one failed, -1 for NULL.
/// `report` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn cb_report_passed(report: *const CbReport) -> c_int {
    report.as_ref().map_or(-1, |r| c_int::from(r.0.passed()))
}

/// Report in its text form, or NULL if `report` is NULL.
/// `report` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn cb_report_text(report: *const CbReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => into_c_string(r.0.to_text()),
        None => ptr::null_mut(),
    }
}

/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cb_report_free(report: *mut CbReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
