//! C ABI over the tabular-obda engine.
//!
//! Handles are opaque and owned by the caller: free configs with
//! `tobda_config_free`, runs with `tobda_run_free` and returned strings
//! with `tobda_string_free`. A failing call returns a non-zero status and
//! leaves a message for `tobda_last_error` on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use tabular_obda::pipeline::Policy;
use tabular_obda::{compare_modes, run, Error, Mode, RunConfig, RunReport};

/// Call outcome. Non-zero values mirror the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TobdaStatus {
    Ok = 0,
    InputError = 2,
    ConstraintViolation = 3,
    EngineError = 4,
    MonotonicityViolation = 5,
    NullArgument = 6,
    Panic = 7,
}

pub struct TobdaConfig {
    inner: RunConfig,
}

pub struct TobdaRun {
    report: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> TobdaStatus {
    match e.exit_code() {
        3 => TobdaStatus::ConstraintViolation,
        4 => TobdaStatus::EngineError,
        5 => TobdaStatus::MonotonicityViolation,
        _ => TobdaStatus::InputError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), TobdaStatus>) -> TobdaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TobdaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            TobdaStatus::Panic
        }
    }
}

fn fail(e: Error) -> TobdaStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, TobdaStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(TobdaStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        TobdaStatus::InputError
    })
}

unsafe fn config_mut<'a>(cfg: *mut TobdaConfig) -> Result<&'a mut RunConfig, TobdaStatus> {
    cfg.as_mut().map(|c| &mut c.inner).ok_or_else(|| {
        set_error("config is null");
        TobdaStatus::NullArgument
    })
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Last error message on this thread, or null. Valid until the next call
/// on the same thread.
#[no_mangle]
pub extern "C" fn tobda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration in enhanced mode. `metadata` may be null.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_new(
    data_dir: *const c_char,
    mapping: *const c_char,
    metadata: *const c_char,
    query: *const c_char,
    out: *mut *mut TobdaConfig,
) -> TobdaStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return Err(TobdaStatus::NullArgument);
        }
        let data = text(data_dir, "data_dir")?;
        let mapping = text(mapping, "mapping")?;
        let query = text(query, "query")?;
        let metadata = if metadata.is_null() {
            None
        } else {
            Some(PathBuf::from(text(metadata, "metadata")?))
        };
        let inner = RunConfig::new(data, mapping, metadata, query);
        *out = Box::into_raw(Box::new(TobdaConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from `tobda_config_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_free(cfg: *mut TobdaConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// `mode` is one of "enhanced", "baseline", "noselect".
///
/// # Safety
/// `cfg` must be a live config; `mode` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_mode(cfg: *mut TobdaConfig, mode: *const c_char) -> TobdaStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        c.mode = text(mode, "mode")?.parse::<Mode>().map_err(fail)?;
        Ok(())
    })
}

/// Connection string; null restores the default.
///
/// # Safety
/// `cfg` must be a live config; `db` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_db(cfg: *mut TobdaConfig, db: *const c_char) -> TobdaStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        c.db_url = if db.is_null() {
            None
        } else {
            Some(text(db, "db")?.to_string())
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_repetitions(cfg: *mut TobdaConfig, n: u32) -> TobdaStatus {
    guard(|| {
        config_mut(cfg)?.repetitions = n as usize;
        Ok(())
    })
}

/// Index selectivity threshold.
///
/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_tau(cfg: *mut TobdaConfig, tau: f64) -> TobdaStatus {
    guard(|| {
        config_mut(cfg)?.tau = tau;
        Ok(())
    })
}

/// Non-zero `warn` nulls out violating values instead of failing.
///
/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_warn(cfg: *mut TobdaConfig, warn: bool) -> TobdaStatus {
    guard(|| {
        config_mut(cfg)?.range_violation = if warn { Policy::Warn } else { Policy::Error };
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_no_fk(cfg: *mut TobdaConfig, on: bool) -> TobdaStatus {
    guard(|| {
        config_mut(cfg)?.no_fk = on;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_no_index(cfg: *mut TobdaConfig, on: bool) -> TobdaStatus {
    guard(|| {
        config_mut(cfg)?.no_index = on;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn tobda_config_set_jobs(cfg: *mut TobdaConfig, jobs: u32) -> TobdaStatus {
    guard(|| {
        config_mut(cfg)?.jobs = jobs as usize;
        Ok(())
    })
}

/// Runs the configured mode.
///
/// # Safety
/// `cfg` must be a live config; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tobda_run(cfg: *const TobdaConfig, out: *mut *mut TobdaRun) -> TobdaStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| {
            set_error("config is null");
            TobdaStatus::NullArgument
        })?;
        if out.is_null() {
            set_error("out is null");
            return Err(TobdaStatus::NullArgument);
        }
        let report = run(&c.inner).map_err(fail)?;
        *out = Box::into_raw(Box::new(TobdaRun { report }));
        Ok(())
    })
}

/// Runs all modes; writes the comparison report as JSON.
///
/// # Safety
/// `cfg` must be a live config; `json_out` writable. Free the string with
/// `tobda_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tobda_compare(cfg: *const TobdaConfig, json_out: *mut *mut c_char) -> TobdaStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| {
            set_error("config is null");
            TobdaStatus::NullArgument
        })?;
        if json_out.is_null() {
            set_error("json_out is null");
            return Err(TobdaStatus::NullArgument);
        }
        let report = compare_modes(&c.inner).map_err(fail)?;
        *json_out = to_c(report.to_json());
        Ok(())
    })
}

/// # Safety
/// `r` must come from `tobda_run` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_free(r: *mut TobdaRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live run or null.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_answer_count(r: *const TobdaRun) -> usize {
    r.as_ref().map_or(0, |r| r.report.answer_count)
}

/// # Safety
/// `r` must be a live run or null.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_bytes_read(r: *const TobdaRun) -> u64 {
    r.as_ref().map_or(0, |r| r.report.bytes_read)
}

/// Median total wall time in seconds.
///
/// # Safety
/// `r` must be a live run or null.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_total_seconds(r: *const TobdaRun) -> f64 {
    r.as_ref().map_or(0.0, |r| r.report.steps.total)
}

unsafe fn run_string(r: *const TobdaRun, f: impl FnOnce(&RunReport) -> Result<String, Error>) -> *mut c_char {
    let Some(r) = r.as_ref() else {
        set_error("run is null");
        return ptr::null_mut();
    };
    match catch_unwind(AssertUnwindSafe(|| f(&r.report))) {
        Ok(Ok(s)) => to_c(s),
        Ok(Err(e)) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            ptr::null_mut()
        }
    }
}

/// Answers as CSV. Free with `tobda_string_free`.
///
/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_results_csv(r: *const TobdaRun) -> *mut c_char {
    run_string(r, |r| r.results.to_csv())
}

/// Answers as SPARQL results JSON. Free with `tobda_string_free`.
///
/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_results_json(r: *const TobdaRun) -> *mut c_char {
    run_string(r, |r| Ok(r.results.to_json()))
}

/// Timing report as JSON. Free with `tobda_string_free`.
///
/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_report_json(r: *const TobdaRun) -> *mut c_char {
    run_string(r, |r| Ok(r.to_json()))
}

/// Generated DDL. Free with `tobda_string_free`.
///
/// # Safety
/// `r` must be a live run.
#[no_mangle]
pub unsafe extern "C" fn tobda_run_ddl(r: *const TobdaRun) -> *mut c_char {
    run_string(r, |r| Ok(r.ddl.clone()))
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tobda_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_follow_exit_codes() {
        assert_eq!(status_of(&Error::Invalid("x".into())), TobdaStatus::InputError);
        assert_eq!(status_of(&Error::Adapter("x".into())), TobdaStatus::EngineError);
        let lost = Error::MonotonicityViolation {
            query: "q".into(),
            baseline: 2,
            enhanced: 1,
        };
        assert_eq!(status_of(&lost), TobdaStatus::MonotonicityViolation);
    }

    #[test]
    fn panics_become_a_status() {
        assert_eq!(guard(|| panic!("boom")), TobdaStatus::Panic);
        let msg = unsafe { CStr::from_ptr(tobda_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}
