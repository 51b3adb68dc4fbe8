//! C ABI over the forecasting engines.
//!
//! An engine is an opaque handle created from a procedure JSON (the same
//! objects the configuration files use) and an optional domain JSON. The
//! caller alternates `calibra_engine_next_forecast` and `calibra_engine_observe`.
//! Every fallible call returns a `CalibraStatus`; on failure the message is
//! available from `calibra_last_error_message` on the same thread.
//!
//! No call unwinds into C: panics are caught and reported as `CALIBRA_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use calibra::procedures::{ForecastEngine, ProcedureSpec, StepDiagnostics};
use calibra::scores::ScoreSet;
use calibra::{ConvexDomain, Error, Point, Retention};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibraStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Malformed JSON, invalid procedure or domain, non-UTF-8 text.
    InvalidConfig = 2,
    /// The outgoing solver or the minimax program failed.
    SolverFailure = 3,
    /// A buffer length differs from the engine dimension.
    DimensionMismatch = 4,
    /// Bad numeric input: non-finite values, points outside the domain.
    InvalidArgument = 5,
    /// Calls out of order, e.g. observe without a pending forecast.
    InvalidState = 6,
    /// Scores requested before the first observation.
    EmptyHistory = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Opaque engine handle.
pub struct CalibraEngine {
    engine: ForecastEngine,
    pending: Option<Point>,
    last: Option<StepDiagnostics>,
}

/// Scores after the periods observed so far.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CalibraScores {
    pub t: u64,
    /// Classic score K_t.
    pub k_classic: f64,
    /// Binned score K_t^Π under the engine's binning.
    pub k_binned: f64,
    /// Σ_i ‖g_t(w_i)‖², i.e. S_t/t².
    pub s_over_t2: f64,
    /// X_t/t.
    pub x_over_t: f64,
}

/// Certificate of the most recent announcement.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CalibraDiagnostics {
    pub violation: f64,
    /// 1 when the certificate met its tolerance.
    pub satisfied: u8,
    /// Support size of the announced distribution.
    pub support: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> CalibraStatus {
    match e {
        Error::SolverFailure { .. } | Error::MinimaxInfeasible { .. } => CalibraStatus::SolverFailure,
        Error::DimensionMismatch { .. } => CalibraStatus::DimensionMismatch,
        Error::Config(_) | Error::Json(_) | Error::Unsupported(_) => CalibraStatus::InvalidConfig,
        Error::EmptyHistory => CalibraStatus::EmptyHistory,
        _ => CalibraStatus::InvalidArgument,
    }
}

fn fail(status: CalibraStatus, msg: impl Into<String>) -> CalibraStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> CalibraStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, translating panics into `Panic`.
fn guard(f: impl FnOnce() -> CalibraStatus) -> CalibraStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CalibraStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `p` is null or a nul-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, CalibraStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(CalibraStatus::InvalidConfig, format!("{what} is not valid UTF-8")))
}

fn parse_engine(procedure: &str, domain: Option<&str>, seed: u64) -> Result<ForecastEngine, CalibraStatus> {
    let spec: ProcedureSpec =
        serde_json::from_str(procedure).map_err(|e| fail(CalibraStatus::InvalidConfig, format!("procedure: {e}")))?;
    let domain = match domain {
        None => ConvexDomain::Interval01,
        Some(d) => serde_json::from_str(d).map_err(|e| fail(CalibraStatus::InvalidConfig, format!("domain: {e}")))?,
    };
    spec.validate(&domain).map_err(|e| fail(CalibraStatus::InvalidConfig, e.to_string()))?;
    ForecastEngine::new(&spec, &domain, seed, Retention::default()).map_err(from_error)
}

/// Creates an engine. `domain_json` may be null for the interval [0,1].
///
/// # Safety
/// `procedure_json` must be a nul-terminated string, `domain_json` null or
/// nul-terminated, and `out` a valid pointer. On success `*out` owns a handle
/// to release with `calibra_engine_free`; on failure it is set to null.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_new(
    procedure_json: *const c_char,
    domain_json: *const c_char,
    seed: u64,
    out: *mut *mut CalibraEngine,
) -> CalibraStatus {
    guard(|| {
        if out.is_null() {
            return fail(CalibraStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let proc_text = match text(procedure_json, "procedure") {
            Ok(Some(t)) => t,
            Ok(None) => return fail(CalibraStatus::NullPointer, "procedure_json is null"),
            Err(s) => return s,
        };
        let dom_text = match text(domain_json, "domain") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_engine(proc_text, dom_text, seed) {
            Ok(engine) => {
                *out = Box::into_raw(Box::new(CalibraEngine { engine, pending: None, last: None }));
                CalibraStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Releases an engine; null is ignored.
///
/// # Safety
/// `engine` is null or a handle from `calibra_engine_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_free(engine: *mut CalibraEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Dimension m of forecasts and actions; 0 for a null handle.
///
/// # Safety
/// `engine` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_dimension(engine: *const CalibraEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.engine.dim())
}

/// Announces and samples the next forecast into `out[0..len]`.
///
/// Calling it again before `calibra_engine_observe` returns the same pending
/// forecast without advancing the generator.
///
/// # Safety
/// `engine` is a live handle and `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_next_forecast(engine: *mut CalibraEngine, out: *mut f64, len: usize) -> CalibraStatus {
    guard(|| {
        let Some(e) = engine.as_mut() else { return fail(CalibraStatus::NullPointer, "engine is null") };
        if out.is_null() {
            return fail(CalibraStatus::NullPointer, "out is null");
        }
        if len != e.engine.dim() {
            return from_error(Error::DimensionMismatch { expected: e.engine.dim(), found: len });
        }
        if e.pending.is_none() {
            match e.engine.next_forecast() {
                Ok((ann, c)) => {
                    e.last = Some(ann.diagnostics);
                    e.pending = Some(c);
                }
                Err(err) => return from_error(err),
            }
        }
        let c = e.pending.as_ref().expect("pending forecast");
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(c.coords());
        CalibraStatus::Ok
    })
}

/// Records the outcome for the pending forecast.
///
/// # Safety
/// `engine` is a live handle and `action` points to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_observe(engine: *mut CalibraEngine, action: *const f64, len: usize) -> CalibraStatus {
    guard(|| {
        let Some(e) = engine.as_mut() else { return fail(CalibraStatus::NullPointer, "engine is null") };
        if action.is_null() {
            return fail(CalibraStatus::NullPointer, "action is null");
        }
        if len != e.engine.dim() {
            return from_error(Error::DimensionMismatch { expected: e.engine.dim(), found: len });
        }
        let Some(c) = e.pending.as_ref() else {
            return fail(CalibraStatus::InvalidState, "observe called without a pending forecast");
        };
        let a = match Point::new(std::slice::from_raw_parts(action, len).to_vec()) {
            Ok(a) => a,
            Err(err) => return from_error(err),
        };
        if let Err(err) = e.engine.domain().check_point(&a) {
            return from_error(err);
        }
        match e.engine.observe(c, &a) {
            Ok(()) => {
                e.pending = None;
                CalibraStatus::Ok
            }
            Err(err) => from_error(err),
        }
    })
}

/// Scores after the observed periods.
///
/// # Safety
/// `engine` is a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_scores(engine: *const CalibraEngine, out: *mut CalibraScores) -> CalibraStatus {
    guard(|| {
        let Some(e) = engine.as_ref() else { return fail(CalibraStatus::NullPointer, "engine is null") };
        if out.is_null() {
            return fail(CalibraStatus::NullPointer, "out is null");
        }
        match ScoreSet::compute(e.engine.stats()) {
            Ok(s) => {
                *out = CalibraScores {
                    t: s.t,
                    k_classic: s.k_classic,
                    k_binned: s.k_binned,
                    s_over_t2: s.s_over_t2,
                    x_over_t: s.x_over_t,
                };
                CalibraStatus::Ok
            }
            Err(err) => from_error(err),
        }
    })
}

/// Certificate of the latest announcement.
///
/// # Safety
/// `engine` is a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn calibra_engine_last_diagnostics(
    engine: *const CalibraEngine,
    out: *mut CalibraDiagnostics,
) -> CalibraStatus {
    guard(|| {
        let Some(e) = engine.as_ref() else { return fail(CalibraStatus::NullPointer, "engine is null") };
        if out.is_null() {
            return fail(CalibraStatus::NullPointer, "out is null");
        }
        let Some(d) = e.last.as_ref() else {
            return fail(CalibraStatus::InvalidState, "no forecast announced yet");
        };
        *out = CalibraDiagnostics { violation: d.violation, satisfied: u8::from(d.satisfied), support: d.support as u64 };
        CalibraStatus::Ok
    })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn calibra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn calibra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn new_engine(proc_json: &str, domain: Option<&str>) -> (CalibraStatus, *mut CalibraEngine) {
        let p = CString::new(proc_json).unwrap();
        let d = domain.map(|d| CString::new(d).unwrap());
        let mut out = ptr::null_mut();
        let s = unsafe { calibra_engine_new(p.as_ptr(), d.as_ref().map_or(ptr::null(), |d| d.as_ptr()), 1, &mut out) };
        (s, out)
    }

    fn last_error() -> String {
        let p = calibra_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::EmptyHistory), CalibraStatus::EmptyHistory);
        assert_eq!(status_of(&Error::Config("x".into())), CalibraStatus::InvalidConfig);
        assert_eq!(
            status_of(&Error::SolverFailure { message: String::new(), best: vec![], violation: 1.0 }),
            CalibraStatus::SolverFailure
        );
    }

    #[test]
    fn bad_json_reports_message() {
        let (s, e) = new_engine("{\"kind\":", None);
        assert_eq!(s, CalibraStatus::InvalidConfig);
        assert!(e.is_null());
        assert!(last_error().starts_with("procedure:"));
        let (s, _) = new_engine(r#"{"kind":"binary","n":4}"#, Some(r#"{"kind":"simplex","m":3}"#));
        assert_eq!(s, CalibraStatus::InvalidConfig);
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, CalibraStatus::Panic);
        assert_eq!(last_error(), "panic: boom");
        let s = guard(|| CalibraStatus::Ok);
        assert_eq!(s, CalibraStatus::Ok);
        assert!(calibra_last_error_message().is_null());
    }
}
