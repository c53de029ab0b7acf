//! C ABI over `germglue`.
//!
//! Every entry point returns a [`GgStatus`]. On failure a message is kept per thread and can be
//! read with [`gg_last_error`]. Objects cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function; strings returned through `out` parameters are
//! released with [`gg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use germglue::atlas::{glue, validate_germ_data, AtlasParams, GermAtlas, GermAtlasInput, GluedAtlas};
use germglue::cli::{run, Command, JobSpec};
use germglue::error::Error;
use germglue::tep::{tep_check, TepData, TepDoc};

/// Result of a call. The numeric values of the error classes match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GgStatus {
    Ok = 0,
    /// Input parsed but failed a mathematical check (cocycle, agreement, invertibility).
    Validation = 2,
    /// A shrinking search ran out of budget or the cover lost a base point.
    Obstruction = 3,
    /// Malformed document, wrong dimensions, or I/O failure.
    Input = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// A parsed germ atlas: charts, transitions and sample points at a fixed truncation order.
pub struct GgAtlas(GermAtlas);

/// The result of gluing a [`GgAtlas`].
pub struct GgGluedAtlas(GluedAtlas);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> GgStatus {
    match err.exit_code() {
        2 => GgStatus::Validation,
        3 => GgStatus::Obstruction,
        _ => GgStatus::Input,
    }
}

struct Failure(GgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut msg = e.to_string();
        for v in e.violations() {
            msg.push_str("\n  ");
            msg.push_str(&v.to_string());
        }
        Failure(status_of(&e), msg)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(GgStatus::Input, format!("json: {e}"))
    }
}

/// Runs `body` behind a panic guard and records the error message on failure.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> GgStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => GgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            GgStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure(GgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(GgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn check_out<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(GgStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(GgStatus::Input, "output contains a NUL byte".into()))
}

/// # Safety
/// `h` must be null or a handle obtained from this library that has not been freed.
unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref()
        .ok_or_else(|| Failure(GgStatus::NullPointer, format!("{what} is null")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a successful call.
/// The pointer stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn gg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned through an `out` parameter of this library,
/// not freed before.
#[no_mangle]
pub unsafe extern "C" fn gg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an atlas document. `order` of 0 keeps the declared truncation order; a positive
/// `float_tolerance` switches to floating-point coefficients compared with that tolerance.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gg_atlas_parse(
    json: *const c_char,
    order: u32,
    float_tolerance: f64,
    out: *mut *mut GgAtlas,
) -> GgStatus {
    guard(|| {
        check_out(out, "out")?;
        let text = read_str(json, "json")?;
        let input: GermAtlasInput = serde_json::from_str(text)?;
        let order = (order > 0).then_some(order);
        let tol = (float_tolerance > 0.0).then_some(float_tolerance);
        let atlas = GermAtlas::from_input(&input, order, tol)?;
        *out = Box::into_raw(Box::new(GgAtlas(atlas)));
        Ok(())
    })
}

/// Checks zero-section, inverse-pair and cocycle identities; writes the report as JSON.
///
/// # Safety
/// `atlas` must be a live handle and `out_report` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gg_atlas_validate(atlas: *const GgAtlas, out_report: *mut *mut c_char) -> GgStatus {
    guard(|| {
        check_out(out_report, "out_report")?;
        let a = handle(atlas, "atlas")?;
        let report = validate_germ_data(&a.0)?;
        *out_report = into_c_string(serde_json::to_string(&report)?)?;
        Ok(())
    })
}

/// Runs the full gluing pipeline. `n_max` of 0 keeps the default search budget.
///
/// # Safety
/// `atlas` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gg_atlas_glue(atlas: *const GgAtlas, n_max: u64, out: *mut *mut GgGluedAtlas) -> GgStatus {
    guard(|| {
        check_out(out, "out")?;
        let a = handle(atlas, "atlas")?;
        let mut params = AtlasParams::default();
        if n_max > 0 {
            params.n_max = n_max;
        }
        let outcome = glue(&a.0, &params)?;
        *out = Box::into_raw(Box::new(GgGluedAtlas(outcome.atlas)));
        Ok(())
    })
}

/// # Safety
/// `atlas` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gg_atlas_free(atlas: *mut GgAtlas) {
    if !atlas.is_null() {
        drop(Box::from_raw(atlas));
    }
}

/// Number of charts of a glued atlas, or 0 for a null handle.
///
/// # Safety
/// `glued` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gg_glued_atlas_chart_count(glued: *const GgGluedAtlas) -> usize {
    glued.as_ref().map_or(0, |g| g.0.charts.len())
}

/// Whether the glued atlas carries a Hausdorff certificate; false for a null handle.
///
/// # Safety
/// `glued` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gg_glued_atlas_is_hausdorff(glued: *const GgGluedAtlas) -> bool {
    glued.as_ref().is_some_and(|g| g.0.certificates.hausdorff)
}

/// # Safety
/// `glued` must be a live handle and `out_json` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gg_glued_atlas_to_json(glued: *const GgGluedAtlas, out_json: *mut *mut c_char) -> GgStatus {
    guard(|| {
        check_out(out_json, "out_json")?;
        let g = handle(glued, "glued")?;
        *out_json = into_c_string(serde_json::to_string(&g.0)?)?;
        Ok(())
    })
}

/// # Safety
/// `glued` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gg_glued_atlas_free(glued: *mut GgGluedAtlas) {
    if !glued.is_null() {
        drop(Box::from_raw(glued));
    }
}

/// Checks one TEP chart at its base point. The axioms failing is not an error: the
/// report says so, and `out_axioms_hold` (when non-null) receives the verdict.
///
/// # Safety
/// `json` must be a valid NUL-terminated string, `out_report` writable, and
/// `out_axioms_hold` null or writable.
#[no_mangle]
pub unsafe extern "C" fn gg_tep_check(
    json: *const c_char,
    seed: u64,
    out_report: *mut *mut c_char,
    out_axioms_hold: *mut bool,
) -> GgStatus {
    guard(|| {
        check_out(out_report, "out_report")?;
        let doc: TepDoc = serde_json::from_str(read_str(json, "json")?)?;
        let data = TepData::from_doc(&doc, None, None)?;
        let report = tep_check(&data, None, seed)?;
        if !out_axioms_hold.is_null() {
            *out_axioms_hold = report.axioms_hold();
        }
        *out_report = into_c_string(serde_json::to_string(&report)?)?;
        Ok(())
    })
}

/// Runs a batch job described in JSON, exactly as the command-line tool would, and returns
/// its report document. The job names a `command` and its input paths; omitted settings take
/// the command-line defaults. A job that runs but fails still returns `Ok`, with the tool's
/// exit code in `out_exit_code`.
///
/// # Safety
/// `job_json` must be a valid NUL-terminated string, `out_report` writable, and
/// `out_exit_code` null or writable.
#[no_mangle]
pub unsafe extern "C" fn gg_run_job(
    job_json: *const c_char,
    out_report: *mut *mut c_char,
    out_exit_code: *mut i32,
) -> GgStatus {
    guard(|| {
        check_out(out_report, "out_report")?;
        let given: serde_json::Value = serde_json::from_str(read_str(job_json, "job_json")?)?;
        let command: Command = serde_json::from_value(given.clone())?;
        let mut merged = serde_json::to_value(JobSpec::new(command))?;
        if let (Some(base), Some(extra)) = (merged.as_object_mut(), given.as_object()) {
            for (k, v) in extra {
                base.insert(k.clone(), v.clone());
            }
        }
        let job: JobSpec = serde_json::from_value(merged)?;
        let outcome = run(&job);
        if !out_exit_code.is_null() {
            *out_exit_code = outcome.exit_code;
        }
        *out_report = into_c_string(outcome.report_json())?;
        Ok(())
    })
}
