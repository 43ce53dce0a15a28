//! C ABI over the berthsim library.
//!
//! Models are passed around as opaque `BsModel` handles. Every fallible call
//! returns a `BsStatus`; on failure `bs_last_error` describes what went wrong
//! on the calling thread. Strings handed out by the library are released with
//! `bs_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use berthsim::berth;
use berthsim::model::{parse_scenarios, ScenarioOverlay, Severity};
use berthsim::runner::{render, render_sweep, ReportFormat};
use berthsim::{parse, replicate, serialize, sweep, validate, ModelDef, RunError};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Model or scenario text has syntax errors.
    Parse = 3,
    /// The model parsed but fails validation.
    Invalid = 4,
    /// Simulation, scenario or other runtime failure.
    Runtime = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Opaque model handle.
pub struct BsModel {
    model: ModelDef,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(BsStatus, String);

impl From<RunError> for Fail {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Invalid(m) => Fail(BsStatus::Invalid, m),
            other => Fail(BsStatus::Runtime, other.to_string()),
        }
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BsStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Fail(BsStatus::InvalidUtf8, "argument is not valid UTF-8".into()))
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    opt_str(p)?.ok_or_else(|| Fail(BsStatus::NullArgument, format!("{what} is null")))
}

/// # Safety
/// `m` is null or a live handle from this library.
unsafe fn model<'a>(m: *const BsModel) -> Result<&'a ModelDef, Fail> {
    m.as_ref()
        .map(|h| &h.model)
        .ok_or_else(|| Fail(BsStatus::NullArgument, "model handle is null".into()))
}

/// # Safety
/// `out` is null or writable.
unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(BsStatus::NullArgument, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(|_| Fail(BsStatus::Runtime, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// # Safety
/// `out` is null or writable.
unsafe fn put_model(out: *mut *mut BsModel, model: ModelDef) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(BsStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(BsModel { model }));
    Ok(())
}

fn scenarios(text: &str) -> Result<Vec<ScenarioOverlay>, Fail> {
    parse_scenarios(text).map_err(|e| Fail(BsStatus::Parse, e.to_string()))
}

fn json_error(e: serde_json::Error) -> Fail {
    Fail(BsStatus::Runtime, e.to_string())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn bs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses model source text into a new handle. Syntax errors give
/// `BS_STATUS_PARSE`; the handle is not validated.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bs_model_parse(text: *const c_char, out: *mut *mut BsModel) -> BsStatus {
    guard(|| {
        let text = req_str(text, "text")?;
        let m = parse(text).map_err(|e| Fail(BsStatus::Parse, e.to_string()))?;
        put_model(out, m)
    })
}

/// Loads the bundled berth rehabilitation model.
///
/// # Safety
/// `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bs_model_load_reference(out: *mut *mut BsModel) -> BsStatus {
    guard(|| put_model(out, berth::load_reference_model()))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `m` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_model_free(m: *mut BsModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Writes the diagnostics as a JSON array to `*out`. Returns
/// `BS_STATUS_INVALID` when any diagnostic is an error; `*out` is set either
/// way.
///
/// # Safety
/// `m` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bs_model_validate(m: *const BsModel, out: *mut *mut c_char) -> BsStatus {
    guard(|| {
        let diags = validate(model(m)?);
        put_string(out, serde_json::to_string(&diags).map_err(json_error)?)?;
        match diags.iter().filter(|d| d.severity == Severity::Error).count() {
            0 => Ok(()),
            n => Err(Fail(BsStatus::Invalid, format!("{n} validation error(s)"))),
        }
    })
}

/// Writes the model in canonical source form to `*out`.
///
/// # Safety
/// `m` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bs_model_serialize(m: *const BsModel, out: *mut *mut c_char) -> BsStatus {
    guard(|| put_string(out, serialize(model(m)?)))
}

/// Replicates one scenario and writes the JSON report to `*out`.
///
/// `name` picks a scenario from `scenarios_text` (null name: the first).
/// With null `scenarios_text`, a name is looked up in the bundled ladders
/// and a null name runs the model as written. `reps` of 0 and a null `seed`
/// keep the scenario's own settings.
///
/// # Safety
/// String arguments are null or NUL-terminated; `seed` is null or readable;
/// `m` is a live handle; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn bs_replicate_json(
    m: *const BsModel,
    scenarios_text: *const c_char,
    name: *const c_char,
    reps: u32,
    seed: *const u64,
    out: *mut *mut c_char,
) -> BsStatus {
    guard(|| {
        let m = model(m)?;
        let all = match opt_str(scenarios_text)? {
            Some(text) => scenarios(text)?,
            None if name.is_null() => vec![ScenarioOverlay::new("base")],
            None => berth::disruption_ladder()
                .into_iter()
                .chain(berth::resource_ladder())
                .collect(),
        };
        let picked = match opt_str(name)? {
            Some(n) => all.into_iter().find(|o| o.name == n),
            None => all.into_iter().next(),
        };
        let mut overlay = picked.ok_or_else(|| Fail(BsStatus::Runtime, "scenario not found".into()))?;
        if reps > 0 {
            overlay.replications = Some(reps);
        }
        if let Some(&s) = seed.as_ref() {
            overlay.master_seed = Some(s);
        }
        let report = replicate(m, &overlay)?;
        put_string(out, render(&report, ReportFormat::Json))
    })
}

/// Runs every scenario of `ladder_text` as a cumulative ladder under one
/// seed and writes the JSON report to `*out`.
///
/// # Safety
/// As for `bs_replicate_json`.
#[no_mangle]
pub unsafe extern "C" fn bs_sweep_json(
    m: *const BsModel,
    ladder_text: *const c_char,
    reps: u32,
    seed: *const u64,
    out: *mut *mut c_char,
) -> BsStatus {
    guard(|| {
        let m = model(m)?;
        let ladder = scenarios(req_str(ladder_text, "ladder")?)?;
        let reps = (reps > 0).then_some(reps);
        let result = sweep(m, &ladder, reps, seed.as_ref().copied())?;
        put_string(out, render_sweep(&result, ReportFormat::Json))
    })
}

/// Frees a string returned through an `out` parameter. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
