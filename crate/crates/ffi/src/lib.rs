//! C interface to the `jbcp` solvers.
//!
//! Instances and outcomes are opaque handles created by `jbcp_*_new`/`jbcp_solve`
//! and released with the matching `*_free`. Fallible calls return a
//! [`JbcpStatus`]; on failure the message is available from
//! [`jbcp_last_error`] on the same thread until the next failing call.
//! Strings returned by the library must be released with [`jbcp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jbcp::bench::{run_method, MethodOutcome, RunStatus};
use jbcp::sdr::{build_inner_program, build_sdr_program};
use jbcp::{Error, Method, NetworkInstance, OptimizerSettings};

/// Error codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Json = 5,
    Infeasible = 6,
    NotConverged = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbcpMethod {
    Pega = 0,
    Piga = 1,
    Psga = 2,
    Sdr = 3,
}

impl From<JbcpMethod> for Method {
    fn from(m: JbcpMethod) -> Self {
        match m {
            JbcpMethod::Pega => Method::Pega,
            JbcpMethod::Piga => Method::Piga,
            JbcpMethod::Psga => Method::Psga,
            JbcpMethod::Sdr => Method::Sdr,
        }
    }
}

/// How a solve ended (distinct from the call's own [`JbcpStatus`]).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbcpRunStatus {
    Converged = 0,
    MaxIterations = 1,
    Infeasible = 2,
    Failed = 3,
}

impl From<RunStatus> for JbcpRunStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Ok => JbcpRunStatus::Converged,
            RunStatus::MaxIterations => JbcpRunStatus::MaxIterations,
            RunStatus::Infeasible => JbcpRunStatus::Infeasible,
            RunStatus::Failed => JbcpRunStatus::Failed,
        }
    }
}

/// Optimizer knobs; zero or negative fields select the library default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct JbcpSolveOptions {
    pub eps_out: f64,
    pub max_outer: usize,
    pub feasibility_tolerance: f64,
}

/// Opaque network instance.
pub struct JbcpInstance(NetworkInstance);

/// Opaque result of one solve.
pub struct JbcpOutcome(MethodOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: JbcpStatus, msg: impl Into<String>) -> JbcpStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> JbcpStatus {
    let status = match &e {
        Error::Io(_) => JbcpStatus::Io,
        Error::Json(_) => JbcpStatus::Json,
        Error::InstanceInfeasible => JbcpStatus::Infeasible,
        Error::NotConverged(_) | Error::LineSearchFailed { .. } => JbcpStatus::NotConverged,
        _ => JbcpStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> JbcpStatus) -> JbcpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(JbcpStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, JbcpStatus> {
    if s.is_null() {
        return Err(fail(JbcpStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(JbcpStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failing call on this thread, or NULL. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jbcp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jbcp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn jbcp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an instance from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jbcp_instance_from_json(json: *const c_char, out: *mut *mut JbcpInstance) -> JbcpStatus {
    guard(|| {
        if out.is_null() {
            return fail(JbcpStatus::NullPointer, "null output handle");
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match NetworkInstance::from_json(text) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(JbcpInstance(inst)));
                JbcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads an instance JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jbcp_instance_load(path: *const c_char, out: *mut *mut JbcpInstance) -> JbcpStatus {
    guard(|| {
        if out.is_null() {
            return fail(JbcpStatus::NullPointer, "null output handle");
        }
        let path = match read_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match NetworkInstance::load(path) {
            Ok(inst) => {
                *out = Box::into_raw(Box::new(JbcpInstance(inst)));
                JbcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `inst` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jbcp_instance_free(inst: *mut JbcpInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of BSs, or 0 for NULL.
///
/// # Safety
/// `inst` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_instance_num_bs(inst: *const JbcpInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.num_bs())
}

/// Number of users, or 0 for NULL.
///
/// # Safety
/// `inst` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_instance_num_users(inst: *const JbcpInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.0.num_users())
}

/// Emits the relaxation's cone program as JSON, or the inner program when
/// `multipliers` (length `num_bs`) is non-NULL.
///
/// # Safety
/// `inst` must be live; `multipliers` NULL or `len` readable doubles; `out`
/// valid. Release the string with [`jbcp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn jbcp_dump_cone(
    inst: *const JbcpInstance,
    multipliers: *const f64,
    len: usize,
    out: *mut *mut c_char,
) -> JbcpStatus {
    guard(|| {
        let (Some(inst), false) = (inst.as_ref(), out.is_null()) else {
            return fail(JbcpStatus::NullPointer, "null instance or output");
        };
        let program = if multipliers.is_null() {
            build_sdr_program(&inst.0)
        } else {
            build_inner_program(&inst.0, std::slice::from_raw_parts(multipliers, len))
        };
        match program.and_then(|p| p.to_json()) {
            Ok(s) => {
                *out = into_c_string(s);
                JbcpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs one method. A solve that ends infeasible or at the iteration cap
/// still returns `Ok` with an outcome; inspect [`jbcp_outcome_status`].
///
/// # Safety
/// `inst` must be live; `options` NULL or valid; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn jbcp_solve(
    inst: *const JbcpInstance,
    method: JbcpMethod,
    options: *const JbcpSolveOptions,
    out: *mut *mut JbcpOutcome,
) -> JbcpStatus {
    guard(|| {
        let (Some(inst), false) = (inst.as_ref(), out.is_null()) else {
            return fail(JbcpStatus::NullPointer, "null instance or output");
        };
        let mut settings = OptimizerSettings::default();
        let mut tol = 1e-3;
        if let Some(o) = options.as_ref() {
            if o.eps_out > 0.0 {
                settings.eps_out = o.eps_out;
            }
            if o.max_outer > 0 {
                settings.max_outer = o.max_outer;
            }
            if o.feasibility_tolerance > 0.0 {
                tol = o.feasibility_tolerance;
            }
        }
        if let Err(e) = settings.validate() {
            return from_error(e);
        }
        let outcome = run_method(&inst.0, method.into(), &settings, tol);
        *out = Box::into_raw(Box::new(JbcpOutcome(outcome)));
        JbcpStatus::Ok
    })
}

/// # Safety
/// `o` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_free(o: *mut JbcpOutcome) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// # Safety
/// `o` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_status(o: *const JbcpOutcome) -> JbcpRunStatus {
    o.as_ref().map_or(JbcpRunStatus::Failed, |o| o.0.status.into())
}

/// Dual value for the ascents, relaxation optimum for `Sdr`; NaN on NULL or
/// failure.
///
/// # Safety
/// `o` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_objective(o: *const JbcpOutcome) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.0.objective)
}

/// Total power of the returned design.
///
/// # Safety
/// `o` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_design_power(o: *const JbcpOutcome) -> f64 {
    o.as_ref().map_or(f64::NAN, |o| o.0.design_power)
}

/// # Safety
/// `o` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_outer_iterations(o: *const JbcpOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.0.outer_iterations)
}

/// # Safety
/// `o` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_inner_iterations(o: *const JbcpOutcome) -> usize {
    o.as_ref().map_or(0, |o| o.0.inner_iterations)
}

/// Whether the extracted beamformers meet every constraint and all
/// covariances are rank one.
///
/// # Safety
/// `o` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_feasible(o: *const JbcpOutcome) -> bool {
    o.as_ref().is_some_and(|o| o.0.feasible)
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> JbcpStatus {
    if len.is_null() {
        return fail(JbcpStatus::NullPointer, "null length pointer");
    }
    *len = src.len();
    if buf.is_null() || cap < src.len() {
        return fail(
            JbcpStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    JbcpStatus::Ok
}

/// Copies the final multipliers (empty for `Sdr`) into `buf`. `*len`
/// always receives the required count; pass `buf = NULL` to query it.
///
/// # Safety
/// `o` live; `buf` NULL or `cap` writable doubles; `len` valid.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_multipliers(
    o: *const JbcpOutcome,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> JbcpStatus {
    guard(|| match o.as_ref() {
        Some(o) => copy_out(o.0.multipliers.as_deref().unwrap_or(&[]), buf, cap, len),
        None => fail(JbcpStatus::NullPointer, "null outcome"),
    })
}

/// Copies the per-BS transmit power of the design into `buf`; same
/// conventions as [`jbcp_outcome_multipliers`].
///
/// # Safety
/// `o` live; `buf` NULL or `cap` writable doubles; `len` valid.
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_antenna_power(
    o: *const JbcpOutcome,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> JbcpStatus {
    guard(|| match o.as_ref() {
        Some(o) => copy_out(&o.0.antenna_power, buf, cap, len),
        None => fail(JbcpStatus::NullPointer, "null outcome"),
    })
}

/// The full outcome as JSON (same form the CLI prints).
///
/// # Safety
/// `o` live; `out` valid. Release with [`jbcp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn jbcp_outcome_to_json(o: *const JbcpOutcome, out: *mut *mut c_char) -> JbcpStatus {
    guard(|| {
        let (Some(o), false) = (o.as_ref(), out.is_null()) else {
            return fail(JbcpStatus::NullPointer, "null outcome or output");
        };
        match serde_json::to_string(&o.0) {
            Ok(s) => {
                *out = into_c_string(s);
                JbcpStatus::Ok
            }
            Err(e) => fail(JbcpStatus::Json, e.to_string()),
        }
    })
}
