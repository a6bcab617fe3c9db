//! C interface to the scalar solver, the point-mass oracle and the config runner.
//!
//! Every fallible call returns an [`MbeqStatus`]. The message of the most recent
//! failure on the calling thread is available from [`mbeq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mbeq::analytic::analytic_check;
use mbeq::cli::{self, Status};
use mbeq::config::RunConfig;
use mbeq::measure::ExternalField;
use mbeq::scalar::{solve_scalar_auto, ScalarOptions, ScalarSolution};
use mbeq::{Error, Theta};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MbeqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Contract = 3,
    Pole = 4,
    Numerical = 5,
    Parse = 6,
    Io = 7,
    NotConverged = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for MbeqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => MbeqStatus::InvalidArgument,
            Error::Contract(_) => MbeqStatus::Contract,
            Error::Pole(_) => MbeqStatus::Pole,
            Error::Numerical(_) => MbeqStatus::Numerical,
            Error::Parse(_) => MbeqStatus::Parse,
            Error::Io(_) => MbeqStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: MbeqStatus, msg: &str) -> MbeqStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> MbeqStatus) -> MbeqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(MbeqStatus::Panic, &msg)
        }
    }
}

fn from_error(e: Error) -> MbeqStatus {
    fail(MbeqStatus::from(&e), &e.to_string())
}

/// Message of the last failure on this thread; empty when none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbeq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mbeq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque scalar equilibrium solution.
pub struct MbeqScalar {
    sol: ScalarSolution,
}

/// Solves the scalar problem for `theta = q/r` and `V(x) = c x^p` on `cells` cells,
/// with the support end located automatically. On success `*out` owns a handle
/// to be released with [`mbeq_scalar_free`]. A solution that misses its KKT
/// tolerance is still returned, together with `NotConverged`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mbeq_solve_scalar(q: u32, r: u32, c: f64, p: f64, cells: usize, out: *mut *mut MbeqScalar) -> MbeqStatus {
    guard(|| {
        if out.is_null() {
            return fail(MbeqStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        if !(c > 0.0 && p > 0.0 && c.is_finite() && p.is_finite()) {
            return fail(MbeqStatus::InvalidArgument, "the field needs c > 0 and p > 0");
        }
        let theta = match Theta::new(q, r) {
            Ok(t) => t,
            Err(e) => return from_error(e),
        };
        let v = ExternalField::monomial(c, p);
        match solve_scalar_auto(theta, &v, cells, &ScalarOptions::default()) {
            Ok(sol) => {
                let converged = sol.converged;
                *out = Box::into_raw(Box::new(MbeqScalar { sol }));
                if converged {
                    MbeqStatus::Ok
                } else {
                    fail(MbeqStatus::NotConverged, "scalar minimization did not reach its KKT tolerance")
                }
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a handle from [`mbeq_solve_scalar`]. Null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_free(h: *mut MbeqScalar) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of cells; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_len(h: *const MbeqScalar) -> usize {
    h.as_ref().map_or(0, |h| h.sol.measure.len())
}

/// Lagrange constant; NaN for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_ell(h: *const MbeqScalar) -> f64 {
    h.as_ref().map_or(f64::NAN, |h| h.sol.ell)
}

/// Distribution function at `x`; NaN for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_cdf(h: *const MbeqScalar, x: f64) -> f64 {
    h.as_ref().map_or(f64::NAN, |h| h.sol.measure.cdf(x))
}

/// Right end of the last support interval; NaN for a null handle or empty support.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_support_end(h: *const MbeqScalar) -> f64 {
    h.as_ref().and_then(|h| h.sol.support.last().map(|s| s.1)).unwrap_or(f64::NAN)
}

/// KKT residuals on and off the support.
///
/// # Safety
/// `h` must be a live handle; the outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_residuals(h: *const MbeqScalar, on_support: *mut f64, off_support: *mut f64) -> MbeqStatus {
    let Some(h) = h.as_ref() else {
        return fail(MbeqStatus::NullPointer, "handle is null");
    };
    if let Some(o) = on_support.as_mut() {
        *o = h.sol.residual_on_support;
    }
    if let Some(o) = off_support.as_mut() {
        *o = h.sol.residual_off_support;
    }
    MbeqStatus::Ok
}

/// Copies cell nodes and masses into caller buffers of length `len`.
/// Either buffer may be null. Fails with `BufferTooSmall` when `len` is short.
///
/// # Safety
/// Non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mbeq_scalar_copy(h: *const MbeqScalar, nodes: *mut f64, masses: *mut f64, len: usize) -> MbeqStatus {
    let Some(h) = h.as_ref() else {
        return fail(MbeqStatus::NullPointer, "handle is null");
    };
    let m = &h.sol.measure;
    if len < m.len() {
        return fail(MbeqStatus::BufferTooSmall, &format!("need {} entries", m.len()));
    }
    if !nodes.is_null() {
        std::slice::from_raw_parts_mut(nodes, m.len()).copy_from_slice(m.grid().nodes());
    }
    if !masses.is_null() {
        std::slice::from_raw_parts_mut(masses, m.len()).copy_from_slice(m.masses());
    }
    MbeqStatus::Ok
}

/// Largest defects of the point-mass family identities.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MbeqAnalyticSummary {
    pub r: u32,
    pub a: f64,
    pub max_mass_defect: f64,
    pub max_balayage_defect: f64,
    pub max_closed_form_defect: f64,
    pub energy_defect: f64,
    pub residue_defect: f64,
    pub tail_exponent: f64,
    pub tail_exponent_expected: f64,
}

/// Checks the point-mass family of `(r, a)`.
///
/// # Safety
/// `out` must point to writable storage for one summary.
#[no_mangle]
pub unsafe extern "C" fn mbeq_analytic_check(r: u32, a: f64, out: *mut MbeqAnalyticSummary) -> MbeqStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(MbeqStatus::NullPointer, "out is null");
        };
        match analytic_check(r, a) {
            Ok(rep) => {
                *out = MbeqAnalyticSummary {
                    r: rep.r,
                    a: rep.a,
                    max_mass_defect: rep.max_mass_defect,
                    max_balayage_defect: rep.max_balayage_defect,
                    max_closed_form_defect: rep.max_closed_form_defect,
                    energy_defect: rep.energy_defect,
                    residue_defect: rep.residue_defect,
                    tail_exponent: rep.tail_exponent,
                    tail_exponent_expected: rep.tail_exponent_expected,
                };
                MbeqStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs a JSON run config and writes its artifacts into `out_dir`, exactly as
/// the command-line tool does.
///
/// # Safety
/// Both arguments must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn mbeq_run_config(config_json: *const c_char, out_dir: *const c_char) -> MbeqStatus {
    guard(|| {
        if config_json.is_null() || out_dir.is_null() {
            return fail(MbeqStatus::NullPointer, "null argument");
        }
        let (Ok(json), Ok(out)) = (CStr::from_ptr(config_json).to_str(), CStr::from_ptr(out_dir).to_str()) else {
            return fail(MbeqStatus::InvalidArgument, "arguments must be UTF-8");
        };
        let cfg = match RunConfig::from_json(json) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        match cli::run(&cfg, Path::new(out)) {
            Ok(Status::Ok) => MbeqStatus::Ok,
            Ok(Status::NotConverged(m)) => fail(MbeqStatus::NotConverged, &m),
            Err(e) => from_error(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_out_is_reported() {
        let s = unsafe { mbeq_solve_scalar(1, 1, 1.0, 1.0, 50, std::ptr::null_mut()) };
        assert_eq!(s, MbeqStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(mbeq_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "out is null");
    }

    #[test]
    fn status_follows_error_kind() {
        assert_eq!(MbeqStatus::from(&Error::Pole("x".into())), MbeqStatus::Pole);
        assert_eq!(MbeqStatus::from(&Error::Numerical("x".into())), MbeqStatus::Numerical);
    }

    #[test]
    fn version_is_terminated() {
        let v = unsafe { CStr::from_ptr(mbeq_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
