//! C ABI over the solver.
//!
//! Configurations and solutions are opaque heap handles created and released
//! through this interface. Every fallible call returns a [`TdhStatus`]; the
//! message of the most recent failure on the calling thread is available from
//! [`tdh_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdhelm::config::{parse_scalar, ConfigOverrides};
use tdhelm::driver::{solve_helmholtz, Solution};
use tdhelm::fourier::FineGrid;
use tdhelm::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    UnknownCase = 3,
    InvalidConfig = 4,
    InvalidHierarchy = 5,
    RunAborted = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// Run configuration handle.
pub struct TdhConfig {
    inner: ConfigOverrides,
}

/// Result of an adaptive run.
pub struct TdhSolution {
    solution: Solution,
    points: Vec<[f64; 2]>,
}

/// Scalar summary of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TdhReport {
    pub j_stop: u64,
    pub m: u64,
    pub dt: f64,
    pub t0: f64,
    pub t_stop: f64,
    pub n_dof_avg: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: TdhStatus, msg: impl Into<String>) -> TdhStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn from_error(e: Error) -> TdhStatus {
    let status = match &e {
        Error::UnknownCase(_) => TdhStatus::UnknownCase,
        Error::InvalidConfig(_) => TdhStatus::InvalidConfig,
        Error::InvalidHierarchy(_) | Error::InvalidMesh(_) => TdhStatus::InvalidHierarchy,
        Error::RunAborted { .. } => TdhStatus::RunAborted,
        Error::OutsideDomain(_) => TdhStatus::OutOfRange,
        _ => TdhStatus::Internal,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> TdhStatus) -> TdhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TdhStatus::Internal, "panic inside the solver"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, TdhStatus> {
    if s.is_null() {
        return Err(fail(TdhStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(TdhStatus::InvalidString, "string is not valid UTF-8"))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn tdh_status_string(status: TdhStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        TdhStatus::Ok => b"ok\0",
        TdhStatus::NullPointer => b"null pointer\0",
        TdhStatus::InvalidString => b"invalid string\0",
        TdhStatus::UnknownCase => b"unknown case\0",
        TdhStatus::InvalidConfig => b"invalid configuration\0",
        TdhStatus::InvalidHierarchy => b"invalid mesh hierarchy\0",
        TdhStatus::RunAborted => b"run aborted\0",
        TdhStatus::OutOfRange => b"out of range\0",
        TdhStatus::BufferTooSmall => b"buffer too small\0",
        TdhStatus::Internal => b"internal error\0",
    };
    s.as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tdh_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// New configuration for a named case with its defaults.
///
/// # Safety
/// `case_name` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_new(case_name: *const c_char, out: *mut *mut TdhConfig) -> TdhStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdhStatus::NullPointer, "null output pointer");
        }
        let case = match read_str(case_name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let inner = ConfigOverrides {
            case: Some(case.to_owned()),
            ..Default::default()
        };
        if let Err(e) = inner.resolve() {
            return from_error(e);
        }
        *out = Box::into_raw(Box::new(TdhConfig { inner }));
        TdhStatus::Ok
    })
}

/// Configuration from TOML text (same schema as the command line tool).
///
/// # Safety
/// `text` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_from_toml(text: *const c_char, out: *mut *mut TdhConfig) -> TdhStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdhStatus::NullPointer, "null output pointer");
        }
        let text = match read_str(text) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let inner = match ConfigOverrides::from_toml(text) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        if let Err(e) = inner.resolve() {
            return from_error(e);
        }
        *out = Box::into_raw(Box::new(TdhConfig { inner }));
        TdhStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_free(cfg: *mut TdhConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn edit(cfg: *mut TdhConfig, f: impl FnOnce(&mut ConfigOverrides)) -> TdhStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(TdhStatus::NullPointer, "null configuration");
        };
        let mut next = cfg.inner.clone();
        f(&mut next);
        match next.resolve() {
            Ok(_) => {
                cfg.inner = next;
                TdhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets ω. Defaults that depend on ω (levels, thresholds) follow unless set explicitly.
///
/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_set_omega(cfg: *mut TdhConfig, omega: f64) -> TdhStatus {
    edit(cfg, |c| c.omega = Some(omega))
}

/// Sets ω from text such as `"10pi"`.
///
/// # Safety
/// `cfg` must be a valid handle, `omega` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_set_omega_str(cfg: *mut TdhConfig, omega: *const c_char) -> TdhStatus {
    let s = match read_str(omega) {
        Ok(s) => s,
        Err(s) => return s,
    };
    match parse_scalar(s) {
        Ok(v) => tdh_config_set_omega(cfg, v),
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `cfg` must be a valid handle, `levels` point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_set_levels(cfg: *mut TdhConfig, levels: *const f64, len: usize) -> TdhStatus {
    if levels.is_null() {
        return fail(TdhStatus::NullPointer, "null levels");
    }
    let v = std::slice::from_raw_parts(levels, len).to_vec();
    edit(cfg, |c| c.levels = Some(v))
}

/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_set_degree(cfg: *mut TdhConfig, degree: u32) -> TdhStatus {
    edit(cfg, |c| c.degree = Some(degree as usize))
}

/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_set_thresholds(cfg: *mut TdhConfig, eta0: f64, eps0: f64) -> TdhStatus {
    edit(cfg, |c| {
        c.eta0 = Some(eta0);
        c.eps0 = Some(eps0);
    })
}

/// # Safety
/// `cfg` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tdh_config_set_cfl(cfg: *mut TdhConfig, cfl: f64) -> TdhStatus {
    edit(cfg, |c| c.cfl = Some(cfl))
}

/// Runs the adaptive solver.
///
/// # Safety
/// `cfg` must be a valid handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdh_solve(cfg: *const TdhConfig, out: *mut *mut TdhSolution) -> TdhStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(TdhStatus::NullPointer, "null argument");
        };
        let run = match cfg.inner.resolve() {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let spec = match run.problem() {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let solution = match solve_helmholtz(&spec, &run.solver()) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let points = FineGrid::new(solution.field.hier.clone(), solution.field.p, &spec).positions();
        *out = Box::into_raw(Box::new(TdhSolution { solution, points }));
        TdhStatus::Ok
    })
}

/// # Safety
/// `sol` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tdh_solution_free(sol: *mut TdhSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tdh_solution_report(sol: *const TdhSolution, out: *mut TdhReport) -> TdhStatus {
    let (Some(sol), Some(out)) = (sol.as_ref(), out.as_mut()) else {
        return fail(TdhStatus::NullPointer, "null argument");
    };
    let r = &sol.solution.report;
    *out = TdhReport {
        j_stop: r.j_stop as u64,
        m: r.m as u64,
        dt: r.dt,
        t0: r.t0,
        t_stop: r.t_stop,
        n_dof_avg: r.n_dof_avg,
    };
    TdhStatus::Ok
}

/// Number of fine-grid nodes carrying the transform; 0 for a null handle.
///
/// # Safety
/// `sol` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tdh_solution_len(sol: *const TdhSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.points.len())
}

/// Copies node coordinates and the complex field into caller buffers of length `len`.
/// Any of the four buffers may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tdh_solution_field(
    sol: *const TdhSolution,
    x: *mut f64,
    y: *mut f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> TdhStatus {
    let Some(sol) = sol.as_ref() else {
        return fail(TdhStatus::NullPointer, "null solution");
    };
    let n = sol.points.len();
    if len < n {
        return fail(TdhStatus::BufferTooSmall, format!("need {n} entries, got {len}"));
    }
    let vals = &sol.solution.field.values;
    for i in 0..n {
        if !x.is_null() {
            *x.add(i) = sol.points[i][0];
        }
        if !y.is_null() {
            *y.add(i) = sol.points[i][1];
        }
        if !re.is_null() {
            *re.add(i) = vals[i].re;
        }
        if !im.is_null() {
            *im.add(i) = vals[i].im;
        }
    }
    TdhStatus::Ok
}

/// Evaluates the transform at `(x, y)` (`y` ignored in 1D).
///
/// # Safety
/// `sol`, `re`, `im` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tdh_solution_evaluate(sol: *const TdhSolution, x: f64, y: f64, re: *mut f64, im: *mut f64) -> TdhStatus {
    let (Some(sol), false, false) = (sol.as_ref(), re.is_null(), im.is_null()) else {
        return fail(TdhStatus::NullPointer, "null argument");
    };
    let field = &sol.solution.field;
    let (lo, hi) = field.hier.domain_box();
    let dim = field.hier.dim();
    let p = [x, y];
    if (0..dim).any(|a| !(p[a] >= lo[a] && p[a] <= hi[a])) {
        return fail(TdhStatus::OutOfRange, format!("({x}, {y}) lies outside the domain"));
    }
    let v = field.evaluate(&p);
    *re = v.re;
    *im = v.im;
    TdhStatus::Ok
}
