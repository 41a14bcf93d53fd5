//! C interface to the dispatch solver.
//!
//! Problems and reports are opaque handles owned by the caller and released with
//! the matching `_free` function. Every fallible call returns an [`EldpStatus`];
//! on failure [`eldp_last_error`] describes the cause. Panics never cross the
//! boundary and are reported as `ELDP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use eldp::adaptive::{DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS};
use eldp::cli::{run, MethodSpec, RunConfig, RunOutcome};
use eldp::model::{bundled, load_problem, total_cost, DispatchProblem, DispatchVector};
use eldp::solver::{export_lp_to_path, SolverConfig, DEFAULT_GAP_TOL, DEFAULT_NODE_CAP};
use eldp::surrogate::TangentConfig;
use eldp::EldpError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EldpStatus {
    Ok = 0,
    /// The solve finished but its gap is not certified; the report is still returned.
    NotCertified = 1,
    NullPointer = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    InvalidProblem = 5,
    Infeasible = 6,
    InvalidArgument = 7,
    TooLarge = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EldpMethod {
    Simple = 0,
    Tangent = 1,
    Adaptive = 2,
}

/// Solver options. Fill with `eldp_options_default` before changing fields.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EldpOptions {
    pub method: EldpMethod,
    /// Tangent angles in radians; used by the tangent method only.
    pub theta1: f64,
    pub theta2: f64,
    /// Target gap of the adaptive method, $/h.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Absolute gap of each surrogate solve, $/h.
    pub gap_tol: f64,
    pub node_cap: usize,
    /// Nonzero enables the worker pool.
    pub parallel: c_int,
    /// Worker count in parallel mode; 0 picks the default.
    pub threads: usize,
}

/// Opaque dispatch problem.
pub struct EldpProblem(DispatchProblem);

/// Opaque solve result.
pub struct EldpReport(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &EldpError) -> EldpStatus {
    match err {
        EldpError::Parse { .. } => EldpStatus::Parse,
        EldpError::InvalidGenerator { .. } | EldpError::InvalidProblem(_) | EldpError::LengthMismatch { .. } => {
            EldpStatus::InvalidProblem
        }
        EldpError::Infeasible(_) => EldpStatus::Infeasible,
        EldpError::InvalidSurrogate(_) | EldpError::InvalidArgument(_) => EldpStatus::InvalidArgument,
        EldpError::TooLarge(_) => EldpStatus::TooLarge,
        EldpError::Io(_) => EldpStatus::Io,
    }
}

/// Runs `f`, recording any error or panic message for `eldp_last_error`.
fn guard(f: impl FnOnce() -> Result<EldpStatus, (EldpStatus, String)>) -> EldpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            EldpStatus::Panic
        }
    }
}

fn fail(err: EldpError) -> (EldpStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (EldpStatus, String) {
    (EldpStatus::NullPointer, format!("{what} is NULL"))
}

/// # Safety
/// `s` must be NULL or a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (EldpStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| (EldpStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eldp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Writes the default options to `out`.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `EldpOptions`.
#[no_mangle]
pub unsafe extern "C" fn eldp_options_default(out: *mut EldpOptions) {
    if out.is_null() {
        return;
    }
    let t = TangentConfig::default();
    out.write(EldpOptions {
        method: EldpMethod::Simple,
        theta1: t.theta1,
        theta2: t.theta2,
        epsilon: DEFAULT_EPSILON,
        max_iterations: DEFAULT_MAX_ITERATIONS,
        gap_tol: DEFAULT_GAP_TOL,
        node_cap: DEFAULT_NODE_CAP,
        parallel: 0,
        threads: 0,
    });
}

fn store_problem(
    problem: eldp::Result<DispatchProblem>,
    out: *mut *mut EldpProblem,
) -> Result<EldpStatus, (EldpStatus, String)> {
    let problem = problem.map_err(fail)?;
    // SAFETY: callers checked `out` for NULL; the caller guarantees it is writable.
    unsafe { out.write(Box::into_raw(Box::new(EldpProblem(problem)))) };
    Ok(EldpStatus::Ok)
}

/// Parses a dataset in the text format (`demand D` then `a b c d e p_min p_max` rows).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn eldp_problem_from_text(text: *const c_char, out: *mut *mut EldpProblem) -> EldpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let text = read_str(text, "text")?;
        store_problem(load_problem(text), out)
    })
}

/// Loads a bundled case: `case1`, `case2a`, `case2b` or `case3`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn eldp_problem_bundled(name: *const c_char, out: *mut *mut EldpProblem) -> EldpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let name = read_str(name, "name")?;
        store_problem(bundled(name), out)
    })
}

/// Releases a problem. NULL is ignored.
///
/// # Safety
/// `problem` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eldp_problem_free(problem: *mut EldpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of generators, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_problem_num_generators(problem: *const EldpProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.len())
}

/// Demand in MW, or NaN for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_problem_demand(problem: *const EldpProblem) -> f64 {
    problem.as_ref().map_or(f64::NAN, |p| p.0.demand)
}

/// True cost of the dispatch `p[0..len]` in $/h.
///
/// # Safety
/// `problem` must be a live handle, `p` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eldp_problem_total_cost(
    problem: *const EldpProblem,
    p: *const f64,
    len: usize,
    out: *mut f64,
) -> EldpStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if p.is_null() || out.is_null() {
            return Err(null(if p.is_null() { "p" } else { "out" }));
        }
        let dispatch = DispatchVector(std::slice::from_raw_parts(p, len).to_vec());
        out.write(total_cost(&problem.0, &dispatch).map_err(fail)?);
        Ok(EldpStatus::Ok)
    })
}

fn method_spec(opts: &EldpOptions) -> eldp::Result<MethodSpec> {
    Ok(match opts.method {
        EldpMethod::Simple => MethodSpec::Simple,
        EldpMethod::Tangent => MethodSpec::Tangent(TangentConfig::new(opts.theta1, opts.theta2)?),
        EldpMethod::Adaptive => MethodSpec::Adaptive { epsilon: opts.epsilon, max_iterations: opts.max_iterations },
    })
}

/// # Safety
/// `options` must be NULL or point to a valid `EldpOptions`.
unsafe fn read_options(options: *const EldpOptions) -> EldpOptions {
    match options.as_ref() {
        Some(o) => *o,
        None => {
            let mut o = std::mem::MaybeUninit::uninit();
            eldp_options_default(o.as_mut_ptr());
            o.assume_init()
        }
    }
}

/// Solves `problem`. NULL `options` selects the defaults. On `ELDP_STATUS_OK` or
/// `ELDP_STATUS_NOT_CERTIFIED` a report is written to `out`; otherwise `*out` is NULL.
///
/// # Safety
/// `problem` must be a live handle, `options` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eldp_solve(
    problem: *const EldpProblem,
    options: *const EldpOptions,
    out: *mut *mut EldpReport,
) -> EldpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let opts = read_options(options);
        let solver = SolverConfig {
            gap_tol: opts.gap_tol,
            node_cap: opts.node_cap,
            parallel: opts.parallel != 0,
            threads: (opts.threads > 0).then_some(opts.threads),
            check_kkt: false,
        };
        let cfg = RunConfig { solver, ..RunConfig::new(problem.0.name.clone(), method_spec(&opts).map_err(fail)?) };
        let outcome = run(&problem.0, &cfg).map_err(fail)?;
        let status = if outcome.certified() { EldpStatus::Ok } else { EldpStatus::NotCertified };
        out.write(Box::into_raw(Box::new(EldpReport(outcome))));
        Ok(status)
    })
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_free(report: *mut EldpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Copies up to `len` outputs (MW) into `buf` and returns the generator count.
/// Call with `buf` NULL to query the size.
///
/// # Safety
/// `report` must be a live handle; `buf` NULL or writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_dispatch(report: *const EldpReport, buf: *mut f64, len: usize) -> usize {
    let Some(report) = report.as_ref() else { return 0 };
    let p = report.0.report.p.as_slice();
    if !buf.is_null() {
        let n = len.min(p.len());
        ptr::copy_nonoverlapping(p.as_ptr(), buf, n);
    }
    p.len()
}

/// True cost at the returned dispatch, $/h. NaN for NULL.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_total_cost(report: *const EldpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.report.true_cost)
}

/// Surrogate value at the returned dispatch, $/h.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_surrogate_value(report: *const EldpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.report.surrogate_value)
}

/// Certified lower bound, $/h.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_certified_bound(report: *const EldpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.report.certified_bound)
}

/// Gap between the reported cost and the bound, $/h.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_absolute_gap(report: *const EldpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.report.absolute_gap)
}

/// Branch-and-bound nodes over all surrogate solves.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_nodes(report: *const EldpReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.report.nodes_explored)
}

/// Adaptive iterations; 0 for the fixed-surrogate methods.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_iterations(report: *const EldpReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.trace.as_ref().map_or(0, Vec::len))
}

/// 1 when the result is certified, else 0.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_certified(report: *const EldpReport) -> c_int {
    report.as_ref().map_or(0, |r| c_int::from(r.0.certified()))
}

/// Wall-clock seconds.
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eldp_report_wall_time(report: *const EldpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.report.wall_time)
}

/// Writes the LP-format model of the simple or tangent surrogate to `path`.
///
/// # Safety
/// `problem` must be a live handle, `options` NULL or valid, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn eldp_export_lp(
    problem: *const EldpProblem,
    options: *const EldpOptions,
    path: *const c_char,
) -> EldpStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        let path = read_str(path, "path")?;
        let opts = read_options(options);
        let pwls = method_spec(&opts).and_then(|m| m.pwls(problem.0.len())).map_err(fail)?;
        export_lp_to_path(&problem.0, &pwls, Path::new(path)).map_err(fail)?;
        Ok(EldpStatus::Ok)
    })
}
