//! C ABI for `colloc`.
//!
//! Problems and solutions are opaque heap handles created and released
//! through this API. Every fallible entry point returns a [`ColStatus`]; the
//! message of the most recent failure on the calling thread is available
//! from [`col_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use colloc::cli::Method;
use colloc::metrics::{
    configuration_derivative, integrate_errors, ErrorReport, DEFAULT_SAMPLES_PER_INTERVAL,
};
use colloc::model::OcpDefinition;
use colloc::problems::{by_name, Benchmark};
use colloc::schemes::{self, HsForm, MidpointRule, PolyTrajectory};
use colloc::solver::{solve, Solution, SolveOptions, SolveStatus};
use colloc::transcribe::{transcribe, Mesh, Nlp, Waypoint};
use colloc::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    UnknownMethod = 4,
    /// The solve finished without converging; the solution handle is still
    /// returned and must be freed.
    NotConverged = 5,
    Panic = 6,
}

/// Hermite-Simpson variant selector for [`col_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColHsForm {
    Separated = 0,
    Compressed = 1,
}

/// Dynamics callback: writes the `n_q` highest derivatives into `out` given
/// the level-major stack `(q, q', ..., q^(M-1))`, the controls and the time.
/// Null is rejected.
pub type ColDynamicsFn = Option<
    extern "C" fn(user_data: *mut c_void, state: *const f64, u: *const f64, t: f64, out: *mut f64),
>;

/// Opaque problem handle.
pub struct ColProblem {
    bench: Benchmark,
}

/// Opaque solution handle.
pub struct ColSolution {
    nlp: Nlp,
    solution: Solution,
    traj: PolyTrajectory,
    errors: ErrorReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ColStatus, msg: impl Into<String>) -> ColStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> ColStatus {
    let status = match e {
        Error::UnknownProblem(_) => ColStatus::UnknownProblem,
        Error::UnknownMethod(_) => ColStatus::UnknownMethod,
        _ => ColStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> ColStatus) -> ColStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ColStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ColStatus> {
    if p.is_null() {
        return Err(fail(ColStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ColStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], ColStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ColStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_slice(p: *mut f64, cap: usize, values: &[f64], what: &str) -> ColStatus {
    if cap < values.len() {
        return fail(
            ColStatus::InvalidArgument,
            format!("{what} holds {cap} values, {} needed", values.len()),
        );
    }
    if values.is_empty() {
        return ColStatus::Ok;
    }
    if p.is_null() {
        return fail(ColStatus::NullPointer, format!("{what} is null"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), p, values.len());
    ColStatus::Ok
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn col_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Trapezoidal step of order `order`: writes the stack at `t_k + h` into
/// `out` (`order` values) from the stack `y_k` and the samples `g_k`, `g_k1`.
///
/// # Safety
/// `y_k` and `out` must point to `order` valid doubles.
#[no_mangle]
pub unsafe extern "C" fn col_tz_step(
    order: usize,
    y_k: *const f64,
    g_k: f64,
    g_k1: f64,
    h: f64,
    out: *mut f64,
) -> ColStatus {
    guard(|| {
        let y = try_ffi!(read_slice(y_k, order, "y_k"));
        match schemes::tz_step(order, y, g_k, g_k1, h) {
            Ok(v) => write_slice(out, order, &v, "out"),
            Err(e) => from_error(e),
        }
    })
}

/// Hermite-Simpson step with the midpoint in eliminated form: writes the
/// stacks at `t_k + h` and `t_k + h/2` into `out_end` and `out_mid`.
///
/// # Safety
/// `y_k`, `y_k1`, `out_end` and `out_mid` must point to `order` valid doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn col_hs_step(
    order: usize,
    y_k: *const f64,
    y_k1: *const f64,
    g_k: f64,
    g_c: f64,
    g_k1: f64,
    h: f64,
    out_end: *mut f64,
    out_mid: *mut f64,
) -> ColStatus {
    guard(|| {
        let a = try_ffi!(read_slice(y_k, order, "y_k"));
        let b = try_ffi!(read_slice(y_k1, order, "y_k1"));
        match schemes::hs_step(order, a, b, g_k, g_c, g_k1, h, MidpointRule::Eliminated) {
            Ok(step) => match write_slice(out_end, order, &step.end, "out_end") {
                ColStatus::Ok => write_slice(out_mid, order, &step.mid, "out_mid"),
                s => s,
            },
            Err(e) => from_error(e),
        }
    })
}

/// Looks up a built-in problem (`cartpole`, `oscillator`, `triple_integrator`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn col_problem_by_name(name: *const c_char, out: *mut *mut ColProblem) -> ColStatus {
    guard(|| {
        if out.is_null() {
            return fail(ColStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let name = try_ffi!(read_str(name, "name"));
        match by_name(name) {
            Ok(bench) => {
                *out = Box::into_raw(Box::new(ColProblem { bench }));
                ColStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

struct Callback {
    f: extern "C" fn(*mut c_void, *const f64, *const f64, f64, *mut f64),
    user_data: *mut c_void,
}

impl Callback {
    fn call(&self, x: &[f64], u: &[f64], t: f64, out: &mut [f64]) {
        (self.f)(self.user_data, x.as_ptr(), u.as_ptr(), t, out.as_mut_ptr())
    }
}

// The caller promises the callback may be invoked from any thread.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

/// Builds a problem from a C dynamics callback: `q^(M) = g(...)` on
/// `[0, t_f]`, cost the integral of `|u|^2`, and the full stacks fixed to
/// `x0` at the start and `xf` at the end (`n_q * order` values each).
///
/// # Safety
/// `x0` and `xf` must point to `n_q * order` doubles. `dynamics` must stay
/// callable with `user_data` for the lifetime of the problem and of every
/// solution created from it.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn col_problem_custom(
    n_q: usize,
    n_u: usize,
    order: usize,
    t_f: f64,
    dynamics: ColDynamicsFn,
    user_data: *mut c_void,
    x0: *const f64,
    xf: *const f64,
    out: *mut *mut ColProblem,
) -> ColStatus {
    guard(|| {
        if out.is_null() {
            return fail(ColStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(f) = dynamics else {
            return fail(ColStatus::NullPointer, "dynamics is null");
        };
        let n_x = n_q.saturating_mul(order);
        let start = try_ffi!(read_slice(x0, n_x, "x0")).to_vec();
        let end = try_ffi!(read_slice(xf, n_x, "xf")).to_vec();
        let cb = Callback { f, user_data };
        let g = Arc::new(move |x: &[f64], u: &[f64], t: f64, o: &mut [f64]| cb.call(x, u, t, o));
        let (s0, s1) = (start.clone(), end.clone());
        let ocp = OcpDefinition::new("custom", n_q, n_u, order, t_f, g).map(|o| {
            o.with_running_cost(Arc::new(|_, u, _| u.iter().map(|v| v * v).sum()))
                .with_boundary_constraints(
                    2 * n_x,
                    Arc::new(move |a, b, _, r| {
                        for i in 0..s0.len() {
                            r[i] = a[i] - s0[i];
                            r[s0.len() + i] = b[i] - s1[i];
                        }
                    }),
                )
        });
        match ocp {
            Ok(ocp) => {
                let bench = Benchmark {
                    ocp,
                    guess: vec![Waypoint::new(0.0, start), Waypoint::new(t_f, end)],
                    optimal_cost: None,
                    exact: None,
                };
                *out = Box::into_raw(Box::new(ColProblem { bench }));
                ColStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Dynamics order `M` of the problem, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn col_problem_order(p: *const ColProblem) -> usize {
    p.as_ref().map_or(0, |p| p.bench.ocp.order())
}

/// Number of configuration coordinates, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn col_problem_n_q(p: *const ColProblem) -> usize {
    p.as_ref().map_or(0, |p| p.bench.ocp.n_q())
}

/// Number of controls, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn col_problem_n_u(p: *const ColProblem) -> usize {
    p.as_ref().map_or(0, |p| p.bench.ocp.n_u())
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn col_problem_free(p: *mut ColProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Transcribes `problem` with `method` (`tz1`, `tz2`, `tzm`, `hs1`, `hs2`,
/// `hsm`) on `n` intervals and solves it with default solver options.
///
/// Returns `Ok` on convergence and `NotConverged` otherwise; in both cases
/// `*out` receives a solution handle.
///
/// # Safety
/// `problem` must be a live handle, `method` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn col_solve(
    problem: *const ColProblem,
    method: *const c_char,
    hs_form: ColHsForm,
    n: usize,
    out: *mut *mut ColSolution,
) -> ColStatus {
    guard(|| {
        if out.is_null() {
            return fail(ColStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(p) = problem.as_ref() else {
            return fail(ColStatus::NullPointer, "problem is null");
        };
        let method = try_ffi!(read_str(method, "method"));
        let method = match Method::parse(method) {
            Ok(m) => m,
            Err(e) => return from_error(e),
        };
        let form = match hs_form {
            ColHsForm::Separated => HsForm::Separated,
            ColHsForm::Compressed => HsForm::Compressed,
        };
        let run = || -> colloc::Result<ColSolution> {
            let ocp = &p.bench.ocp;
            let nlp = transcribe(ocp, method.scheme(ocp, form), Mesh::new(n, ocp.t_f())?)?;
            let guess = nlp.assemble_initial_guess(&p.bench.guess)?;
            let solution = solve(&nlp, &guess, &SolveOptions::default())?;
            let traj = nlp.trajectory(&solution.x)?;
            let errors = integrate_errors(&traj, nlp.ocp(), DEFAULT_SAMPLES_PER_INTERVAL)?;
            Ok(ColSolution {
                nlp,
                solution,
                traj,
                errors,
            })
        };
        match run() {
            Ok(s) => {
                let converged = s.solution.status == SolveStatus::Converged;
                let message = s.solution.message.clone();
                *out = Box::into_raw(Box::new(s));
                if converged {
                    ColStatus::Ok
                } else {
                    fail(ColStatus::NotConverged, message)
                }
            }
            Err(e) => from_error(e),
        }
    })
}

/// Objective value, or NaN for a null handle.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn col_solution_cost(s: *const ColSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.solution.cost)
}

/// Scaled KKT residual at the returned point, or NaN for a null handle.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn col_solution_kkt_residual(s: *const ColSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.solution.kkt_residual)
}

/// Whether the solver converged.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn col_solution_converged(s: *const ColSolution) -> bool {
    s.as_ref().is_some_and(|s| s.solution.status == SolveStatus::Converged)
}

/// Number of NLP decision variables, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn col_solution_n_vars(s: *const ColSolution) -> usize {
    s.as_ref().map_or(0, |s| s.nlp.sizes().n_vars)
}

/// `r`-th time derivative (`r <= M`) of the configuration at `t`, written
/// into `out` (`n_q` values; `cap` is the buffer length).
///
/// # Safety
/// `s` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn col_solution_eval(
    s: *const ColSolution,
    t: f64,
    r: usize,
    out: *mut f64,
    cap: usize,
) -> ColStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(ColStatus::NullPointer, "solution is null");
        };
        match configuration_derivative(&s.traj, s.nlp.ocp(), t, r) {
            Ok(v) => write_slice(out, cap, &v, "out"),
            Err(e) => from_error(e),
        }
    })
}

/// Reconstructed control at `t` (`n_u` values).
///
/// # Safety
/// `s` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn col_solution_control(
    s: *const ColSolution,
    t: f64,
    out: *mut f64,
    cap: usize,
) -> ColStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(ColStatus::NullPointer, "solution is null");
        };
        match s.traj.eval_control(t) {
            Ok(v) => write_slice(out, cap, &v, "out"),
            Err(e) => from_error(e),
        }
    })
}

/// Integrated first-order dynamic error per coordinate (`n_q` values).
///
/// # Safety
/// `s` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn col_solution_e1(s: *const ColSolution, out: *mut f64, cap: usize) -> ColStatus {
    guard(|| match s.as_ref() {
        Some(s) => write_slice(out, cap, &s.errors.e1, "out"),
        None => fail(ColStatus::NullPointer, "solution is null"),
    })
}

/// Integrated second-order dynamic error per coordinate (`n_q` values).
///
/// # Safety
/// `s` must be a live handle and `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn col_solution_e2(s: *const ColSolution, out: *mut f64, cap: usize) -> ColStatus {
    guard(|| match s.as_ref() {
        Some(s) => write_slice(out, cap, &s.errors.e2, "out"),
        None => fail(ColStatus::NullPointer, "solution is null"),
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn col_solution_free(s: *mut ColSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
