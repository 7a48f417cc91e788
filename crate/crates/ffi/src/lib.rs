//! C interface to the `ppfe` library.
//!
//! Every function returns a [`PpfeStatus`]; on failure the thread's last error
//! message is available through [`ppfe_last_error`]. Scenarios and run results
//! are opaque handles released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use ppfe::analysis::mahler_entropy;
use ppfe::channel::total_capacity;
use ppfe::codec::quantize;
use ppfe::harness::{run_monte_carlo, RunResult, Scenario};
use ppfe::rng::{substream, Role};
use ppfe::scenario::{preset, ScenarioFile};
use ppfe::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpfeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Overflow = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
    /// The requested data does not exist, e.g. no bound was computed.
    Unavailable = 8,
}

/// Opaque scenario handle.
pub struct PpfeScenario(Scenario);

/// Opaque Monte Carlo result handle.
pub struct PpfeRunResult(RunResult);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> PpfeStatus {
    match err {
        Error::Dimension { .. } | Error::InvalidParameter { .. } => PpfeStatus::InvalidArgument,
        Error::Config(_) => PpfeStatus::Config,
        Error::NotPsd { .. } | Error::NotPd { .. } | Error::IllConditioned { .. } | Error::Singular(_) => PpfeStatus::Numerical,
        Error::ExponentOverflow { .. } => PpfeStatus::Overflow,
        Error::Io(_) => PpfeStatus::Io,
    }
}

fn fail(status: PpfeStatus, msg: impl Into<String>) -> PpfeStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PpfeStatus>) -> PpfeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PpfeStatus::Ok,
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PpfeStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

fn lib(err: Error) -> PpfeStatus {
    fail(status_of(&err), err.to_string())
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), PpfeStatus> {
    if p.is_null() {
        Err(fail(PpfeStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, PpfeStatus> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| fail(PpfeStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], PpfeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn scenario_ref<'a>(h: *const PpfeScenario) -> Result<&'a PpfeScenario, PpfeStatus> {
    non_null(h, "scenario")?;
    Ok(&*h)
}

unsafe fn scenario_mut<'a>(h: *mut PpfeScenario) -> Result<&'a mut PpfeScenario, PpfeStatus> {
    non_null(h, "scenario")?;
    Ok(&mut *h)
}

unsafe fn result_ref<'a>(h: *const PpfeRunResult) -> Result<&'a PpfeRunResult, PpfeStatus> {
    non_null(h, "result")?;
    Ok(&*h)
}

/// Copies `src` into `dst[..capacity]`; `written` receives the full length.
unsafe fn copy_out(src: &[f64], dst: *mut f64, capacity: usize, written: *mut usize) -> Result<(), PpfeStatus> {
    if !written.is_null() {
        *written = src.len();
    }
    if capacity < src.len() {
        return Err(fail(PpfeStatus::InvalidArgument, format!("buffer holds {capacity} values, {} needed", src.len())));
    }
    if !src.is_empty() {
        non_null(dst, "out")?;
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ppfe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ppfe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a named preset scenario.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_from_preset(name: *const c_char, out: *mut *mut PpfeScenario) -> PpfeStatus {
    guard(|| {
        non_null(out, "out")?;
        let name = read_str(name, "name")?;
        let s = preset(name).map_err(lib)?;
        *out = Box::into_raw(Box::new(PpfeScenario(s)));
        Ok(())
    })
}

/// Builds a scenario from TOML text in the scenario-file format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_from_toml(text: *const c_char, out: *mut *mut PpfeScenario) -> PpfeStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(text, "text")?;
        let s = ScenarioFile::parse(text).and_then(|f| f.build()).map_err(lib)?;
        *out = Box::into_raw(Box::new(PpfeScenario(s)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from a `ppfe_scenario_from_*` call and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_free(scenario: *mut PpfeScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_set_seed(scenario: *mut PpfeScenario, seed: u64) -> PpfeStatus {
    guard(|| {
        scenario_mut(scenario)?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_set_trials(scenario: *mut PpfeScenario, trials: usize) -> PpfeStatus {
    guard(|| {
        if trials == 0 {
            return Err(fail(PpfeStatus::InvalidArgument, "trials must be at least 1"));
        }
        scenario_mut(scenario)?.0.trials = trials;
        Ok(())
    })
}

/// Changes the horizon. Fails for scenarios with a fixed outcome trace.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_set_horizon(scenario: *mut PpfeScenario, horizon: usize) -> PpfeStatus {
    guard(|| {
        if horizon == 0 {
            return Err(fail(PpfeStatus::InvalidArgument, "horizon must be at least 1"));
        }
        let s = &mut scenario_mut(scenario)?.0;
        if s.outcome_override.is_some() {
            return Err(fail(PpfeStatus::InvalidArgument, "scenario has a fixed outcome trace; its horizon cannot change"));
        }
        s.horizon = horizon;
        Ok(())
    })
}

/// Worker threads for Monte Carlo runs; 0 uses one per core.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ppfe_scenario_set_workers(scenario: *mut PpfeScenario, workers: usize) -> PpfeStatus {
    guard(|| {
        scenario_mut(scenario)?.0.workers = workers;
        Ok(())
    })
}

/// Runs the Monte Carlo experiment.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppfe_run(scenario: *const PpfeScenario, out: *mut *mut PpfeRunResult) -> PpfeStatus {
    guard(|| {
        non_null(out, "out")?;
        let s = scenario_ref(scenario)?;
        let r = run_monte_carlo(&s.0).map_err(lib)?;
        *out = Box::into_raw(Box::new(PpfeRunResult(r)));
        Ok(())
    })
}

/// # Safety
/// `result` must come from [`ppfe_run`] and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ppfe_result_free(result: *mut PpfeRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of steps in each per-step series.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppfe_result_horizon(result: *const PpfeRunResult, out: *mut usize) -> PpfeStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = result_ref(result)?.0.horizon;
        Ok(())
    })
}

/// Copies the legitimate MSE series. `written`, when not null, receives the
/// series length even if `capacity` is too small.
///
/// # Safety
/// `result` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ppfe_result_mse_legit(result: *const PpfeRunResult, out: *mut f64, capacity: usize, written: *mut usize) -> PpfeStatus {
    guard(|| copy_out(&result_ref(result)?.0.mse_legit, out, capacity, written))
}

/// Copies the eavesdropper MSE series; saturated trials count as 1e30.
///
/// # Safety
/// As [`ppfe_result_mse_legit`].
#[no_mangle]
pub unsafe extern "C" fn ppfe_result_mse_eve(result: *const PpfeRunResult, out: *mut f64, capacity: usize, written: *mut usize) -> PpfeStatus {
    guard(|| copy_out(&result_ref(result)?.0.mse_eve, out, capacity, written))
}

/// Copies the trace of the empirical prediction-error covariance.
///
/// # Safety
/// As [`ppfe_result_mse_legit`].
#[no_mangle]
pub unsafe extern "C" fn ppfe_result_trace_emp_cov(result: *const PpfeRunResult, out: *mut f64, capacity: usize, written: *mut usize) -> PpfeStatus {
    guard(|| copy_out(&result_ref(result)?.0.trace_emp_cov(), out, capacity, written))
}

/// Copies the trace of the covariance bound; `PPFE_STATUS_UNAVAILABLE` when
/// the scenario did not request it.
///
/// # Safety
/// As [`ppfe_result_mse_legit`].
#[no_mangle]
pub unsafe extern "C" fn ppfe_result_trace_bound(result: *const PpfeRunResult, out: *mut f64, capacity: usize, written: *mut usize) -> PpfeStatus {
    guard(|| match result_ref(result)?.0.trace_bound() {
        Some(b) => copy_out(&b, out, capacity, written),
        None => Err(fail(PpfeStatus::Unavailable, "no bound was computed for this run")),
    })
}

/// Sum of per-channel capacities `−ln(1 − γ̄ᵢ)/2`; infinite if any `γ̄ᵢ = 1`.
///
/// # Safety
/// `gamma` must hold `len` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ppfe_total_capacity(gamma: *const f64, len: usize, out: *mut f64) -> PpfeStatus {
    guard(|| {
        non_null(out, "out")?;
        let g = read_slice(gamma, len, "gamma")?;
        *out = total_capacity(g).map_err(lib)?;
        Ok(())
    })
}

/// Mahler measure and topological entropy of the row-major `n × n` matrix `a`.
///
/// # Safety
/// `a` must hold `n * n` doubles; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ppfe_mahler(a: *const f64, n: usize, mahler: *mut f64, entropy: *mut f64) -> PpfeStatus {
    guard(|| {
        non_null(mahler, "mahler")?;
        non_null(entropy, "entropy")?;
        if n == 0 {
            return Err(fail(PpfeStatus::InvalidArgument, "matrix dimension must be positive"));
        }
        let len = n.checked_mul(n).ok_or_else(|| fail(PpfeStatus::InvalidArgument, "matrix dimension too large"))?;
        let m = DMatrix::from_row_slice(n, n, read_slice(a, len, "a")?);
        let (mm, h) = mahler_entropy(&m).map_err(lib)?;
        *mahler = mm;
        *entropy = h;
        Ok(())
    })
}

/// Probabilistic quantization of `x` on the lattice `delta·ℤ`, written to
/// `out`. Draws come from the stream identified by `(seed, lane)`.
///
/// # Safety
/// `x` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ppfe_quantize(x: *const f64, len: usize, delta: f64, seed: u64, lane: u32, out: *mut f64) -> PpfeStatus {
    guard(|| {
        let xs = read_slice(x, len, "x")?;
        let mut rng = substream(seed, Role::Auxiliary, 0, lane);
        let q = quantize(&DVector::from_column_slice(xs), delta, &mut rng).map_err(lib)?;
        copy_out(q.value(delta).as_slice(), out, len, ptr::null_mut())
    })
}
