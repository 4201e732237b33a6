//! C ABI over the `regen` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released by the matching `*_free`. Every fallible function
//! returns a [`RegenStatus`]; on failure a message is available from
//! [`regen_last_error_message`] on the same thread until the next failing
//! call. Panics are caught and reported as `REGEN_STATUS_PANIC`.
//!
//! Strings returned by the library must be released with
//! [`regen_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use regen::cli::{run_config, ExperimentConfig};
use regen::estimators::{ks_distance, EmpiricalDistribution};
use regen::process::{simulate_trajectory, RenewalTrajectory};
use regen::renewal_numerics::{renewal_function_arithmetic, renewal_function_for, RenewalTable};
use regen::{CycleModel, RegenError, StreamSeed};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    Validation = 4,
    Budget = 5,
    Precondition = 6,
    Hypothesis = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
}

/// A validated cycle model.
pub struct RegenModel {
    inner: CycleModel,
}

/// A simulated trajectory covering `[0, horizon]`.
pub struct RegenTrajectory {
    inner: RenewalTrajectory,
}

/// Renewal function values on a grid.
pub struct RegenRenewalTable {
    inner: RenewalTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RegenStatus, String);

impl From<RegenError> for Failure {
    fn from(e: RegenError) -> Self {
        let status = match &e {
            RegenError::Domain(_) => RegenStatus::Domain,
            RegenError::Validation(_) => RegenStatus::Validation,
            RegenError::Budget { .. } => RegenStatus::Budget,
            RegenError::Precondition(_) => RegenStatus::Precondition,
            RegenError::Hypothesis(_) => RegenStatus::Hypothesis,
            RegenError::Config(_) => RegenStatus::Config,
            RegenError::Io(_) => RegenStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RegenStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RegenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RegenStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside regen".into());
            RegenStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(RegenStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn regen_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => c"unknown",
    };
    V.as_ptr()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on this thread.
#[no_mangle]
pub extern "C" fn regen_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from a TOML table such as `kind = "poisson_count"\nrate = 2.0`.
///
/// # Safety
/// `toml` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_model_from_toml(toml: *const c_char, out: *mut *mut RegenModel) -> RegenStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        let inner = CycleModel::from_toml(text)?;
        *out = Box::into_raw(Box::new(RegenModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`regen_model_from_toml`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn regen_model_free(model: *mut RegenModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Declared `mu`, `a` and `sigma2` of the model.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_model_known_moments(
    model: *const RegenModel,
    mu: *mut f64,
    a: *mut f64,
    sigma2: *mut f64,
) -> RegenStatus {
    guard(|| {
        let m = handle(model, "model")?.inner.known_moments();
        *out_ref(mu, "mu")? = m.mu;
        *out_ref(a, "a")? = m.a;
        *out_ref(sigma2, "sigma2")? = m.sigma2;
        Ok(())
    })
}

/// Simulates cycles until `horizon` is covered, on stream `stream` of `seed`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_trajectory_simulate(
    model: *const RegenModel,
    horizon: f64,
    seed: u64,
    stream: u64,
    max_cycles: u64,
    out: *mut *mut RegenTrajectory,
) -> RegenStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let m = &handle(model, "model")?.inner;
        let mut rng = StreamSeed::new(seed).stream(stream);
        let inner = simulate_trajectory(m, horizon, &mut rng, max_cycles)?;
        *out = Box::into_raw(Box::new(RegenTrajectory { inner }));
        Ok(())
    })
}

/// # Safety
/// `traj` must come from [`regen_trajectory_simulate`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn regen_trajectory_free(traj: *mut RegenTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// `N(t)`, the number of epochs in `(0, t]`.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_trajectory_count(traj: *const RegenTrajectory, t: f64, out: *mut u64) -> RegenStatus {
    guard(|| {
        let n = handle(traj, "trajectory")?.inner.count_n(t)?;
        *out_ref(out, "out")? = n as u64;
        Ok(())
    })
}

/// `Z(t)`.
///
/// # Safety
/// `traj` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_trajectory_evaluate(traj: *const RegenTrajectory, t: f64, out: *mut f64) -> RegenStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(traj, "trajectory")?.inner.evaluate_z(t)?;
        Ok(())
    })
}

/// Exact renewal function for `P(xi = (k + 1) span) = pmf[k]`, on
/// `0, span, ..., m_max span`.
///
/// # Safety
/// `pmf` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_renewal_arithmetic(
    pmf: *const f64,
    len: usize,
    span: f64,
    m_max: usize,
    out: *mut *mut RegenRenewalTable,
) -> RegenStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if pmf.is_null() {
            return Err(null("pmf"));
        }
        let pmf = std::slice::from_raw_parts(pmf, len);
        let inner = renewal_function_arithmetic(pmf, span, m_max)?;
        *out = Box::into_raw(Box::new(RegenRenewalTable { inner }));
        Ok(())
    })
}

/// Renewal function of the model's duration law on `[0, t_max]`: exact
/// for arithmetic models, discretized with step `h` otherwise.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_renewal_for_model(
    model: *const RegenModel,
    h: f64,
    t_max: f64,
    out: *mut *mut RegenRenewalTable,
) -> RegenStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let inner = renewal_function_for(&handle(model, "model")?.inner, h, t_max)?;
        *out = Box::into_raw(Box::new(RegenRenewalTable { inner }));
        Ok(())
    })
}

/// Number of grid points in the table.
///
/// # Safety
/// `table` must be a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn regen_renewal_table_len(table: *const RegenRenewalTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.values().len())
}

/// `U(t)` read from the table.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_renewal_table_value(
    table: *const RegenRenewalTable,
    t: f64,
    out: *mut f64,
) -> RegenStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(table, "table")?.inner.value_at(t)?;
        Ok(())
    })
}

/// # Safety
/// `table` must come from a `regen_renewal_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn regen_renewal_table_free(table: *mut RegenRenewalTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Kolmogorov distance of `n` samples to `N(0, variance)` (point mass at 0
/// when `variance == 0`).
///
/// # Safety
/// `samples` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn regen_ks_distance(
    samples: *const f64,
    n: usize,
    variance: f64,
    out: *mut f64,
) -> RegenStatus {
    guard(|| {
        if samples.is_null() {
            return Err(null("samples"));
        }
        let emp = EmpiricalDistribution::new(std::slice::from_raw_parts(samples, n).to_vec())?;
        *out_ref(out, "out")? = ks_distance(&emp, variance)?;
        Ok(())
    })
}

/// Runs an experiment config (TOML text) with `seed` and returns the JSON
/// report in `json_out` and 0 (all pass) or 1 (any fail) in `exit_code`.
///
/// # Safety
/// `config` must be a valid NUL-terminated string; out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn regen_run_config(
    config: *const c_char,
    seed: u64,
    exit_code: *mut i32,
    json_out: *mut *mut c_char,
) -> RegenStatus {
    guard(|| {
        let json_out = out_ref(json_out, "json_out")?;
        *json_out = ptr::null_mut();
        let code = out_ref(exit_code, "exit_code")?;
        let cfg = ExperimentConfig::parse(read_str(config, "config")?)?;
        let report = run_config(&cfg, seed, false)?;
        let s = CString::new(report.to_json()).map_err(|e| Failure(RegenStatus::Io, e.to_string()))?;
        *code = report.exit_code() as i32;
        *json_out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn regen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
