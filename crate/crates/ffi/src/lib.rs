//! C ABI for the cyclic-esn library.
//!
//! Every fallible function returns a [`CesnStatus`]; on failure a message is
//! kept per thread and can be read with [`cesn_last_error_message`]. Models
//! are opaque handles created by [`cesn_model_new`] and released with
//! [`cesn_model_free`]. Buffers are caller-owned.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use cyclic_esn::bayesopt::{optimize_scr, BoConfig};
use cyclic_esn::readout::predict_states;
use cyclic_esn::seriesgen::{gen_mackey_glass, gen_narma};
use cyclic_esn::{build_scr, cv_objective, fit_readout, nmse, run_reservoir, CvConfig, Error, Readout, ScrModel, ScrParams, Task};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CesnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Diverged = 3,
    DegenerateSeries = 4,
    Domain = 5,
    InsufficientCoverage = 6,
    SingularSystem = 7,
    Shape = 8,
    IllConditioned = 9,
    OptimizationFailed = 10,
    Config = 11,
    Io = 12,
    Parse = 13,
    Bounds = 14,
    NotFitted = 15,
    BufferTooSmall = 16,
    Panic = 99,
}

impl From<&Error> for CesnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => Self::InvalidParameter,
            Error::IntegrationDiverged { .. } | Error::DivergedRealization { .. } => Self::Diverged,
            Error::DegenerateSeries(_) => Self::DegenerateSeries,
            Error::Bounds(_) => Self::Bounds,
            Error::Domain(_) => Self::Domain,
            Error::InsufficientCoverage { .. } => Self::InsufficientCoverage,
            Error::SingularSystem(_) => Self::SingularSystem,
            Error::Shape { .. } => Self::Shape,
            Error::IllConditioned(_) => Self::IllConditioned,
            Error::OptimizationFailed(_) => Self::OptimizationFailed,
            Error::Config(_) => Self::Config,
            Error::Csv(e) if e.is_io_error() => Self::Io,
            Error::Parse(_) | Error::Csv(_) => Self::Parse,
            Error::Io(_) => Self::Io,
        }
    }
}

/// SCR hyperparameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CesnParams {
    pub n_nodes: usize,
    pub w_in: f64,
    pub w: f64,
    pub lambda: f64,
}

impl From<ScrParams> for CesnParams {
    fn from(p: ScrParams) -> Self {
        Self {
            n_nodes: p.n_nodes,
            w_in: p.w_in,
            w: p.w,
            lambda: p.lambda,
        }
    }
}

/// Opaque reservoir with an optional fitted readout.
pub struct CesnModel {
    model: ScrModel,
    readout: Option<Readout>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CesnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(CesnStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CesnStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CesnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CesnStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CesnStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn read_params(p: *const CesnParams) -> Result<ScrParams, Failure> {
    let p = p.as_ref().ok_or_else(|| null("params"))?;
    Ok(ScrParams::new(p.n_nodes, p.w_in, p.w, p.lambda)?)
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn cesn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a reservoir. `*out` receives a handle to release with
/// `cesn_model_free`.
///
/// # Safety
/// `params` must point to a valid `CesnParams`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cesn_model_new(params: *const CesnParams, out: *mut *mut CesnModel) -> CesnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = build_scr(read_params(params)?)?;
        out.write(Box::into_raw(Box::new(CesnModel { model, readout: None })));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `cesn_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cesn_model_free(model: *mut CesnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fits the readout on steps `washout..len`, running the reservoir from the
/// zero state.
///
/// # Safety
/// `inputs` and `targets` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cesn_model_fit(
    model: *mut CesnModel,
    inputs: *const f64,
    targets: *const f64,
    len: usize,
    washout: usize,
) -> CesnStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let u = input(inputs, len, "inputs")?;
        let y = input(targets, len, "targets")?;
        if washout >= len {
            return Err(Failure(
                CesnStatus::InvalidParameter,
                format!("washout {washout} leaves no training steps out of {len}"),
            ));
        }
        let states = run_reservoir(&m.model, u, None)?.slice(washout..len)?;
        m.readout = Some(fit_readout(&states, &y[washout..], m.model.params().lambda, None)?);
        Ok(())
    })
}

/// Writes `len` predictions for `inputs`, running from the zero state.
///
/// # Safety
/// `inputs` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cesn_model_predict(
    model: *const CesnModel,
    inputs: *const f64,
    len: usize,
    out: *mut f64,
) -> CesnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let readout = m
            .readout
            .as_ref()
            .ok_or_else(|| Failure(CesnStatus::NotFitted, "model has no fitted readout".into()))?;
        let u = input(inputs, len, "inputs")?;
        let dst = output(out, len, "out")?;
        let preds = predict_states(&run_reservoir(&m.model, u, None)?, readout)?;
        dst.copy_from_slice(&preds);
        Ok(())
    })
}

/// Copies the readout weights (bias first, `n_nodes + 1` values) into `out`.
/// `*written` receives the number of weights, also when `capacity` is too
/// small.
///
/// # Safety
/// `out` must hold `capacity` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cesn_model_readout(
    model: *const CesnModel,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> CesnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let readout = m
            .readout
            .as_ref()
            .ok_or_else(|| Failure(CesnStatus::NotFitted, "model has no fitted readout".into()))?;
        let w = readout.weights();
        write(written, w.len(), "written")?;
        if capacity < w.len() {
            return Err(Failure(
                CesnStatus::BufferTooSmall,
                format!("need {} doubles, got {capacity}", w.len()),
            ));
        }
        output(out, w.len(), "out")?.copy_from_slice(w);
        Ok(())
    })
}

/// K-fold cross-validated squared error of `params` on one task.
///
/// # Safety
/// `inputs` and `targets` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cesn_cv_objective(
    params: *const CesnParams,
    inputs: *const f64,
    targets: *const f64,
    len: usize,
    k_folds: usize,
    washout: usize,
    out: *mut f64,
) -> CesnStatus {
    guard(|| {
        let p = read_params(params)?;
        let task = Task::new(input(inputs, len, "inputs")?.to_vec(), input(targets, len, "targets")?.to_vec())?;
        let v = cv_objective(&p, &task, &CvConfig::new(k_folds, washout)?)?;
        write(out, v, "out")
    })
}

/// Normalised mean squared error.
///
/// # Safety
/// `targets` and `predictions` must hold `len` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cesn_nmse(targets: *const f64, predictions: *const f64, len: usize, out: *mut f64) -> CesnStatus {
    guard(|| {
        let v = nmse(input(targets, len, "targets")?, input(predictions, len, "predictions")?)?;
        write(out, v, "out")
    })
}

/// Mackey-Glass series of `n` unit-spaced samples.
///
/// # Safety
/// `out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cesn_gen_mackey_glass(tau: f64, n: usize, noise: f64, seed: u64, out: *mut f64) -> CesnStatus {
    guard(|| {
        let s = gen_mackey_glass(tau, n, noise, seed)?;
        output(out, n, "out")?.copy_from_slice(s.values());
        Ok(())
    })
}

/// NARMA inputs and targets of length `n`.
///
/// # Safety
/// `inputs_out` and `targets_out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn cesn_gen_narma(
    order: usize,
    n: usize,
    seed: u64,
    inputs_out: *mut f64,
    targets_out: *mut f64,
) -> CesnStatus {
    guard(|| {
        let (s, y) = gen_narma(order, n, seed)?;
        output(inputs_out, n, "inputs_out")?.copy_from_slice(s.values());
        output(targets_out, n, "targets_out")?.copy_from_slice(y.values());
        Ok(())
    })
}

/// Bayesian optimisation of SCR hyperparameters on one task, with LCB
/// kappa 2 and convergence radius 1e-3. `target` stops early once reached;
/// pass NaN to disable.
///
/// # Safety
/// `inputs` and `targets` must hold `len` doubles; the output pointers must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn cesn_optimize(
    inputs: *const f64,
    targets: *const f64,
    len: usize,
    k_folds: usize,
    washout: usize,
    n_init: usize,
    max_evals: usize,
    target: f64,
    seed: u64,
    best_out: *mut CesnParams,
    best_value_out: *mut f64,
    evals_out: *mut usize,
) -> CesnStatus {
    guard(|| {
        if best_out.is_null() || best_value_out.is_null() || evals_out.is_null() {
            return Err(null("output pointer"));
        }
        let task = Task::new(input(inputs, len, "inputs")?.to_vec(), input(targets, len, "targets")?.to_vec())?;
        let config = BoConfig {
            n_init,
            max_evals,
            seed,
            target_value: (!target.is_nan()).then_some(target),
            ..BoConfig::default()
        };
        let (best, result) = optimize_scr(&task, &CvConfig::new(k_folds, washout)?, &config)?;
        write(best_out, CesnParams::from(best), "best_out")?;
        write(best_value_out, result.best_value, "best_value_out")?;
        write(evals_out, result.evals(), "evals_out")
    })
}

