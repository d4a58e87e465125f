//! C ABI over the `soit2fnn` forecasting library.
//!
//! Every fallible function returns a [`Soit2fnnStatus`]. On failure a message
//! is stored per thread and can be read with [`soit2fnn_last_error`]. Models
//! are opaque handles created by a load function and released with
//! [`soit2fnn_model_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;
use soit2fnn::config::ExperimentConfig;
use soit2fnn::data::MackeyGlass;
use soit2fnn::experiment::run_experiment;
use soit2fnn::gradients::random_gradient_check;
use soit2fnn::{Error, Model};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Soit2fnnStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid configuration or argument.
    Config = 2,
    /// Training or evaluation produced non-finite values.
    Numeric = 3,
    /// File could not be read or written.
    Io = 4,
    /// Model file or CSV is malformed.
    Parse = 5,
    /// Buffer or input length does not match the model dimensions.
    Shape = 6,
    /// Argument is not valid UTF-8.
    Utf8 = 7,
    /// Internal panic caught at the boundary.
    Panic = 8,
}

/// Opaque trained model.
pub struct Soit2fnnModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> Soit2fnnStatus {
    match err {
        Error::NonFinite(_) => Soit2fnnStatus::Numeric,
        Error::Io { .. } => Soit2fnnStatus::Io,
        Error::ModelParse(_) | Error::ModelField { .. } | Error::Csv { .. } => Soit2fnnStatus::Parse,
        Error::Shape(_) | Error::InsufficientLength { .. } => Soit2fnnStatus::Shape,
        _ => Soit2fnnStatus::Config,
    }
}

fn fail(err: Error) -> Soit2fnnStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard(f: impl FnOnce() -> Soit2fnnStatus) -> Soit2fnnStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            Soit2fnnStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return Soit2fnnStatus::NullPointer;
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Soit2fnnStatus> {
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        Soit2fnnStatus::Utf8
    })
}

fn check_len(name: &str, got: usize, want: usize) -> Result<(), Soit2fnnStatus> {
    if got != want {
        set_error(format!("`{name}` has length {got}, expected {want}"));
        return Err(Soit2fnnStatus::Shape);
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn soit2fnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn soit2fnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a model file written by the library.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_load(path: *const c_char, out: *mut *mut Soit2fnnModel) -> Soit2fnnStatus {
    guard(|| {
        non_null!(path, out);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Model::load(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(Soit2fnnModel { inner }));
                Soit2fnnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parse a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_from_json(json: *const c_char, out: *mut *mut Soit2fnnModel) -> Soit2fnnStatus {
    guard(|| {
        non_null!(json, out);
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Model::from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(Soit2fnnModel { inner }));
                Soit2fnnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a model to `path`.
///
/// # Safety
/// `model` must come from a load function; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_save(model: *const Soit2fnnModel, path: *const c_char) -> Soit2fnnStatus {
    guard(|| {
        non_null!(model, path);
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match (*model).inner.save(path) {
            Ok(()) => Soit2fnnStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from a load function and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_free(model: *mut Soit2fnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of inputs `n`, rules `M` and outputs `K`.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_dims(
    model: *const Soit2fnnModel,
    n_inputs: *mut usize,
    n_rules: *mut usize,
    n_outputs: *mut usize,
) -> Soit2fnnStatus {
    guard(|| {
        non_null!(model, n_inputs, n_rules, n_outputs);
        let m = &(*model).inner;
        *n_inputs = m.n_inputs();
        *n_rules = m.n_rules();
        *n_outputs = m.n_outputs();
        Soit2fnnStatus::Ok
    })
}

/// Forecast from one raw (unnormalized) input row into `y`.
///
/// # Safety
/// `x` must hold `n` doubles and `y` must have room for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_predict(
    model: *const Soit2fnnModel,
    x: *const f64,
    n: usize,
    y: *mut f64,
    k: usize,
) -> Soit2fnnStatus {
    guard(|| {
        non_null!(model, x, y);
        let m = &(*model).inner;
        if let Err(s) = check_len("x", n, m.n_inputs()).and_then(|_| check_len("y", k, m.n_outputs())) {
            return s;
        }
        match m.predict_raw(std::slice::from_raw_parts(x, n)) {
            Ok(pred) => {
                std::slice::from_raw_parts_mut(y, k).copy_from_slice(&pred);
                Soit2fnnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Rule firing intervals (without the per-output layer) for one raw input
/// row. `lower` and `upper` receive `m` values each.
///
/// # Safety
/// `x` must hold `n` doubles; `lower` and `upper` must have room for `m`.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_model_firing(
    model: *const Soit2fnnModel,
    x: *const f64,
    n: usize,
    lower: *mut f64,
    upper: *mut f64,
    m: usize,
) -> Soit2fnnStatus {
    guard(|| {
        non_null!(model, x, lower, upper);
        let model = &(*model).inner;
        if let Err(s) = check_len("x", n, model.n_inputs()).and_then(|_| check_len("m", m, model.n_rules())) {
            return s;
        }
        match model.firing_raw(std::slice::from_raw_parts(x, n)) {
            Ok(rep) => {
                let lo = std::slice::from_raw_parts_mut(lower, m);
                let up = std::slice::from_raw_parts_mut(upper, m);
                for (i, f) in rep.rule.iter().enumerate() {
                    lo[i] = f.lower;
                    up[i] = f.upper;
                }
                Soit2fnnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Mackey-Glass series sampled at integer times `t_start .. t_start + len`.
///
/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_mackey_glass(
    tau: f64,
    x0: f64,
    step: f64,
    t_start: usize,
    len: usize,
    out: *mut f64,
) -> Soit2fnnStatus {
    guard(|| {
        non_null!(out);
        match (MackeyGlass { tau, x0, step }).generate(t_start, len) {
            Ok(series) => {
                let dst = std::slice::from_raw_parts_mut(out, len);
                for (d, (_, v)) in dst.iter_mut().zip(series) {
                    *d = v;
                }
                Soit2fnnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Analytic versus finite-difference gradients on `configs` random networks.
/// `passed` receives 1 or 0.
///
/// # Safety
/// The out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_grad_check(
    seed: u64,
    configs: usize,
    passed: *mut i32,
    max_rel_error: *mut f64,
) -> Soit2fnnStatus {
    guard(|| {
        non_null!(passed, max_rel_error);
        let r = random_gradient_check(seed, configs);
        *passed = r.passed() as i32;
        *max_rel_error = r.max_rel_error;
        Soit2fnnStatus::Ok
    })
}

/// Run the experiment described by a TOML config file. With `write_artifacts`
/// non-zero, models and reports go to the configured output directory.
/// `test_rmse` receives the average test RMSE and `n_rules` the rule count of
/// the first model.
///
/// # Safety
/// `config_path` must be NUL-terminated; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn soit2fnn_run_experiment(
    config_path: *const c_char,
    write_artifacts: i32,
    test_rmse: *mut f64,
    n_rules: *mut usize,
) -> Soit2fnnStatus {
    guard(|| {
        non_null!(config_path, test_rmse, n_rules);
        let path = match str_arg(config_path, "config_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let result = ExperimentConfig::load(path).and_then(|cfg| run_experiment(&cfg, write_artifacts != 0));
        match result {
            Ok(outcome) => {
                *test_rmse = outcome.report.test.avg_rmse;
                *n_rules = outcome.report.rules.first().copied().unwrap_or(0);
                Soit2fnnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
