//! C interface to the forecasting benchmark.
//!
//! Every fallible entry point returns an [`FtsStatus`]; on failure the
//! message is available from [`fts_last_error`] on the same thread. Fitted
//! models are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ftsbench::arima::{fit_arima, ArimaFit, ArimaOptions, ArimaOrder};
use ftsbench::bench::{execute, BenchConfig};
use ftsbench::garch::{fit_garch, forecast_garch, GarchFit};
use ftsbench::series::{compute_returns, rmse, PriceSeries, ReturnKind};
use ftsbench::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InsufficientData = 3,
    DimensionMismatch = 4,
    NonFinite = 5,
    DegenerateVariance = 6,
    NonStationary = 7,
    Optimizer = 8,
    Parse = 9,
    Io = 10,
    Json = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtsReturnKind {
    Simple = 0,
    Log = 1,
}

/// Opaque fitted ARIMA model.
pub struct FtsArimaFit(ArimaFit);

/// Opaque fitted GARCH(1,1) model.
pub struct FtsGarchFit(GarchFit);

/// GARCH(1,1) coefficients, copied out of a fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FtsGarchParams {
    pub mu: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> FtsStatus {
    match err {
        Error::InvalidInput(_) => FtsStatus::InvalidInput,
        Error::InsufficientData { .. } => FtsStatus::InsufficientData,
        Error::DimensionMismatch { .. } => FtsStatus::DimensionMismatch,
        Error::NonFinite(_) => FtsStatus::NonFinite,
        Error::DegenerateVariance(_) => FtsStatus::DegenerateVariance,
        Error::NonStationary(_) => FtsStatus::NonStationary,
        Error::Optimizer(_) => FtsStatus::Optimizer,
        Error::Parse { .. } => FtsStatus::Parse,
        Error::Io { .. } => FtsStatus::Io,
        Error::Json(_) => FtsStatus::Json,
    }
}

enum Failure {
    Status(FtsStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null_arg(name: &str) -> Failure {
    Failure::Status(FtsStatus::NullPointer, format!("{name} is null"))
}

/// Runs `f`, records any error or panic and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FtsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FtsStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FtsStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null only when `len` is zero, otherwise valid for `len` reads.
unsafe fn slice<'a>(ptr: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// As [`slice`], for writes.
unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

fn out_ptr<T>(ptr: *mut T, name: &str) -> Result<*mut T, Failure> {
    if ptr.is_null() {
        Err(null_arg(name))
    } else {
        Ok(ptr)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null after a
/// successful one. Valid until the next call into this library.
#[no_mangle]
pub extern "C" fn fts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Root mean squared error of two arrays of length `len`.
///
/// # Safety
/// `predicted` and `actual` must be valid for `len` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn fts_rmse(predicted: *const f64, actual: *const f64, len: usize, out: *mut f64) -> FtsStatus {
    guard(|| {
        let p = slice(predicted, len, "predicted")?;
        let a = slice(actual, len, "actual")?;
        let out = out_ptr(out, "out")?;
        *out = rmse(p, a)?;
        Ok(())
    })
}

/// Returns of `len` consecutive closes, written to `out` (`len - 1` values).
///
/// # Safety
/// `closes` must be valid for `len` reads and `out` for `len - 1` writes.
#[no_mangle]
pub unsafe extern "C" fn fts_compute_returns(
    closes: *const f64,
    len: usize,
    kind: FtsReturnKind,
    out: *mut f64,
) -> FtsStatus {
    guard(|| {
        let c = slice(closes, len, "closes")?;
        let start = chrono::NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let dates = (0..len as u64).map(|i| start + chrono::Days::new(i)).collect();
        let prices = PriceSeries::new(dates, c.to_vec())?;
        let kind = match kind {
            FtsReturnKind::Simple => ReturnKind::Simple,
            FtsReturnKind::Log => ReturnKind::Log,
        };
        let r = compute_returns(&prices, kind)?;
        slice_mut(out, r.len(), "out")?.copy_from_slice(r.values());
        Ok(())
    })
}

/// Fits ARIMA(p,d,q) to `series` by conditional sum of squares.
///
/// # Safety
/// `series` must be valid for `len` reads and `out` for one write. The
/// handle written to `out` must be released with [`fts_arima_free`].
#[no_mangle]
pub unsafe extern "C" fn fts_arima_fit(
    series: *const f64,
    len: usize,
    p: usize,
    d: usize,
    q: usize,
    out: *mut *mut FtsArimaFit,
) -> FtsStatus {
    guard(|| {
        let y = slice(series, len, "series")?;
        let out = out_ptr(out, "out")?;
        let fit = fit_arima(y, ArimaOrder::new(p, d, q), &ArimaOptions::default())?;
        *out = Box::into_raw(Box::new(FtsArimaFit(fit)));
        Ok(())
    })
}

/// Copies the intercept and coefficients. `phi` needs room for `p` values and
/// `theta` for `q`; MA terms follow the minus-sign convention.
///
/// # Safety
/// `fit` must be a live handle; the output pointers valid as described.
#[no_mangle]
pub unsafe extern "C" fn fts_arima_coefficients(
    fit: *const FtsArimaFit,
    c: *mut f64,
    phi: *mut f64,
    theta: *mut f64,
) -> FtsStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null_arg("fit"))?.0;
        *out_ptr(c, "c")? = fit.model.c;
        slice_mut(phi, fit.model.phi.len(), "phi")?.copy_from_slice(&fit.model.phi);
        slice_mut(theta, fit.model.theta.len(), "theta")?.copy_from_slice(&fit.model.theta);
        Ok(())
    })
}

/// Writes the log-likelihood, AIC and BIC of a fit. Any output may be null.
///
/// # Safety
/// `fit` must be a live handle; non-null outputs valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fts_arima_criteria(
    fit: *const FtsArimaFit,
    loglik: *mut f64,
    aic: *mut f64,
    bic: *mut f64,
) -> FtsStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null_arg("fit"))?.0;
        for (dst, v) in [(loglik, fit.loglik), (aic, fit.aic), (bic, fit.bic)] {
            if let Some(d) = dst.as_mut() {
                *d = v;
            }
        }
        Ok(())
    })
}

/// Forecasts `horizon` levels past the end of `history`.
///
/// # Safety
/// `fit` must be a live handle, `history` valid for `len` reads and `out`
/// for `horizon` writes.
#[no_mangle]
pub unsafe extern "C" fn fts_arima_forecast(
    fit: *const FtsArimaFit,
    history: *const f64,
    len: usize,
    horizon: usize,
    out: *mut f64,
) -> FtsStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null_arg("fit"))?.0;
        let h = slice(history, len, "history")?;
        let f = fit.forecast_multi_step(h, horizon)?;
        slice_mut(out, horizon, "out")?.copy_from_slice(&f);
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from [`fts_arima_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fts_arima_free(fit: *mut FtsArimaFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Maximum-likelihood GARCH(1,1) fit.
///
/// # Safety
/// `returns` must be valid for `len` reads and `out` for one write. The
/// handle must be released with [`fts_garch_free`].
#[no_mangle]
pub unsafe extern "C" fn fts_garch_fit(returns: *const f64, len: usize, out: *mut *mut FtsGarchFit) -> FtsStatus {
    guard(|| {
        let r = slice(returns, len, "returns")?;
        let out = out_ptr(out, "out")?;
        let fit = fit_garch(r)?;
        *out = Box::into_raw(Box::new(FtsGarchFit(fit)));
        Ok(())
    })
}

/// # Safety
/// `fit` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fts_garch_params(fit: *const FtsGarchFit, out: *mut FtsGarchParams) -> FtsStatus {
    guard(|| {
        let p = fit.as_ref().ok_or_else(|| null_arg("fit"))?.0.params;
        *out_ptr(out, "out")? = FtsGarchParams {
            mu: p.mu,
            alpha0: p.alpha0,
            alpha1: p.alpha1,
            beta1: p.beta1,
        };
        Ok(())
    })
}

/// # Safety
/// `fit` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn fts_garch_loglik(fit: *const FtsGarchFit, out: *mut f64) -> FtsStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null_arg("fit"))?.0;
        *out_ptr(out, "out")? = fit.loglik;
        Ok(())
    })
}

/// Conditional variance forecasts for the next `horizon` days.
///
/// # Safety
/// `fit` must be a live handle and `out` valid for `horizon` writes.
#[no_mangle]
pub unsafe extern "C" fn fts_garch_forecast_variance(
    fit: *const FtsGarchFit,
    horizon: usize,
    out: *mut f64,
) -> FtsStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null_arg("fit"))?.0;
        let f = forecast_garch(fit, horizon)?;
        slice_mut(out, horizon, "out")?.copy_from_slice(&f.variance);
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from [`fts_garch_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fts_garch_free(fit: *mut FtsGarchFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Runs the benchmark described by the JSON config at `config_path`, writes
/// its output files and returns the report as JSON in `*out_json`, to be
/// released with [`fts_string_free`].
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out_json` valid for
/// one write.
#[no_mangle]
pub unsafe extern "C" fn fts_run_benchmark_json(config_path: *const c_char, out_json: *mut *mut c_char) -> FtsStatus {
    guard(|| {
        if config_path.is_null() {
            return Err(null_arg("config_path"));
        }
        let out = out_ptr(out_json, "out_json")?;
        let path = CStr::from_ptr(config_path)
            .to_str()
            .map_err(|_| Failure::Status(FtsStatus::InvalidInput, "config path is not UTF-8".into()))?;
        let cfg = BenchConfig::from_file(Path::new(path))?;
        cfg.validate()?;
        let run = execute(&cfg)?;
        let json = serde_json::to_string(&run.report).map_err(Error::from)?;
        *out = CString::new(json)
            .map_err(|_| Failure::Status(FtsStatus::Json, "report contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
