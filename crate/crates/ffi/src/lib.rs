//! C ABI over `qrc-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_run`
//! style functions and released with the matching `*_free`. Every fallible
//! function returns a [`QrcStatus`]; on failure a message for the calling
//! thread is available from [`qrc_last_error_message`]. Panics are caught
//! and reported as [`QrcStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use qrc_core::readout::{forecast_qrc, predict_open_loop, train_readout, ReadoutWeights};
use qrc_core::reservoir::{FeatureMatrix, Reservoir, ReservoirConfig};
use qrc_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// A configured quantum reservoir.
pub struct QrcReservoir {
    config: ReservoirConfig,
    reservoir: Reservoir,
}

/// Feature matrix from a reservoir run, bias column included.
pub struct QrcFeatures(FeatureMatrix);

/// Trained readout weights, bias last.
pub struct QrcWeights(ReadoutWeights);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> QrcStatus {
    match err {
        Error::Io { .. } => QrcStatus::Io,
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::Json(_)
        | Error::InputOutOfRange(_) => QrcStatus::InvalidArgument,
        Error::Parse { .. } | Error::Data(_) | Error::Csv(_) => QrcStatus::Data,
        _ => QrcStatus::Numerical,
    }
}

struct Failure(QrcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QrcStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> QrcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QrcStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside qrc".into());
            QrcStatus::Panic
        }
    }
}

unsafe fn input<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn output<'a>(
    data: *mut f64,
    len: usize,
    needed: usize,
    what: &str,
) -> Result<&'a mut [f64], Failure> {
    if len < needed {
        return Err(Failure(
            QrcStatus::InvalidArgument,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(data, needed))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qrc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qrc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a reservoir from a JSON config (same schema as the CLI's
/// `reservoir` section); NULL `json` means all defaults.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_reservoir_new(
    json: *const c_char,
    out: *mut *mut QrcReservoir,
) -> QrcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config: ReservoirConfig = if json.is_null() {
            ReservoirConfig::default()
        } else {
            let text = CStr::from_ptr(json)
                .to_str()
                .map_err(|_| Failure(QrcStatus::InvalidArgument, "config is not UTF-8".into()))?;
            serde_json::from_str(text).map_err(Error::from)?
        };
        let reservoir = Reservoir::new(&config)?;
        store(out, QrcReservoir { config, reservoir });
        Ok(())
    })
}

/// # Safety
/// `reservoir` must be NULL or a handle from [`qrc_reservoir_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qrc_reservoir_free(reservoir: *mut QrcReservoir) {
    if !reservoir.is_null() {
        drop(Box::from_raw(reservoir));
    }
}

/// Qubit count of the reservoir, 0 for NULL.
///
/// # Safety
/// `reservoir` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_reservoir_qubits(reservoir: *const QrcReservoir) -> usize {
    reservoir.as_ref().map_or(0, |r| r.config.n)
}

/// Drive the reservoir from `|0…0⟩` with `series` (values in [0, 1]) and
/// return the post-washout features.
///
/// # Safety
/// `series` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_reservoir_run(
    reservoir: *const QrcReservoir,
    series: *const f64,
    len: usize,
    out: *mut *mut QrcFeatures,
) -> QrcStatus {
    guard(|| {
        let r = handle(reservoir, "reservoir")?;
        let series = input(series, len, "series")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let run = r.reservoir.run(series)?;
        store(out, QrcFeatures(run.features));
        Ok(())
    })
}

/// # Safety
/// `features` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_features_free(features: *mut QrcFeatures) {
    if !features.is_null() {
        drop(Box::from_raw(features));
    }
}

/// # Safety
/// `features` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_features_rows(features: *const QrcFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.0.nrows())
}

/// Columns including the trailing bias column.
///
/// # Safety
/// `features` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_features_cols(features: *const QrcFeatures) -> usize {
    features.as_ref().map_or(0, |f| f.0.ncols())
}

/// Copy the matrix row-major into `out` (`rows × cols` values).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qrc_features_copy(
    features: *const QrcFeatures,
    out: *mut f64,
    len: usize,
) -> QrcStatus {
    guard(|| {
        let f = &handle(features, "features")?.0;
        let dst = output(out, len, f.nrows() * f.ncols(), "out")?;
        for (r, chunk) in dst.chunks_mut(f.ncols()).enumerate() {
            chunk.copy_from_slice(&f.row(r));
        }
        Ok(())
    })
}

/// Pseudoinverse readout mapping feature rows to `targets`.
///
/// # Safety
/// `targets` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qrc_train_readout(
    features: *const QrcFeatures,
    targets: *const f64,
    len: usize,
    out: *mut *mut QrcWeights,
) -> QrcStatus {
    guard(|| {
        let f = &handle(features, "features")?.0;
        let targets = input(targets, len, "targets")?;
        if out.is_null() {
            return Err(null("out"));
        }
        store(out, QrcWeights(train_readout(f, targets)?));
        Ok(())
    })
}

/// # Safety
/// `weights` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_weights_free(weights: *mut QrcWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// # Safety
/// `weights` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qrc_weights_len(weights: *const QrcWeights) -> usize {
    weights.as_ref().map_or(0, |w| w.0.len())
}

/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qrc_weights_copy(
    weights: *const QrcWeights,
    out: *mut f64,
    len: usize,
) -> QrcStatus {
    guard(|| {
        let w = &handle(weights, "weights")?.0;
        output(out, len, w.len(), "out")?.copy_from_slice(w.values());
        Ok(())
    })
}

/// One prediction per feature row.
///
/// # Safety
/// `out` must point to `len` writable doubles, `len >= rows`.
#[no_mangle]
pub unsafe extern "C" fn qrc_predict_open_loop(
    features: *const QrcFeatures,
    weights: *const QrcWeights,
    out: *mut f64,
    len: usize,
) -> QrcStatus {
    guard(|| {
        let f = &handle(features, "features")?.0;
        let w = &handle(weights, "weights")?.0;
        let predictions = predict_open_loop(f, w)?;
        output(out, len, predictions.len(), "out")?.copy_from_slice(&predictions);
        Ok(())
    })
}

/// Hold out the last `horizon` points of `series`, train on the rest, and
/// write open- and closed-loop forecasts (`horizon` values each) plus
/// their MSEs. Any output pointer may be NULL to skip it.
///
/// # Safety
/// `series` must point to `len` doubles; non-NULL forecast buffers must hold
/// `horizon` doubles.
#[no_mangle]
pub unsafe extern "C" fn qrc_forecast(
    reservoir: *const QrcReservoir,
    series: *const f64,
    len: usize,
    horizon: usize,
    open_loop: *mut f64,
    closed_loop: *mut f64,
    open_mse: *mut f64,
    closed_mse: *mut f64,
) -> QrcStatus {
    guard(|| {
        let r = handle(reservoir, "reservoir")?;
        let series = input(series, len, "series")?;
        let forecast = forecast_qrc(series, &r.config, horizon, "series")?;
        if !open_loop.is_null() {
            output(open_loop, horizon, horizon, "open_loop")?
                .copy_from_slice(&forecast.open_loop.predictions);
        }
        if !closed_loop.is_null() {
            output(closed_loop, horizon, horizon, "closed_loop")?
                .copy_from_slice(&forecast.closed_loop.predictions);
        }
        if let Some(m) = open_mse.as_mut() {
            *m = forecast.open_loop.mse;
        }
        if let Some(m) = closed_mse.as_mut() {
            *m = forecast.closed_loop.mse;
        }
        Ok(())
    })
}
