//! C ABI for uncagg.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_load` and released with the matching `*_free`. Every fallible call
//! returns an [`UncaggStatus`]; the message of the most recent failure on
//! the calling thread is available from [`uncagg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use uncagg::meta_gmm::GmmModel;
use uncagg::strategy::Strategy;
use uncagg::{Error, FeatureVector, SegmentationMask, UncertaintyMap};

/// Result codes shared by every function of this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncaggStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument is malformed: bad strategy id, non-UTF-8 string, zero size.
    InvalidArgument = 2,
    /// A file could not be read.
    Io = 3,
    /// The input data violates a precondition (range, shape, model layout).
    InvalidData = 4,
    /// The mask has no foreground pixels; the score is undefined.
    NoForeground = 5,
    /// The strategy needs a segmentation mask and none was given.
    MaskRequired = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

/// Opaque uncertainty map.
pub struct UncaggMap {
    inner: UncertaintyMap,
}

/// Opaque segmentation mask.
pub struct UncaggMask {
    inner: SegmentationMask,
}

/// Opaque fitted meta-aggregator.
pub struct UncaggModel {
    inner: GmmModel,
    strategies: Option<Vec<Strategy>>,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> UncaggStatus {
    match e {
        Error::Io { .. } => UncaggStatus::Io,
        Error::NoForeground => UncaggStatus::NoForeground,
        Error::MaskRequired(_) => UncaggStatus::MaskRequired,
        Error::UnknownStrategy(_) | Error::InvalidParam(_) | Error::InvalidThreshold(_) | Error::InvalidQuantile(_) => {
            UncaggStatus::InvalidArgument
        }
        _ => UncaggStatus::InvalidData,
    }
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (UncaggStatus, String)>) -> UncaggStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            UncaggStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UncaggStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (UncaggStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (UncaggStatus, String) {
    (UncaggStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (UncaggStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (UncaggStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn buffer<'a, T>(p: *const T, height: usize, width: usize, what: &str) -> Result<&'a [T], (UncaggStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    let len = height
        .checked_mul(width)
        .filter(|&n| n > 0)
        .ok_or((UncaggStatus::InvalidArgument, "height and width must be positive".to_string()))?;
    Ok(slice::from_raw_parts(p, len))
}

/// Message describing the last failed call on this thread; empty after a
/// success. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn uncagg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uncagg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies a row-major `height × width` array of values in `[0, 1]`.
///
/// # Safety
/// `values` must point to `height * width` readable doubles and `out` to a
/// writable handle slot. Release the handle with [`uncagg_map_free`].
#[no_mangle]
pub unsafe extern "C" fn uncagg_map_new(
    values: *const f64,
    height: usize,
    width: usize,
    out: *mut *mut UncaggMap,
) -> UncaggStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = buffer(values, height, width, "values")?;
        let inner = UncertaintyMap::new(height, width, data.to_vec()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UncaggMap { inner }));
        Ok(())
    })
}

/// Loads a map from a two-dimensional NPY file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn uncagg_map_load_npy(path: *const c_char, out: *mut *mut UncaggMap) -> UncaggStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let inner = uncagg::io::read_map(path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UncaggMap { inner }));
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uncagg_map_free(map: *mut UncaggMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Copies a row-major label mask; `background` is the label excluded from
/// class averages.
///
/// # Safety
/// `labels` must point to `height * width` readable values and `out` to a
/// writable handle slot. Release the handle with [`uncagg_mask_free`].
#[no_mangle]
pub unsafe extern "C" fn uncagg_mask_new(
    labels: *const u32,
    height: usize,
    width: usize,
    background: u32,
    out: *mut *mut UncaggMask,
) -> UncaggStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let data = buffer(labels, height, width, "labels")?;
        let inner = SegmentationMask::with_background(height, width, data.to_vec(), background).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(UncaggMask { inner }));
        Ok(())
    })
}

/// # Safety
/// `mask` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uncagg_mask_free(mask: *mut UncaggMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Aggregates `map` with the strategy named by `strategy` (for example
/// `"avg"`, `"plm:20"`, `"eds"`). `mask` may be null for strategies that do
/// not use predictions.
///
/// # Safety
/// Handles must be live, `strategy` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uncagg_aggregate(
    map: *const UncaggMap,
    mask: *const UncaggMask,
    strategy: *const c_char,
    out: *mut f64,
) -> UncaggStatus {
    guard(|| {
        if map.is_null() {
            return Err(null("map"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s: Strategy = c_str(strategy, "strategy")?.parse().map_err(lib_err)?;
        let mask = mask.as_ref().map(|m| &m.inner);
        *out = s.compute(&(*map).inner, mask).map_err(lib_err)?;
        Ok(())
    })
}

/// Loads a meta-aggregator saved as JSON.
///
/// # Safety
/// `path` must be NUL-terminated and `out` a writable handle slot. Release
/// the handle with [`uncagg_model_free`].
#[no_mangle]
pub unsafe extern "C" fn uncagg_model_load(path: *const c_char, out: *mut *mut UncaggModel) -> UncaggStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let inner = GmmModel::load(path).map_err(lib_err)?;
        let names = inner
            .feature_spec
            .strategies
            .iter()
            .map(|n| CString::new(n.as_str()).unwrap_or_default())
            .collect();
        let strategies = inner.feature_spec.parsed().ok();
        *out = Box::into_raw(Box::new(UncaggModel {
            inner,
            strategies,
            names,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uncagg_model_free(model: *mut UncaggModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of features the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uncagg_model_dim(model: *const UncaggModel) -> usize {
    model.as_ref().map_or(0, |m| m.names.len())
}

/// Name of feature `index`, owned by the model handle; null when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uncagg_model_feature_name(model: *const UncaggModel, index: usize) -> *const c_char {
    match model.as_ref().and_then(|m| m.names.get(index)) {
        Some(n) => n.as_ptr(),
        None => ptr::null(),
    }
}

/// Negative log-likelihood of a raw feature vector given in the model's
/// feature order.
///
/// # Safety
/// `features` must point to `len` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn uncagg_model_score(
    model: *const UncaggModel,
    features: *const f64,
    len: usize,
    out: *mut f64,
) -> UncaggStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if features.is_null() {
            return Err(null("features"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let values = slice::from_raw_parts(features, len).to_vec();
        let fv = FeatureVector::new(m.inner.feature_spec.strategies.clone(), values).map_err(lib_err)?;
        *out = m.inner.score(&fv).map_err(lib_err)?;
        Ok(())
    })
}

/// Computes the model's features from `map` (and `mask`, if needed) and
/// returns their negative log-likelihood.
///
/// # Safety
/// Handles must be live (`mask` may be null) and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uncagg_model_score_map(
    model: *const UncaggModel,
    map: *const UncaggMap,
    mask: *const UncaggMask,
    out: *mut f64,
) -> UncaggStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let map = map.as_ref().ok_or_else(|| null("map"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let strategies = m.strategies.as_ref().ok_or((
            UncaggStatus::InvalidData,
            "model features are not computable strategies".to_string(),
        ))?;
        let mask = mask.as_ref().map(|k| &k.inner);
        let values = strategies
            .iter()
            .map(|s| s.compute(&map.inner, mask))
            .collect::<Result<Vec<f64>, Error>>()
            .map_err(lib_err)?;
        let fv = FeatureVector::new(m.inner.feature_spec.strategies.clone(), values).map_err(lib_err)?;
        *out = m.inner.score(&fv).map_err(lib_err)?;
        Ok(())
    })
}
