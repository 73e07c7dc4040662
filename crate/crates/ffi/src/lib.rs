// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over the `depsmuce` crate.
//!
//! Every fallible call returns a [`DsStatus`]; on failure a message is kept
//! per thread and can be read with [`ds_last_error_message`]. Fits are
//! returned as opaque [`DsFit`] handles owned by the caller and released with
//! [`ds_fit_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use depsmuce::multiscale::calibration::{mc_quantile, DEFAULT_CALIBRATION_SEED, DEFAULT_MC_REPS};
use depsmuce::segmentation::{detect, DetectorConfig, Fit, Threshold};
use depsmuce::variance::VarianceEstimator;
use depsmuce::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    Internal = 4,
}

pub const DS_THRESHOLD_ALPHA: u32 = 0;
pub const DS_THRESHOLD_Q: u32 = 1;

pub const DS_LRV_BLOCK: u32 = 0;
pub const DS_LRV_IID_DIFF: u32 = 1;
pub const DS_LRV_FIXED: u32 = 2;

/// Detector settings. Zero in `min_len`, `block_length` or `mc_reps` selects the default.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DsDetectOptions {
    /// `DS_THRESHOLD_ALPHA` or `DS_THRESHOLD_Q`.
    pub threshold_kind: u32,
    /// Significance level or raw threshold, per `threshold_kind`.
    pub threshold: f64,
    pub min_len: usize,
    /// `DS_LRV_BLOCK`, `DS_LRV_IID_DIFF` or `DS_LRV_FIXED`.
    pub lrv_method: u32,
    pub block_length: usize,
    /// Used with `DS_LRV_FIXED`.
    pub fixed_sigma: f64,
    pub mc_reps: usize,
    pub seed: u64,
}

/// Opaque fit handle.
pub struct DsFit {
    fit: Fit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: DsStatus, msg: impl Into<String>) -> DsStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> DsStatus {
    match e {
        Error::Degenerate(_) => DsStatus::Degenerate,
        Error::InvalidInput(_) | Error::NonStationary(_) | Error::UnknownScenario(_) => DsStatus::InvalidInput,
        Error::Io(_) | Error::Json(_) => DsStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DsStatus>) -> DsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DsStatus::Internal, "panic inside depsmuce"),
    }
}

fn lib_err(e: Error) -> DsStatus {
    fail(status_of(&e), e.to_string())
}

/// # Safety
/// `y` must be null or point to `n` readable doubles.
unsafe fn series<'a>(y: *const f64, n: usize) -> Result<&'a [f64], DsStatus> {
    if y.is_null() {
        return Err(fail(DsStatus::NullPointer, "series pointer is null"));
    }
    Ok(std::slice::from_raw_parts(y, n))
}

fn out_ptr<T>(p: *mut T) -> Result<(), DsStatus> {
    if p.is_null() {
        Err(fail(DsStatus::NullPointer, "output pointer is null"))
    } else {
        Ok(())
    }
}

fn config(o: &DsDetectOptions) -> Result<DetectorConfig, DsStatus> {
    let threshold = match o.threshold_kind {
        DS_THRESHOLD_ALPHA => Threshold::Alpha(o.threshold),
        DS_THRESHOLD_Q => Threshold::Fixed(o.threshold),
        k => return Err(fail(DsStatus::InvalidInput, format!("unknown threshold kind {k}"))),
    };
    let block_length = (o.block_length > 0).then_some(o.block_length);
    let variance = match o.lrv_method {
        DS_LRV_BLOCK => VarianceEstimator::BlockDiff { block_length },
        DS_LRV_IID_DIFF => VarianceEstimator::IidDiff,
        DS_LRV_FIXED => VarianceEstimator::Fixed(o.fixed_sigma),
        k => return Err(fail(DsStatus::InvalidInput, format!("unknown variance method {k}"))),
    };
    Ok(DetectorConfig {
        threshold,
        min_len: (o.min_len > 0).then_some(o.min_len),
        variance,
        mc_reps: if o.mc_reps > 0 { o.mc_reps } else { DEFAULT_MC_REPS },
        seed: o.seed,
    })
}

/// Defaults: alpha 0.5, block estimator, default scales and calibration.
#[no_mangle]
pub extern "C" fn ds_detect_options_default() -> DsDetectOptions {
    DsDetectOptions {
        threshold_kind: DS_THRESHOLD_ALPHA,
        threshold: 0.5,
        min_len: 0,
        lrv_method: DS_LRV_BLOCK,
        block_length: 0,
        fixed_sigma: 0.0,
        mc_reps: DEFAULT_MC_REPS,
        seed: DEFAULT_CALIBRATION_SEED,
    }
}

/// Runs the detector on `y[0..n]` and stores a new handle in `*out`.
/// A null `opts` uses [`ds_detect_options_default`].
///
/// # Safety
/// `y` must point to `n` readable doubles, `opts` must be null or valid and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_detect(
    y: *const f64,
    n: usize,
    opts: *const DsDetectOptions,
    out: *mut *mut DsFit,
) -> DsStatus {
    guard(|| {
        out_ptr(out)?;
        *out = ptr::null_mut();
        let y = series(y, n)?;
        let o = if opts.is_null() {
            ds_detect_options_default()
        } else {
            *opts
        };
        let fit = detect(y, &config(&o)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(DsFit { fit }));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from [`ds_detect`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_free(fit: *mut DsFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be null or a live handle.
unsafe fn with_fit<T>(fit: *const DsFit, default: T, f: impl FnOnce(&Fit) -> T) -> T {
    match fit.as_ref() {
        Some(h) => f(&h.fit),
        None => default,
    }
}

/// Number of change points, 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_k_hat(fit: *const DsFit) -> usize {
    with_fit(fit, 0, |f| f.k_hat)
}

/// Copies up to `cap` break indices (1-based segment starts) into `buf` and
/// returns the total count.
///
/// # Safety
/// `fit` must be null or a live handle; `buf` must hold `cap` values or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_breaks(fit: *const DsFit, buf: *mut usize, cap: usize) -> usize {
    with_fit(fit, 0, |f| copy_out(f.breaks(), buf, cap))
}

/// Copies up to `cap` segment levels into `buf` and returns the total count (`k_hat + 1`).
///
/// # Safety
/// As for [`ds_fit_breaks`].
#[no_mangle]
pub unsafe extern "C" fn ds_fit_levels(fit: *const DsFit, buf: *mut f64, cap: usize) -> usize {
    with_fit(fit, 0, |f| copy_out(f.levels(), buf, cap))
}

unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize) -> usize {
    if !buf.is_null() {
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len().min(cap));
    }
    src.len()
}

/// Threshold used; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_q(fit: *const DsFit) -> f64 {
    with_fit(fit, f64::NAN, |f| f.q_used)
}

/// Noise scale used; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_sigma(fit: *const DsFit) -> f64 {
    with_fit(fit, f64::NAN, |f| f.sigma_used)
}

/// Residual sum of squares; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_sse(fit: *const DsFit) -> f64 {
    with_fit(fit, f64::NAN, |f| f.sse)
}

/// The fit as a JSON object. Free the result with [`ds_string_free`]; null on a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_to_json(fit: *const DsFit) -> *mut c_char {
    with_fit(fit, ptr::null_mut(), |f| {
        CString::new(f.to_json()).map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Block-difference long-run variance estimate; `block_length` 0 selects the default.
///
/// # Safety
/// `y` must point to `n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_block_diff_lrv(y: *const f64, n: usize, block_length: usize, out: *mut f64) -> DsStatus {
    guard(|| {
        out_ptr(out)?;
        let est =
            depsmuce::block_diff_lrv(series(y, n)?, (block_length > 0).then_some(block_length)).map_err(lib_err)?;
        *out = est.sigma_star_sq;
        Ok(())
    })
}

/// Difference-based variance estimate for independent noise.
///
/// # Safety
/// `y` must point to `n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_iid_diff_lrv(y: *const f64, n: usize, out: *mut f64) -> DsStatus {
    guard(|| {
        out_ptr(out)?;
        *out = depsmuce::iid_diff_lrv(series(y, n)?).map_err(lib_err)?.sigma_star_sq;
        Ok(())
    })
}

/// Monte-Carlo `(1 - alpha)` quantile of the null multiscale statistic.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_mc_quantile(
    n: usize,
    min_len: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        out_ptr(out)?;
        *out = mc_quantile(n, min_len, alpha, reps, seed).map_err(lib_err)?;
        Ok(())
    })
}

/// Scale penalty for an interval of length `m` in a series of length `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_penalty(m: usize, n: usize, out: *mut f64) -> DsStatus {
    guard(|| {
        out_ptr(out)?;
        *out = depsmuce::penalty(m, n).map_err(lib_err)?;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}
