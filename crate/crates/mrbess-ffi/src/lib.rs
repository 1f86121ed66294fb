//! C ABI for the mrbess solver: opaque handles, integer status codes, and a
//! thread-local last-error message. All matrices cross the boundary as
//! row-major `double` buffers; indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mrbess::model::{
    denormalize_coefficients, validate_and_normalize, Dataset, FitResult, SolverConfig,
};
use mrbess::solver::{solve_fixed, TerminationStatus};
use mrbess::tuning::{tune_gic, tune_validation, TuneOptions};
use mrbess::MrbessError;
use mrbess::nalgebra::{DMatrix, DVector};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrbessStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    SingularGram = 5,
    TuningFailed = 6,
    Panic = 7,
}

/// How the active-set iteration terminated.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrbessTermination {
    TolConverged = 0,
    ActiveSetFixedPoint = 1,
    CycleDetected = 2,
    MaxIter = 3,
}

/// Opaque dataset handle.
pub struct MrbessDataset {
    inner: Dataset,
}

/// Opaque fit handle.
pub struct MrbessFit {
    fit: FitResult,
    col_scales: DVector<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let cstr = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstr));
}

fn status_of(err: &MrbessError) -> MrbessStatus {
    match err {
        MrbessError::DimensionMismatch(_) => MrbessStatus::DimensionMismatch,
        MrbessError::NonFinite { .. } => MrbessStatus::NonFinite,
        MrbessError::SingularGram { .. } => MrbessStatus::SingularGram,
        MrbessError::AllCellsFailed(_) => MrbessStatus::TuningFailed,
        MrbessError::InfeasibleSplit { .. } => MrbessStatus::InvalidArgument,
        _ => MrbessStatus::InvalidArgument,
    }
}

fn fail(err: MrbessError) -> MrbessStatus {
    let code = status_of(&err);
    set_last_error(err.to_string());
    code
}

fn guard(body: impl FnOnce() -> MrbessStatus) -> MrbessStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            MrbessStatus::Panic
        }
    }
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap` bytes). Returns the full message length excluding the
/// terminator, or 0 when no error is recorded.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be NULL (the call then only
/// reports the length).
#[no_mangle]
pub unsafe extern "C" fn mrbess_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Keep the copy terminated even when truncated.
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mrbess_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Build a dataset from row-major `x` (n x p) and `y` (n x q). Columns of
/// `x` are normalized internally; pass `center` to subtract column means
/// first. On success `*out` owns the dataset and must be released with
/// [`mrbess_dataset_free`].
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n * q` doubles, `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn mrbess_dataset_create(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    q: usize,
    center: bool,
    out: *mut *mut MrbessDataset,
) -> MrbessStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out.is_null() {
            set_last_error("null pointer argument".into());
            return MrbessStatus::NullPointer;
        }
        let (Some(xn), Some(yn)) = (n.checked_mul(p), n.checked_mul(q)) else {
            set_last_error("matrix size overflows".into());
            return MrbessStatus::InvalidArgument;
        };
        let x_slice = std::slice::from_raw_parts(x, xn);
        let y_slice = std::slice::from_raw_parts(y, yn);
        let x_mat = DMatrix::from_row_slice(n, p, x_slice);
        let y_mat = DMatrix::from_row_slice(n, q, y_slice);
        match validate_and_normalize(&x_mat, &y_mat, center) {
            Ok(dataset) => {
                *out = Box::into_raw(Box::new(MrbessDataset { inner: dataset }));
                MrbessStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Release a dataset handle. NULL is ignored.
///
/// # Safety
/// `dataset` must come from [`mrbess_dataset_create`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mrbess_dataset_free(dataset: *mut MrbessDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Fit at fixed rank and sparsity. `tol <= 0` and `max_iter == 0` select the
/// defaults (1e-5, 100). On success `*out` must be released with
/// [`mrbess_fit_free`].
///
/// # Safety
/// `dataset` must be a live handle, `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_fixed(
    dataset: *const MrbessDataset,
    rank: usize,
    sparsity: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut MrbessFit,
) -> MrbessStatus {
    guard(|| {
        let Some(handle) = dataset.as_ref() else {
            set_last_error("null dataset".into());
            return MrbessStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("null output slot".into());
            return MrbessStatus::NullPointer;
        }
        let mut config = SolverConfig::new(rank, sparsity);
        if tol > 0.0 {
            config.tol = tol;
        }
        if max_iter > 0 {
            config.max_iter = max_iter;
        }
        match solve_fixed(&handle.inner, &config) {
            Ok(fit) => {
                *out = Box::into_raw(Box::new(MrbessFit {
                    fit,
                    col_scales: handle.inner.col_scales().clone(),
                }));
                MrbessStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Tune (sparsity, rank) by the two-stage GIC coordinate search and return
/// the final fit.
///
/// # Safety
/// `dataset` must be a live handle, `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn mrbess_tune_gic(
    dataset: *const MrbessDataset,
    s_max: usize,
    r_max: usize,
    out: *mut *mut MrbessFit,
) -> MrbessStatus {
    guard(|| {
        let Some(handle) = dataset.as_ref() else {
            set_last_error("null dataset".into());
            return MrbessStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("null output slot".into());
            return MrbessStatus::NullPointer;
        }
        match tune_gic(&handle.inner, s_max, r_max, &TuneOptions::default()) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(MrbessFit {
                    fit: report.fit,
                    col_scales: handle.inner.col_scales().clone(),
                }));
                MrbessStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Tune (sparsity, rank) on a seeded validation split and return the refit.
///
/// # Safety
/// `dataset` must be a live handle, `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn mrbess_tune_validation(
    dataset: *const MrbessDataset,
    s_max: usize,
    r_max: usize,
    train_fraction: f64,
    seed: u64,
    out: *mut *mut MrbessFit,
) -> MrbessStatus {
    guard(|| {
        let Some(handle) = dataset.as_ref() else {
            set_last_error("null dataset".into());
            return MrbessStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("null output slot".into());
            return MrbessStatus::NullPointer;
        }
        match tune_validation(
            &handle.inner,
            s_max,
            r_max,
            train_fraction,
            seed,
            &TuneOptions::default(),
        ) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(MrbessFit {
                    fit: report.fit,
                    col_scales: handle.inner.col_scales().clone(),
                }));
                MrbessStatus::Ok
            }
            Err(err) => fail(err),
        }
    })
}

/// Release a fit handle. NULL is ignored.
///
/// # Safety
/// `fit` must come from a fitting function and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_free(fit: *mut MrbessFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_rank(fit: *const MrbessFit) -> usize {
    fit.as_ref().map_or(0, |h| h.fit.rank)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_sparsity(fit: *const MrbessFit) -> usize {
    fit.as_ref().map_or(0, |h| h.fit.sparsity)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_loss(fit: *const MrbessFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |h| h.fit.loss)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_gic(fit: *const MrbessFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |h| h.fit.gic)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_iterations(fit: *const MrbessFit) -> usize {
    fit.as_ref().map_or(0, |h| h.fit.iterations)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_converged(fit: *const MrbessFit) -> bool {
    fit.as_ref().is_some_and(|h| h.fit.converged)
}

/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_status(fit: *const MrbessFit) -> MrbessTermination {
    match fit.as_ref().map(|h| h.fit.status()) {
        Some(TerminationStatus::TolConverged) => MrbessTermination::TolConverged,
        Some(TerminationStatus::ActiveSetFixedPoint) => MrbessTermination::ActiveSetFixedPoint,
        Some(TerminationStatus::CycleDetected) => MrbessTermination::CycleDetected,
        _ => MrbessTermination::MaxIter,
    }
}

/// Copy the sorted 0-based active row indices into `out` (capacity `cap`).
/// `*written` receives the number of indices.
///
/// # Safety
/// `out` must point to `cap` writable size_t slots, `written` to a writable
/// slot; `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_active_set(
    fit: *const MrbessFit,
    out: *mut usize,
    cap: usize,
    written: *mut usize,
) -> MrbessStatus {
    guard(|| {
        let Some(handle) = fit.as_ref() else {
            set_last_error("null fit".into());
            return MrbessStatus::NullPointer;
        };
        if out.is_null() || written.is_null() {
            set_last_error("null output buffer".into());
            return MrbessStatus::NullPointer;
        }
        let active = &handle.fit.active_set;
        if cap < active.len() {
            set_last_error(format!(
                "active set needs capacity {}, got {cap}",
                active.len()
            ));
            return MrbessStatus::InvalidArgument;
        }
        ptr::copy_nonoverlapping(active.as_ptr(), out, active.len());
        *written = active.len();
        MrbessStatus::Ok
    })
}

/// Copy the p x q coefficient matrix row-major into `out` (capacity `cap`
/// doubles). With `denormalized`, coefficients are rescaled to the original
/// column scaling of the design.
///
/// # Safety
/// `out` must point to `cap` writable doubles; `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrbess_fit_coefficients(
    fit: *const MrbessFit,
    denormalized: bool,
    out: *mut f64,
    cap: usize,
) -> MrbessStatus {
    guard(|| {
        let Some(handle) = fit.as_ref() else {
            set_last_error("null fit".into());
            return MrbessStatus::NullPointer;
        };
        if out.is_null() {
            set_last_error("null output buffer".into());
            return MrbessStatus::NullPointer;
        }
        let c = if denormalized {
            match denormalize_coefficients(&handle.fit.c, &handle.col_scales) {
                Ok(c) => c,
                Err(err) => return fail(err),
            }
        } else {
            handle.fit.c.clone()
        };
        let (p, q) = c.shape();
        let needed = p * q;
        if cap < needed {
            set_last_error(format!("coefficients need capacity {needed}, got {cap}"));
            return MrbessStatus::InvalidArgument;
        }
        for i in 0..p {
            for j in 0..q {
                *out.add(i * q + j) = c[(i, j)];
            }
        }
        MrbessStatus::Ok
    })
}
