//! C ABI for the klmi estimator.
//!
//! Datasets are opaque handles created from caller-owned arrays; every
//! other type crossing the boundary is a plain C struct. Functions
//! return a status code and write results through out-pointers; a
//! human-readable message for the most recent failure on the current
//! thread is available from [`klmi_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;

use klmi::error::Error;
use klmi::estimator::{bias_table, sweep_h, unbiased_mi, LabeledDataset};
use klmi::metric::{validate_matrix, Metric};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlmiStatus {
    /// Success.
    KlmiOk = 0,
    /// A required pointer argument was null.
    KlmiNullPointer = 1,
    /// An argument failed to parse or was structurally invalid.
    KlmiInvalidArgument = 2,
    /// An argument was outside the mathematical domain (bad h, empty
    /// data, counts out of range).
    KlmiDomainError = 3,
    /// Input arrays had inconsistent dimensions.
    KlmiShapeError = 4,
    /// A distance matrix violated its invariants.
    KlmiValidationError = 5,
    /// Unexpected internal failure; see the last error message.
    KlmiInternalError = 6,
}

/// Opaque dataset handle. Create with `klmi_dataset_from_points` or
/// `klmi_dataset_from_matrix`, release with `klmi_dataset_free`.
pub struct KlmiDataset {
    inner: LabeledDataset,
}

/// One estimate: sample size, number of classes, ball occupancy and the
/// naive / bias / corrected values in bits.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KlmiEstimate {
    pub n: u64,
    pub n_x: u64,
    pub h: u32,
    pub i0_bits: f64,
    pub ib_bits: f64,
    pub ie_bits: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> KlmiStatus {
    match err {
        Error::Domain(_) => KlmiStatus::KlmiDomainError,
        Error::Shape(_) => KlmiStatus::KlmiShapeError,
        Error::Validation(_) => KlmiStatus::KlmiValidationError,
        Error::Parse { .. } => KlmiStatus::KlmiInvalidArgument,
        Error::Io(_) | Error::Internal(_) => KlmiStatus::KlmiInternalError,
    }
}

fn fail(err: &Error) -> KlmiStatus {
    set_last_error(&err.to_string());
    status_for(err)
}

fn guard<F: FnOnce() -> KlmiStatus>(body: F) -> KlmiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("panic inside klmi");
            KlmiStatus::KlmiInternalError
        }
    }
}

/// Message for the most recent failure on the calling thread. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn klmi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn klmi_status_name(status: KlmiStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        KlmiStatus::KlmiOk => b"ok\0",
        KlmiStatus::KlmiNullPointer => b"null pointer\0",
        KlmiStatus::KlmiInvalidArgument => b"invalid argument\0",
        KlmiStatus::KlmiDomainError => b"domain error\0",
        KlmiStatus::KlmiShapeError => b"shape error\0",
        KlmiStatus::KlmiValidationError => b"validation error\0",
        KlmiStatus::KlmiInternalError => b"internal error\0",
    };
    name.as_ptr() as *const c_char
}

unsafe fn write_handle(
    out: *mut *mut KlmiDataset,
    result: Result<LabeledDataset, Error>,
) -> KlmiStatus {
    match result {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(KlmiDataset { inner }));
            KlmiStatus::KlmiOk
        }
        Err(err) => fail(&err),
    }
}

/// Build a dataset from `n` labels and an `n * dim` row-major feature
/// array under the named metric (`"euclidean"`, `"manhattan"`,
/// `"chebyshev"` or `"hamming"`). Labels may be arbitrary 32-bit class
/// ids; they are densified internally.
///
/// # Safety
/// `labels` must point to `n` readable `uint32_t`, `features` to
/// `n * dim` readable doubles, `metric` to a NUL-terminated string, and
/// `out` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn klmi_dataset_from_points(
    labels: *const u32,
    features: *const f64,
    n: usize,
    dim: usize,
    metric: *const c_char,
    out: *mut *mut KlmiDataset,
) -> KlmiStatus {
    guard(|| {
        if labels.is_null() || features.is_null() || metric.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return KlmiStatus::KlmiNullPointer;
        }
        let metric = match CStr::from_ptr(metric).to_str() {
            Ok(s) => match Metric::from_str(s) {
                Ok(m) => m,
                Err(err) => return fail(&err),
            },
            Err(_) => {
                set_last_error("metric name is not valid UTF-8");
                return KlmiStatus::KlmiInvalidArgument;
            }
        };
        let total = match n.checked_mul(dim) {
            Some(t) => t,
            None => {
                set_last_error("n * dim overflows");
                return KlmiStatus::KlmiInvalidArgument;
            }
        };
        let labels = std::slice::from_raw_parts(labels, n).to_vec();
        let flat = std::slice::from_raw_parts(features, total);
        let points: Vec<Vec<f64>> = flat.chunks(dim.max(1)).map(|c| c.to_vec()).collect();
        write_handle(out, LabeledDataset::from_points(labels, points, metric))
    })
}

/// Build a dataset from `n` labels and an `n * n` row-major distance
/// matrix. The matrix must have a zero diagonal, be symmetric to 1e-9
/// relative tolerance, and contain only finite nonnegative entries.
///
/// # Safety
/// `labels` must point to `n` readable `uint32_t`, `distances` to
/// `n * n` readable doubles, and `out` to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn klmi_dataset_from_matrix(
    labels: *const u32,
    distances: *const f64,
    n: usize,
    out: *mut *mut KlmiDataset,
) -> KlmiStatus {
    guard(|| {
        if labels.is_null() || distances.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return KlmiStatus::KlmiNullPointer;
        }
        let total = match n.checked_mul(n) {
            Some(t) => t,
            None => {
                set_last_error("n * n overflows");
                return KlmiStatus::KlmiInvalidArgument;
            }
        };
        let labels = std::slice::from_raw_parts(labels, n).to_vec();
        let flat = std::slice::from_raw_parts(distances, total);
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(|c| c.to_vec()).collect();
        let result = validate_matrix(&rows)
            .and_then(|matrix| LabeledDataset::from_matrix(labels, matrix));
        write_handle(out, result)
    })
}

/// Release a dataset handle. Null is ignored.
///
/// # Safety
/// `ds` must be null or a pointer previously returned by a dataset
/// constructor and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn klmi_dataset_free(ds: *mut KlmiDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of records in the dataset; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn klmi_dataset_size(ds: *const KlmiDataset) -> usize {
    if ds.is_null() {
        0
    } else {
        (*ds).inner.n()
    }
}

/// Number of distinct classes in the dataset; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn klmi_dataset_classes(ds: *const KlmiDataset) -> u64 {
    if ds.is_null() {
        0
    } else {
        (*ds).inner.n_classes()
    }
}

fn to_ffi(est: &klmi::estimator::MiEstimate) -> KlmiEstimate {
    KlmiEstimate {
        n: est.n,
        n_x: est.n_x,
        h: est.h as u32,
        i0_bits: est.i0_bits,
        ib_bits: est.ib_bits,
        ie_bits: est.ie_bits,
    }
}

/// Unbiased estimate at ball occupancy `h` (1 <= h <= n).
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a writable struct slot.
#[no_mangle]
pub unsafe extern "C" fn klmi_estimate(
    ds: *const KlmiDataset,
    h: u32,
    out: *mut KlmiEstimate,
) -> KlmiStatus {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_last_error("null pointer argument");
            return KlmiStatus::KlmiNullPointer;
        }
        match unbiased_mi(&(*ds).inner, h as usize) {
            Ok(est) => {
                *out = to_ffi(&est);
                KlmiStatus::KlmiOk
            }
            Err(err) => fail(&err),
        }
    })
}

/// Estimates for every `h` in `[h_min, h_max]`. `out` must hold
/// `h_max - h_min + 1` entries; `selected_h` receives the `h` with the
/// largest `ie_bits` (ties toward smaller `h`).
///
/// # Safety
/// `ds` must be a live dataset handle, `out` writable for
/// `h_max - h_min + 1` entries, `selected_h` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn klmi_sweep(
    ds: *const KlmiDataset,
    h_min: u32,
    h_max: u32,
    out: *mut KlmiEstimate,
    selected_h: *mut u32,
) -> KlmiStatus {
    guard(|| {
        if ds.is_null() || out.is_null() || selected_h.is_null() {
            set_last_error("null pointer argument");
            return KlmiStatus::KlmiNullPointer;
        }
        match sweep_h(&(*ds).inner, h_min as usize, h_max as usize) {
            Ok(sweep) => {
                let slots =
                    std::slice::from_raw_parts_mut(out, sweep.estimates.len());
                for (slot, est) in slots.iter_mut().zip(&sweep.estimates) {
                    *slot = to_ffi(est);
                }
                *selected_h = sweep.selected_estimate().h as u32;
                KlmiStatus::KlmiOk
            }
            Err(err) => fail(&err),
        }
    })
}

/// Closed-form bias of the naive estimator for the given per-class
/// counts at ball occupancy `h`. Writes the bias in bits to `ib_bits`;
/// when `p_r` is non-null it receives the `h` probabilities
/// `P(h_y = r)`, `r = 1..h`.
///
/// # Safety
/// `class_counts` must point to `n_classes` readable `uint64_t`,
/// `ib_bits` to a writable double, and `p_r` to either null or `h`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn klmi_bias(
    class_counts: *const u64,
    n_classes: usize,
    h: u32,
    p_r: *mut f64,
    ib_bits: *mut f64,
) -> KlmiStatus {
    guard(|| {
        if class_counts.is_null() || ib_bits.is_null() {
            set_last_error("null pointer argument");
            return KlmiStatus::KlmiNullPointer;
        }
        let counts = std::slice::from_raw_parts(class_counts, n_classes);
        match bias_table(counts, h as usize) {
            Ok(table) => {
                *ib_bits = table.i_b;
                if !p_r.is_null() {
                    let slots = std::slice::from_raw_parts_mut(p_r, table.p_r.len());
                    slots.copy_from_slice(&table.p_r);
                }
                KlmiStatus::KlmiOk
            }
            Err(err) => fail(&err),
        }
    })
}
