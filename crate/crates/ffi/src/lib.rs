//! C ABI over the mwchart library.
//!
//! Conventions: every fallible call returns an [`MwStatus`] code and writes
//! its result through out-pointers. Chart limits live behind an opaque handle
//! created by `mw_limits_new` or `mw_design_limits` and released with
//! `mw_limits_free`. On any non-zero status, `mw_last_error_message` returns
//! a thread-local NUL-terminated description valid until the next failing
//! call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};

use mwchart::chart::run_chart;
use mwchart::chart_design::{evaluate_limits, find_limits, DesignCriterion, Sidedness};
use mwchart::error::Error;
use mwchart::mw_stat::{mann_whitney, ReferenceSample, TestSample, TiePolicy};
use mwchart::run_length::{ArlMethod, ErrorTarget, MonteCarloConfig};
use mwchart::ChartLimits;

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NumericError = 3,
    CapacityExceeded = 4,
}

/// ARL engines selectable through the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwArlMethod {
    Exact = 0,
    Lr = 1,
    Normal = 2,
    FixedReference = 3,
    FalseAlarm = 4,
}

impl MwArlMethod {
    fn to_method(self) -> ArlMethod {
        match self {
            MwArlMethod::Exact => ArlMethod::Exact,
            MwArlMethod::Lr => ArlMethod::Lr,
            MwArlMethod::Normal => ArlMethod::Normal,
            MwArlMethod::FixedReference => ArlMethod::FixedReference,
            MwArlMethod::FalseAlarm => ArlMethod::FalseAlarm,
        }
    }
}

/// Opaque chart limits handle.
pub struct MwLimits {
    inner: ChartLimits,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(err: &Error) -> MwStatus {
    let msg = CString::new(err.to_string()).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
    match err {
        Error::InvalidInput(_) | Error::Io(_) => MwStatus::InvalidInput,
        Error::Capacity(_) => MwStatus::CapacityExceeded,
        _ => MwStatus::NumericError,
    }
}

fn set_error_msg(msg: &str, status: MwStatus) -> MwStatus {
    let msg = CString::new(msg).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
    status
}

/// Last error message for this thread, or NULL when no error has occurred.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |msg| msg.as_ptr())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Mann-Whitney statistic of test sample y against reference sample x.
///
/// # Safety
/// `x` must point to `m` readable doubles, `y` to `n` readable doubles, and
/// `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mw_statistic(
    x: *const f64,
    m: usize,
    y: *const f64,
    n: usize,
    midrank_ties: bool,
    out: *mut f64,
) -> MwStatus {
    if x.is_null() || y.is_null() || out.is_null() {
        return set_error_msg("null pointer argument", MwStatus::NullPointer);
    }
    let xs = std::slice::from_raw_parts(x, m).to_vec();
    let ys = std::slice::from_raw_parts(y, n).to_vec();
    let reference = match ReferenceSample::new(xs) {
        Ok(r) => r,
        Err(e) => return set_error(&e),
    };
    let test = match TestSample::new(ys, 1) {
        Ok(t) => t,
        Err(e) => return set_error(&e),
    };
    let tie = if midrank_ties {
        TiePolicy::Midrank
    } else {
        TiePolicy::Strict
    };
    *out = mann_whitney(&reference, &test, tie).value();
    MwStatus::Ok
}

/// Wrap explicit integer limits in a handle. Two-sided charts take
/// lcl = m*n - ucl automatically.
///
/// # Safety
/// `out` must point to a writable pointer slot. The returned handle must be
/// released with `mw_limits_free`.
#[no_mangle]
pub unsafe extern "C" fn mw_limits_new(
    m: usize,
    n: usize,
    ucl: i64,
    one_sided: bool,
    target_arl0: f64,
    out: *mut *mut MwLimits,
) -> MwStatus {
    if out.is_null() {
        return set_error_msg("null out pointer", MwStatus::NullPointer);
    }
    let sided = if one_sided {
        Sidedness::UpperOneSided
    } else {
        Sidedness::TwoSided
    };
    match ChartLimits::new(m, n, ucl, sided, target_arl0) {
        Ok(limits) => {
            *out = Box::into_raw(Box::new(MwLimits { inner: limits }));
            MwStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Search integer limits for a target in-control ARL.
///
/// `tolerance` is the relative stopping tolerance (0.02 is the usual value)
/// and `error_fraction` the Monte Carlo standard error target as a fraction
/// of the running estimate (0.015 is the usual value).
///
/// # Safety
/// `out` must point to a writable pointer slot. The returned handle must be
/// released with `mw_limits_free`.
#[no_mangle]
pub unsafe extern "C" fn mw_design_limits(
    m: usize,
    n: usize,
    target_arl0: f64,
    tolerance: f64,
    error_fraction: f64,
    one_sided: bool,
    seed: u64,
    out: *mut *mut MwLimits,
) -> MwStatus {
    if out.is_null() {
        return set_error_msg("null out pointer", MwStatus::NullPointer);
    }
    let sided = if one_sided {
        Sidedness::UpperOneSided
    } else {
        Sidedness::TwoSided
    };
    let criterion = DesignCriterion::mean_arl0(target_arl0).with_tolerance(tolerance);
    let mut mc = MonteCarloConfig::new(seed);
    mc.error_target = ErrorTarget::FractionOfEstimate(error_fraction);
    match find_limits(m, n, criterion, sided, &mc) {
        Ok(outcome) => {
            *out = Box::into_raw(Box::new(MwLimits {
                inner: outcome.limits,
            }));
            MwStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Upper control limit of a handle; i64::MIN for a null handle.
///
/// # Safety
/// `limits` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn mw_limits_ucl(limits: *const MwLimits) -> i64 {
    if limits.is_null() {
        return i64::MIN;
    }
    (*limits).inner.ucl
}

/// Lower control limit; -1 for one-sided charts, i64::MIN for a null handle.
///
/// # Safety
/// `limits` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn mw_limits_lcl(limits: *const MwLimits) -> i64 {
    if limits.is_null() {
        return i64::MIN;
    }
    (*limits).inner.lcl.unwrap_or(-1)
}

/// Attained in-control ARL recorded by the design search; NaN when the
/// handle was built from explicit limits.
///
/// # Safety
/// `limits` must be a live handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn mw_limits_attained_arl0(limits: *const MwLimits) -> f64 {
    if limits.is_null() {
        return f64::NAN;
    }
    (*limits).inner.attained_arl0.unwrap_or(f64::NAN)
}

/// Release a limits handle. NULL is a no-op.
///
/// # Safety
/// `limits` must be a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mw_limits_free(limits: *mut MwLimits) {
    if !limits.is_null() {
        drop(Box::from_raw(limits));
    }
}

/// In-control ARL of the limits by the chosen engine. `k` = 0 uses the
/// adaptive sample-size rule; otherwise exactly `k` Monte Carlo samples.
/// `out_smc` may be NULL. Deterministic methods report an smc of zero.
///
/// # Safety
/// `limits` must be a live handle; `out_arl` must be writable; `out_smc`
/// must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn mw_arl0(
    limits: *const MwLimits,
    method: MwArlMethod,
    seed: u64,
    k: usize,
    out_arl: *mut f64,
    out_smc: *mut f64,
) -> MwStatus {
    if limits.is_null() || out_arl.is_null() {
        return set_error_msg("null pointer argument", MwStatus::NullPointer);
    }
    let mc = if k == 0 {
        MonteCarloConfig::new(seed)
    } else {
        MonteCarloConfig::fixed_k(seed, k)
    };
    match evaluate_limits(&(*limits).inner, &mc, method.to_method()) {
        Ok(summary) => {
            *out_arl = summary.arl_estimate;
            if !out_smc.is_null() {
                *out_smc = summary.smc;
            }
            MwStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Run the chart: statistics and signal flags for `n_samples` test samples of
/// size `limits.n`, stored row-major in `tests`.
///
/// # Safety
/// `limits` must be a live handle; `reference` must point to `m` doubles;
/// `tests` to `n_samples * n` doubles; `out_stats` and `out_signals` to
/// `n_samples` writable elements each.
#[no_mangle]
pub unsafe extern "C" fn mw_run_chart(
    limits: *const MwLimits,
    reference: *const f64,
    m: usize,
    tests: *const f64,
    n_samples: usize,
    midrank_ties: bool,
    out_stats: *mut f64,
    out_signals: *mut u8,
) -> MwStatus {
    if limits.is_null()
        || reference.is_null()
        || tests.is_null()
        || out_stats.is_null()
        || out_signals.is_null()
    {
        return set_error_msg("null pointer argument", MwStatus::NullPointer);
    }
    let lims = &(*limits).inner;
    let reference = match ReferenceSample::new(std::slice::from_raw_parts(reference, m).to_vec()) {
        Ok(r) => r,
        Err(e) => return set_error(&e),
    };
    let flat = std::slice::from_raw_parts(tests, n_samples * lims.n);
    let samples: Result<Vec<TestSample>, Error> = flat
        .chunks(lims.n)
        .enumerate()
        .map(|(i, chunk)| TestSample::new(chunk.to_vec(), i + 1))
        .collect();
    let samples = match samples {
        Ok(s) => s,
        Err(e) => return set_error(&e),
    };
    let tie = if midrank_ties {
        TiePolicy::Midrank
    } else {
        TiePolicy::Strict
    };
    match run_chart(&reference, &samples, lims, tie) {
        Ok(records) => {
            for (i, rec) in records.iter().enumerate() {
                *out_stats.add(i) = rec.statistic.value();
                *out_signals.add(i) = rec.signal as u8;
            }
            MwStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}
