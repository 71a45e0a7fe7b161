//! C ABI over the `diosense` library.
//!
//! Every entry point returns a [`DsStatus`]. On failure a message is kept per
//! thread and can be read with [`ds_last_error`]. Objects are opaque handles
//! created by `*_new`/`*_build`/`*_design` calls and released with the matching
//! `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use diosense::arrays::{
    coarray_lags, design_coprime_array, design_diophantine_array, ArrayGeometry,
};
use diosense::diophantine::{self, SampleSchedule, SchemeCoefficients};
use diosense::moments::LagMomentSequence;
use diosense::spectral::{estimate, GridSpec};
use diosense::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    InvalidArgument = 1,
    Unsolvable = 2,
    Overflow = 3,
    Degenerate = 4,
    NotCovered = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DsStatus, msg: impl Into<String>) -> DsStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> DsStatus {
    let status = match &e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::ScheduleInconsistency { .. } => {
            DsStatus::InvalidArgument
        }
        Error::UnsolvableTriple { .. } => DsStatus::Unsolvable,
        Error::Overflow(_) => DsStatus::Overflow,
        Error::Degenerate { .. } | Error::DegenerateSpectrum { .. } => DsStatus::Degenerate,
        Error::NotCovered(_) => DsStatus::NotCovered,
        _ => DsStatus::Internal,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> DsStatus + UnwindSafe) -> DsStatus {
    catch_unwind(f).unwrap_or_else(|_| fail(DsStatus::Internal, "panic inside diosense"))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(DsStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Extended Euclid: `u·x + v·y = g` with `g ≥ 0`.
///
/// # Safety
/// `g`, `u` and `v` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_ext_gcd(
    x: i64,
    y: i64,
    g: *mut i64,
    u: *mut i64,
    v: *mut i64,
) -> DsStatus {
    non_null!(g, u, v);
    guard(move || match diophantine::ext_gcd(x, y) {
        Ok((gg, uu, vv)) => {
            *g = gg;
            *u = uu;
            *v = vv;
            DsStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

pub struct DsScheme(SchemeCoefficients);
pub struct DsSchedule(SampleSchedule);
pub struct DsArray(ArrayGeometry);

unsafe fn emit<T>(out: *mut *mut T, value: T) -> DsStatus {
    *out = Box::into_raw(Box::new(value));
    DsStatus::Ok
}

/// Solves `a·M = 0`, `b·M = 1` for three rates.
///
/// # Safety
/// `rates` must point to 3 readable values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_scheme_solve(rates: *const u64, out: *mut *mut DsScheme) -> DsStatus {
    non_null!(rates, out);
    let r = [*rates, *rates.add(1), *rates.add(2)];
    guard(move || match diophantine::solve_scheme(r) {
        Ok(s) => emit(out, DsScheme(s)),
        Err(e) => from_error(e),
    })
}

/// The scheme on rates `(Γ+2, Γ+3, Γ+5)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_scheme_consecutive(gamma: u64, out: *mut *mut DsScheme) -> DsStatus {
    non_null!(out);
    guard(move || match diophantine::consecutive_scheme(gamma) {
        Ok(s) => emit(out, DsScheme(s)),
        Err(e) => from_error(e),
    })
}

/// Copies rates, `a` and `b` (3 values each). Any output may be null.
///
/// # Safety
/// `scheme` must come from this library; non-null outputs must hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn ds_scheme_coefficients(
    scheme: *const DsScheme,
    rates: *mut u64,
    a: *mut i64,
    b: *mut i64,
) -> DsStatus {
    non_null!(scheme);
    let s = &(*scheme).0;
    for i in 0..3 {
        if !rates.is_null() {
            *rates.add(i) = s.rates()[i];
        }
        if !a.is_null() {
            *a.add(i) = s.a()[i];
        }
        if !b.is_null() {
            *b.add(i) = s.b()[i];
        }
    }
    DsStatus::Ok
}

/// # Safety
/// `scheme` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ds_scheme_free(scheme: *mut DsScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Largest sample index, times the largest rate, over lags `1..=K` and snapshots `1..=L`.
///
/// # Safety
/// `scheme` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_delay_bound(
    scheme: *const DsScheme,
    lags: u64,
    snapshots: u64,
    out: *mut u64,
) -> DsStatus {
    non_null!(scheme, out);
    let s = &(*scheme).0;
    guard(move || match diophantine::delay_bound(s, lags, snapshots) {
        Ok(v) => {
            *out = v;
            DsStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DsScheduleEntry {
    pub k: u64,
    pub l: u64,
    pub indices: [u64; 3],
    /// Zero-based slot whose sample is conjugated.
    pub conj_slot: u32,
}

/// # Safety
/// `scheme` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_build(
    scheme: *const DsScheme,
    lags: u64,
    snapshots: u64,
    out: *mut *mut DsSchedule,
) -> DsStatus {
    non_null!(scheme, out);
    let s = &(*scheme).0;
    guard(
        move || match diophantine::build_schedule(s, lags, snapshots) {
            Ok(sched) => emit(out, DsSchedule(sched)),
            Err(e) => from_error(e),
        },
    )
}

/// # Safety
/// `schedule` must come from this library; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_len(schedule: *const DsSchedule, len: *mut usize) -> DsStatus {
    non_null!(schedule, len);
    *len = (*schedule).0.entries().len();
    DsStatus::Ok
}

/// Entry `index`, ordered by `k` then `l`.
///
/// # Safety
/// `schedule` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_entry(
    schedule: *const DsSchedule,
    index: usize,
    out: *mut DsScheduleEntry,
) -> DsStatus {
    non_null!(schedule, out);
    let sched = &(*schedule).0;
    match sched.entries().get(index) {
        Some(e) => {
            *out = DsScheduleEntry {
                k: e.k,
                l: e.l,
                indices: e.indices,
                conj_slot: sched.conj_slot() as u32,
            };
            DsStatus::Ok
        }
        None => fail(
            DsStatus::InvalidArgument,
            format!(
                "entry {index} out of range ({} entries)",
                sched.entries().len()
            ),
        ),
    }
}

/// # Safety
/// `schedule` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_free(schedule: *mut DsSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Three-subarray design for pairwise-coprime `(p1, p2, q)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_array_design(
    p1: u64,
    p2: u64,
    q: u64,
    out: *mut *mut DsArray,
) -> DsStatus {
    non_null!(out);
    guard(move || match design_diophantine_array(p1, p2, q) {
        Ok(g) => emit(out, DsArray(g)),
        Err(e) => from_error(e),
    })
}

/// Co-prime baseline for coprime `(m1, m2)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_array_coprime(m1: u64, m2: u64, out: *mut *mut DsArray) -> DsStatus {
    non_null!(out);
    guard(move || match design_coprime_array(m1, m2) {
        Ok(g) => emit(out, DsArray(g)),
        Err(e) => from_error(e),
    })
}

/// Sorted sensor positions. `len` receives the sensor count; pass a null
/// `positions` to query it. Returns `BufferTooSmall` if `capacity` is short.
///
/// # Safety
/// `array` must come from this library; `positions` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn ds_array_positions(
    array: *const DsArray,
    positions: *mut i64,
    capacity: usize,
    len: *mut usize,
) -> DsStatus {
    non_null!(array, len);
    let p = (*array).0.positions();
    *len = p.len();
    if positions.is_null() {
        return DsStatus::Ok;
    }
    if capacity < p.len() {
        return fail(
            DsStatus::BufferTooSmall,
            format!("{} positions do not fit in {capacity}", p.len()),
        );
    }
    ptr::copy_nonoverlapping(p.as_ptr(), positions, p.len());
    DsStatus::Ok
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DsCoarrayReport {
    /// Largest `S` with every lag in `[−S, S]` present.
    pub span: i64,
    pub dof: i64,
    pub distinct_lags: u64,
    /// Zero for single-sensor geometries.
    pub min_spacing: i64,
    pub sensor_count: u64,
    pub formula_sensor_count: u64,
    /// `2·p1·p2·q + 1` or `2·M1·M2 + 1`.
    pub guaranteed_dof: i64,
}

/// # Safety
/// `array` must come from this library; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ds_array_coarray_report(
    array: *const DsArray,
    out: *mut DsCoarrayReport,
) -> DsStatus {
    non_null!(array, out);
    let g = &(*array).0;
    guard(move || {
        let r = coarray_lags(g);
        *out = DsCoarrayReport {
            span: r.span,
            dof: r.dof,
            distinct_lags: r.distinct_lags as u64,
            min_spacing: r.min_spacing.unwrap_or(0),
            sensor_count: r.sensor_count as u64,
            formula_sensor_count: r.formula_sensor_count,
            guaranteed_dof: r.guaranteed_dof().unwrap_or(0),
        };
        DsStatus::Ok
    })
}

/// # Safety
/// `array` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ds_array_free(array: *mut DsArray) {
    if !array.is_null() {
        drop(Box::from_raw(array));
    }
}

/// Estimates `order` frequencies (radians, ascending) from a moment sequence on
/// consecutive lags, using a `grid_points` grid over (−π, π].
///
/// # Safety
/// `re` and `im` must hold `len` values; `frequencies` must hold `order` values.
#[no_mangle]
pub unsafe extern "C" fn ds_estimate_frequencies(
    re: *const f64,
    im: *const f64,
    len: usize,
    order: usize,
    grid_points: usize,
    frequencies: *mut f64,
) -> DsStatus {
    non_null!(re, im, frequencies);
    let re = std::slice::from_raw_parts(re, len);
    let im = std::slice::from_raw_parts(im, len);
    let values: Vec<Complex64> = re
        .iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    guard(move || {
        let peaks = LagMomentSequence::from_values(3, 0, values).and_then(|seq| {
            estimate(
                &seq,
                order,
                GridSpec::Frequency {
                    points: grid_points,
                },
            )
        });
        match peaks {
            Ok(p) => {
                ptr::copy_nonoverlapping(p.locations.as_ptr(), frequencies, p.locations.len());
                DsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_status_codes() {
        assert_eq!(from_error(Error::Overflow("x")), DsStatus::Overflow);
        assert_eq!(from_error(Error::NotCovered(9)), DsStatus::NotCovered);
        assert_eq!(
            from_error(Error::DegenerateSpectrum {
                found: 0,
                wanted: 1
            }),
            DsStatus::Degenerate
        );
        let msg = unsafe { std::ffi::CStr::from_ptr(ds_last_error()) };
        assert!(msg.to_str().unwrap().contains("local maxima"));
    }

    #[test]
    fn panics_become_internal_errors() {
        assert_eq!(guard(|| panic!("boom")), DsStatus::Internal);
    }
}
