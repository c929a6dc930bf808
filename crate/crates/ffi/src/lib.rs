//! C interface. Spaces are opaque handles; every call returns a status code
//! and writes results through out-pointers. The message of the last failure
//! on the calling thread is available from `pl_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use porosity_lab::balls::{doubling_report, BallScope};
use porosity_lab::error::Error;
use porosity_lab::generators::{gen_cantor, gen_grid, gen_lacunary, snowflake_space};
use porosity_lab::holes::{hole_doubling_constant, hole_radius};
use porosity_lab::io::load_augmented_space;
use porosity_lab::muckenhoupt::{a1_constant, distance_weight};
use porosity_lab::porosity::{certify_porosity, CertifyOptions, PorosityStatus};
use porosity_lab::space::{validate_quasi_metric, AugmentedSpace, DistTable, Metric, Point};

/// Opaque space handle.
pub struct PlSpace(AugmentedSpace);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    /// The input is not a valid quasi-metric measure space.
    Validation = 4,
    /// Bad argument, unreadable file or malformed input.
    Config = 5,
    /// The computation itself failed (see `pl_last_error`).
    Compute = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlPorosity {
    Certified = 0,
    NotCertified = 2,
    Disproved = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn classify(e: &Error) -> PlStatus {
    let e = e.root();
    if e.is_validation() || matches!(e, Error::Parse { .. }) {
        PlStatus::Validation
    } else if matches!(
        e,
        Error::Config(_)
            | Error::Io(_)
            | Error::InvalidSpec(_)
            | Error::ParamOutOfRange(_)
            | Error::GammaOutOfRange { .. }
            | Error::NonPositiveRadius(_)
            | Error::UnknownPoint(_)
            | Error::NotASamplePoint(_)
            | Error::SnowflakeOnNonMetric(..)
    ) {
        PlStatus::Config
    } else {
        PlStatus::Compute
    }
}

fn guard(f: impl FnOnce() -> Result<(), PlStatusError>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PlStatus::Ok
        }
        Ok(Err(PlStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PlStatus::Panic
        }
    }
}

struct PlStatusError(PlStatus, String);

impl From<Error> for PlStatusError {
    fn from(e: Error) -> Self {
        PlStatusError(classify(&e), e.to_string())
    }
}

fn null() -> PlStatusError {
    PlStatusError(PlStatus::NullPointer, "null pointer argument".into())
}

unsafe fn space_ref<'a>(s: *const PlSpace) -> Result<&'a AugmentedSpace, PlStatusError> {
    s.as_ref().map(|s| &s.0).ok_or_else(null)
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), PlStatusError> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

unsafe fn put_space(out: *mut *mut PlSpace, s: AugmentedSpace) -> Result<(), PlStatusError> {
    put(out, Box::into_raw(Box::new(PlSpace(s))))
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSON or CSV space file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_load(path: *const c_char, out: *mut *mut PlSpace) -> PlStatus {
    guard(|| {
        if path.is_null() {
            return Err(null());
        }
        let path =
            CStr::from_ptr(path).to_str().map_err(|_| PlStatusError(PlStatus::Config, "path is not UTF-8".into()))?;
        put_space(out, load_augmented_space(path)?)
    })
}

/// Builds a space from weights and a dense row-major table over
/// `n_sample + n_obstacles` points. Sample ids are `0..n_sample`, obstacle
/// ids follow.
///
/// # Safety
/// `weights` must hold `n_sample` values and `table` `(n_sample +
/// n_obstacles)^2` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pl_space_from_table(
    n_sample: usize,
    n_obstacles: usize,
    weights: *const f64,
    table: *const f64,
    out: *mut *mut PlSpace,
) -> PlStatus {
    guard(|| {
        if weights.is_null() || table.is_null() {
            return Err(null());
        }
        let n = n_sample + n_obstacles;
        let w = std::slice::from_raw_parts(weights, n_sample).to_vec();
        let t = std::slice::from_raw_parts(table, n * n);
        let rows: Vec<Vec<f64>> = t.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let sample = (0..n_sample as u64).map(Point::new).collect();
        let obstacles = (n_sample as u64..n as u64).map(Point::new).collect();
        let s = AugmentedSpace::new(sample, w, obstacles, Metric::Table(DistTable::from_rows(&rows)?))?;
        validate_quasi_metric(&s)?;
        put_space(out, s)
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_cantor(ratio: f64, depth: u32, mesh_factor: u32, out: *mut *mut PlSpace) -> PlStatus {
    guard(|| put_space(out, gen_cantor(ratio, depth, mesh_factor)?))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_lacunary(depth: u32, out: *mut *mut PlSpace) -> PlStatus {
    guard(|| put_space(out, gen_lacunary(depth)?))
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_grid(
    dimension: usize,
    n_per_side: usize,
    measure_exponent: f64,
    out: *mut *mut PlSpace,
) -> PlStatus {
    guard(|| put_space(out, gen_grid(dimension, n_per_side, measure_exponent)?))
}

/// New space with distance `c * d^s`; the input handle is untouched.
///
/// # Safety
/// `space` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_space_snowflake(space: *const PlSpace, s: f64, c: f64, out: *mut *mut PlSpace) -> PlStatus {
    guard(|| {
        let sp = space_ref(space)?;
        put_space(out, snowflake_space(sp, s, c)?)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `space` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pl_space_free(space: *mut PlSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// # Safety
/// `space` must be a live handle, the out-pointers valid.
#[no_mangle]
pub unsafe extern "C" fn pl_space_size(
    space: *const PlSpace,
    n_sample: *mut usize,
    n_obstacles: *mut usize,
) -> PlStatus {
    guard(|| {
        let s = space_ref(space)?;
        put(n_sample, s.n_sample())?;
        put(n_obstacles, s.n_obstacles())
    })
}

/// Least triangular constant `K`.
///
/// # Safety
/// `space` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_triangular_constant(space: *const PlSpace, out: *mut f64) -> PlStatus {
    guard(|| put(out, validate_quasi_metric(space_ref(space)?)?))
}

/// Doubling constant `A` over every canonical ball.
///
/// # Safety
/// `space` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_doubling_constant(space: *const PlSpace, out: *mut f64) -> PlStatus {
    guard(|| put(out, doubling_report(space_ref(space)?, BallScope::Exhaustive).a))
}

/// Maximal hole of the ball `B(center, radius)`.
///
/// # Safety
/// `space` must be a live handle, `rho` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_hole_radius(space: *const PlSpace, center: u64, radius: f64, rho: *mut f64) -> PlStatus {
    guard(|| put(rho, hole_radius(space_ref(space)?, center, radius)?.rho))
}

/// Hole doubling constant over every canonical ball.
///
/// # Safety
/// `space` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_hole_doubling_constant(space: *const PlSpace, out: *mut f64) -> PlStatus {
    guard(|| put(out, hole_doubling_constant(space_ref(space)?, BallScope::Exhaustive)?.c))
}

/// A1 constant of `dist(., E)^(-alpha)`.
///
/// # Safety
/// `space` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pl_a1_constant(space: *const PlSpace, alpha: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let s = space_ref(space)?;
        let w = distance_weight(s, alpha)?;
        put(out, a1_constant(s, &w, BallScope::Exhaustive, 0)?.constant)
    })
}

/// Greedy porosity certification over every canonical ball.
/// `min_fraction` receives the smallest packed fraction found.
///
/// # Safety
/// `space` must be a live handle, the out-pointers valid.
#[no_mangle]
pub unsafe extern "C" fn pl_certify(
    space: *const PlSpace,
    sigma: f64,
    gamma: f64,
    verdict: *mut PlPorosity,
    min_fraction: *mut f64,
) -> PlStatus {
    guard(|| {
        if verdict.is_null() || min_fraction.is_null() {
            return Err(null());
        }
        let opts = CertifyOptions { detail_limit: 0, ..CertifyOptions::default() };
        let r = certify_porosity(space_ref(space)?, sigma, gamma, &opts)?;
        let v = match r.status {
            PorosityStatus::Certified => PlPorosity::Certified,
            PorosityStatus::NotCertified => PlPorosity::NotCertified,
            PorosityStatus::Disproved => PlPorosity::Disproved,
        };
        put(verdict, v)?;
        put(min_fraction, r.min_fraction)
    })
}
