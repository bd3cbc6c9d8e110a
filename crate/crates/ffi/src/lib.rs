//! C ABI over `rpl-core`.
//!
//! Every fallible call returns an [`RplStatus`]; on failure the message is
//! kept per thread and read back with [`rpl_last_error`]. Measures and
//! sweep results are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rpl_core::dimension::{sweep, theoretical_bounds, DyadicRange, SweepReport};
use rpl_core::fractal::{generate_cantor_product, generate_plane_slice, DiscreteMeasure, MeasureSpec};
use rpl_core::geometry::{Angle, PlaneHeight, Point3};
use rpl_core::multiplicity::{self, build_index, default_cell_size, ExperimentConfig};
use rpl_core::tangency::count_tangent_pairs;
use rpl_core::{io, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RplStatus {
    Ok = 0,
    /// A required pointer argument was null or a string was not UTF-8.
    BadArgument = 1,
    InvalidParameter = 2,
    Degenerate = 3,
    Io = 4,
    Format = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Lower-bound curves at one dimension.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RplBounds {
    pub new_bound: f64,
    pub oberlin: f64,
    pub jjll: f64,
    /// 1 when `oberlin` comes from the extension below `s = 1`.
    pub oberlin_extended: u8,
}

pub struct RplMeasure {
    inner: DiscreteMeasure,
}

pub struct RplSweep {
    inner: SweepReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Bad(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RplStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RplStatus::Ok,
        Ok(Err(Fail::Bad(what))) => {
            set_error(format!("bad argument: {what}"));
            RplStatus::BadArgument
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            match e {
                Error::InvalidParameter { .. } => RplStatus::InvalidParameter,
                Error::Degenerate(_) => RplStatus::Degenerate,
                Error::Io(_) => RplStatus::Io,
                Error::Format { .. } | Error::Json(_) => RplStatus::Format,
            }
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            RplStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Bad(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Bad(what))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Bad("path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail::Bad("path is not UTF-8"))
}

fn boxed(m: DiscreteMeasure) -> *mut RplMeasure {
    Box::into_raw(Box::new(RplMeasure { inner: m }))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn rpl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rpl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Uniform measure on a depth-`depth` Cantor product.
///
/// # Safety
/// `out_measure` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_cantor(
    sx: f64,
    sy: f64,
    sr: f64,
    depth: u32,
    seed: u64,
    out_measure: *mut *mut RplMeasure,
) -> RplStatus {
    guard(|| {
        let o = out(out_measure, "out_measure is null")?;
        *o = boxed(generate_cantor_product(sx, sy, sr, depth, seed)?);
        Ok(())
    })
}

/// Lattice sample of a horizontal plane slice, `per_side²` atoms.
///
/// # Safety
/// `out_measure` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_plane(per_side: u32, seed: u64, out_measure: *mut *mut RplMeasure) -> RplStatus {
    guard(|| {
        let o = out(out_measure, "out_measure is null")?;
        *o = boxed(generate_plane_slice(per_side, seed)?);
        Ok(())
    })
}

/// Measure from `n` atoms `(x1[i], x2[i], r[i])` with weights `w[i]`
/// summing to 1. The result has generation scale 0.
///
/// # Safety
/// The four arrays must each hold `n` values; `out_measure` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_from_arrays(
    x1: *const f64,
    x2: *const f64,
    r: *const f64,
    w: *const f64,
    n: usize,
    out_measure: *mut *mut RplMeasure,
) -> RplStatus {
    guard(|| {
        let o = out(out_measure, "out_measure is null")?;
        if x1.is_null() || x2.is_null() || r.is_null() || w.is_null() {
            return Err(Fail::Bad("coordinate or weight array is null"));
        }
        let (x1, x2, r, w) = (
            std::slice::from_raw_parts(x1, n),
            std::slice::from_raw_parts(x2, n),
            std::slice::from_raw_parts(r, n),
            std::slice::from_raw_parts(w, n),
        );
        let points = (0..n)
            .map(|i| Point3::new(x1[i], x2[i], r[i]))
            .collect::<Result<Vec<_>, _>>()?;
        *o = boxed(DiscreteMeasure::new(points, w.to_vec(), 0.0, 0, MeasureSpec::External)?);
        Ok(())
    })
}

/// Reads a measure CSV and its metadata sidecar if present.
///
/// # Safety
/// `csv_path` must be a NUL-terminated string; `out_measure` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_read(csv_path: *const c_char, out_measure: *mut *mut RplMeasure) -> RplStatus {
    guard(|| {
        let o = out(out_measure, "out_measure is null")?;
        *o = boxed(io::read_measure(path(csv_path)?)?);
        Ok(())
    })
}

/// # Safety
/// `measure` must come from this library; `csv_path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_write(measure: *const RplMeasure, csv_path: *const c_char) -> RplStatus {
    guard(|| {
        let m = deref(measure, "measure is null")?;
        io::write_measure(&m.inner, path(csv_path)?)?;
        Ok(())
    })
}

/// Number of atoms, 0 for a null handle.
///
/// # Safety
/// `measure` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_len(measure: *const RplMeasure) -> usize {
    measure.as_ref().map_or(0, |m| m.inner.len())
}

/// # Safety
/// `measure` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_generation_scale(measure: *const RplMeasure) -> f64 {
    measure.as_ref().map_or(f64::NAN, |m| m.inner.generation_scale())
}

/// Copies atom `i` into `xyzw` as `(x1, x2, r, w)`.
///
/// # Safety
/// `measure` must come from this library; `xyzw` must hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_atom(measure: *const RplMeasure, i: usize, xyzw: *mut f64) -> RplStatus {
    guard(|| {
        let m = deref(measure, "measure is null")?;
        if xyzw.is_null() {
            return Err(Fail::Bad("xyzw is null"));
        }
        let p = m.inner.points().get(i).ok_or(Fail::Bad("atom index out of range"))?;
        let v = [p.x[0], p.x[1], p.r, m.inner.weights()[i]];
        ptr::copy_nonoverlapping(v.as_ptr(), xyzw, 4);
        Ok(())
    })
}

/// # Safety
/// `measure` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rpl_measure_free(measure: *mut RplMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Tube mass `μ{z′ : |π_θ(z) − π_θ(z′)| ≤ δ}` at `z = (x1, x2, r)`.
///
/// # Safety
/// `measure` must come from this library; `out_mass` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rpl_m_pi(
    measure: *const RplMeasure,
    t: f64,
    theta: f64,
    x1: f64,
    x2: f64,
    r: f64,
    delta: f64,
    out_mass: *mut f64,
) -> RplStatus {
    guard(|| {
        let m = deref(measure, "measure is null")?;
        let o = out(out_mass, "out_mass is null")?;
        let t = PlaneHeight::new(t)?;
        let z = Point3::new(x1, x2, r)?;
        let index = build_index(&m.inner, default_cell_size(&m.inner, delta))?;
        *o = multiplicity::m_pi(&m.inner, &index, t, Angle::new(theta), &z, delta)?;
        Ok(())
    })
}

/// Unordered pairs with `Δ ≤ 2δ` and `τ ≤ |z − z′| < 2τ`, by count and by
/// product mass.
///
/// # Safety
/// `measure` must come from this library; both outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn rpl_count_tangent_pairs(
    measure: *const RplMeasure,
    delta: f64,
    tau: f64,
    out_pairs: *mut u64,
    out_mass: *mut f64,
) -> RplStatus {
    guard(|| {
        let m = deref(measure, "measure is null")?;
        let op = out(out_pairs, "out_pairs is null")?;
        let om = out(out_mass, "out_mass is null")?;
        let index = build_index(&m.inner, default_cell_size(&m.inner, delta))?;
        let c = count_tangent_pairs(&m.inner, &index, delta, tau)?;
        *op = c.pair_count;
        *om = c.weighted_mass;
        Ok(())
    })
}

/// Mass of the high-multiplicity set at one scale. `theta_samples = 0`
/// selects the default `⌈64/δ⌉`.
///
/// # Safety
/// `measure` must come from this library; `out_z_mass` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rpl_high_multiplicity(
    measure: *const RplMeasure,
    t: f64,
    s: f64,
    kappa: f64,
    eta: f64,
    delta: f64,
    theta_samples: usize,
    out_z_mass: *mut f64,
) -> RplStatus {
    guard(|| {
        let m = deref(measure, "measure is null")?;
        let o = out(out_z_mass, "out_z_mass is null")?;
        let config = ExperimentConfig {
            s,
            kappa,
            eta,
            delta,
            theta_samples: (theta_samples > 0).then_some(theta_samples),
        };
        let t = PlaneHeight::new(t)?;
        *o = multiplicity::high_multiplicity_scan(&m.inner, t, &config)?.z_mass;
        Ok(())
    })
}

/// Per-angle box dimensions over scales `2^-finest ..= 2^-coarsest`.
///
/// # Safety
/// `measure` must come from this library; `out_sweep` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rpl_sweep(
    measure: *const RplMeasure,
    t: f64,
    theta_count: usize,
    finest: u32,
    coarsest: u32,
    out_sweep: *mut *mut RplSweep,
) -> RplStatus {
    guard(|| {
        let m = deref(measure, "measure is null")?;
        let o = out(out_sweep, "out_sweep is null")?;
        let t = PlaneHeight::new(t)?;
        let rep = sweep(&m.inner, t, theta_count, DyadicRange::new(finest, coarsest)?)?;
        *o = Box::into_raw(Box::new(RplSweep { inner: rep }));
        Ok(())
    })
}

/// # Safety
/// `sweep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rpl_sweep_len(sweep: *const RplSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.inner.dims.len())
}

/// Copies up to `cap` `(theta, dim)` rows into `thetas` and `dims`; returns
/// the number written.
///
/// # Safety
/// `sweep` must come from this library; both buffers must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn rpl_sweep_copy(sweep: *const RplSweep, thetas: *mut f64, dims: *mut f64, cap: usize) -> usize {
    let Some(s) = sweep.as_ref() else { return 0 };
    if thetas.is_null() || dims.is_null() {
        return 0;
    }
    let n = cap.min(s.inner.dims.len());
    for k in 0..n {
        *thetas.add(k) = s.inner.theta_grid[k].radians();
        *dims.add(k) = s.inner.dims[k];
    }
    n
}

/// # Safety
/// `sweep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rpl_sweep_median(sweep: *const RplSweep) -> f64 {
    sweep.as_ref().map_or(f64::NAN, |s| s.inner.percentiles.median)
}

/// Share of angles with estimate at least `level`.
///
/// # Safety
/// `sweep` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn rpl_sweep_fraction_at_least(sweep: *const RplSweep, level: f64) -> f64 {
    sweep.as_ref().map_or(f64::NAN, |s| s.inner.fraction_at_least(level))
}

/// # Safety
/// `sweep` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rpl_sweep_free(sweep: *mut RplSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// # Safety
/// `out_bounds` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rpl_theoretical_bounds(s: f64, out_bounds: *mut RplBounds) -> RplStatus {
    guard(|| {
        let o = out(out_bounds, "out_bounds is null")?;
        let b = theoretical_bounds(s)?;
        *o = RplBounds {
            new_bound: b.new,
            oberlin: b.oberlin,
            jjll: b.jjll,
            oberlin_extended: u8::from(b.oberlin_extended),
        };
        Ok(())
    })
}
