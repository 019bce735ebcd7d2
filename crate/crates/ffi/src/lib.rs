//! C ABI over the `hjdefect` solvers.
//!
//! Every function returns an [`HjStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read with
//! [`hj_last_error`]. Handles are opaque and released with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use hjdefect::effective::{analytic_hbar_1d, effective_hamiltonian_at, DEFAULT_LAMBDAS};
use hjdefect::ergodic::{analytic_e_1d, ergodic_constant};
use hjdefect::fields::{DefectCost, HamiltonianSpec, Kinetic, PeriodicCost};
use hjdefect::grid::GridField;
use hjdefect::oracles::u_eps_flat;
use hjdefect::solver::{solve_eps_problem, SolveOptions};
use hjdefect::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjStatus {
    Ok = 0,
    Config = 1,
    Domain = 2,
    Precondition = 3,
    Inconsistent = 4,
    NotConverged = 5,
    WindowTooSmall = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjKinetic {
    /// `|p|`
    Norm = 0,
    /// `sqrt(1 + |p|^2) - 1`
    Relativistic = 1,
}

/// Hamiltonian `K(p) - l_per(x) - l_0(x)`.
pub struct HjSpec {
    inner: HamiltonianSpec,
}

/// Values on a uniform grid.
pub struct HjField {
    inner: GridField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HjStatus {
    match e.root() {
        Error::Config(_) | Error::Json(_) => HjStatus::Config,
        Error::Domain(_) => HjStatus::Domain,
        Error::Precondition(_) => HjStatus::Precondition,
        Error::Inconsistent(_) => HjStatus::Inconsistent,
        Error::NotConverged { .. } => HjStatus::NotConverged,
        Error::WindowTooSmall { .. } => HjStatus::WindowTooSmall,
        _ => HjStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (HjStatus, String)>) -> HjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HjStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HjStatus::Panic
        }
    }
}

fn lift(e: Error) -> (HjStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HjStatus, String) {
    (HjStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), (HjStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

unsafe fn read_slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (HjStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

fn environment(dim: usize, amplitude: f64) -> PeriodicCost {
    match (amplitude == 0.0, dim) {
        (true, _) => PeriodicCost::zero(dim),
        (false, 1) => PeriodicCost::sine(amplitude, 0.0),
        (false, _) => PeriodicCost::sine_2d(amplitude),
    }
}

fn defect(dim: usize, depth: f64) -> DefectCost {
    if depth > 0.0 {
        DefectCost::well(dim, depth)
    } else if depth < 0.0 {
        DefectCost::hump(dim, -depth)
    } else {
        DefectCost::none(dim)
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn hj_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Separable Hamiltonian in dimension 1 or 2. The environment is
/// `amplitude * sin(2 pi y)` (summed over axes in 2D, zero if `amplitude`
/// is 0). `depth > 0` adds a cos² well of that depth, `depth < 0` a hump of
/// height `-depth`, `0` no defect.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_spec_new(
    dim: u32,
    kinetic: HjKinetic,
    amplitude: f64,
    depth: f64,
    out: *mut *mut HjSpec,
) -> HjStatus {
    guard(|| {
        if dim != 1 && dim != 2 {
            return Err((HjStatus::Config, format!("dimension must be 1 or 2, got {dim}")));
        }
        if !amplitude.is_finite() || !depth.is_finite() {
            return Err((HjStatus::Domain, "non-finite parameter".into()));
        }
        let d = dim as usize;
        let k = match kinetic {
            HjKinetic::Norm => Kinetic::Norm,
            HjKinetic::Relativistic => Kinetic::Relativistic,
        };
        let spec = HamiltonianSpec::separable(k, environment(d, amplitude), defect(d, depth)).map_err(lift)?;
        write(out, Box::into_raw(Box::new(HjSpec { inner: spec })))
    })
}

/// # Safety
/// `spec` must come from `hj_spec_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hj_spec_free(spec: *mut HjSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Closed-form `H̄(p)` for `|p| - amplitude*sin(2 pi y)` in 1D.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_analytic_hbar_1d(amplitude: f64, p: f64, out: *mut f64) -> HjStatus {
    guard(|| write(out, analytic_hbar_1d(&environment(1, amplitude), p).map_err(lift)?))
}

/// Closed-form ergodic constant in 1D for a downward well of `depth`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_analytic_ergodic_1d(amplitude: f64, depth: f64, out: *mut f64) -> HjStatus {
    guard(|| write(out, analytic_e_1d(&environment(1, amplitude), &defect(1, depth)).map_err(lift)?))
}

/// Exact single-defect solution at `x` in a flat 1D environment (`α = 1`).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_u_eps_flat(depth: f64, eps: f64, x: f64, out: *mut f64) -> HjStatus {
    guard(|| write(out, u_eps_flat(&defect(1, depth), eps, x).map_err(lift)?))
}

/// Numeric `H̄(p)`; `p` has `dim` entries.
///
/// # Safety
/// `spec` must be a live handle, `p` must hold `dim` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hj_effective_hamiltonian(
    spec: *const HjSpec,
    p: *const f64,
    torus_nodes: usize,
    out: *mut f64,
) -> HjStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        let p = read_slice(p, spec.inner.dim(), "p")?;
        let torus = GridField::torus(spec.inner.dim(), torus_nodes).map_err(lift)?;
        let est = effective_hamiltonian_at(&spec.inner, p, &DEFAULT_LAMBDAS, &torus).map_err(lift)?;
        write(out, est.value)
    })
}

/// Ergodic constant of the defect from a sweep of `n` increasing radii.
///
/// # Safety
/// `spec` must be a live handle, `radii` must hold `n` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hj_ergodic_constant(
    spec: *const HjSpec,
    radii: *const f64,
    n: usize,
    h: f64,
    out: *mut f64,
) -> HjStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        let radii = read_slice(radii, n, "radii")?;
        let est = ergodic_constant(&spec.inner, radii, &DEFAULT_LAMBDAS, h).map_err(lift)?;
        write(out, est.value)
    })
}

/// Solves `α u + H(x/ε, Du) = 0` on `[-half_width, half_width]^d` with
/// spacing `h`.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_solve_eps(
    spec: *const HjSpec,
    alpha: f64,
    eps: f64,
    half_width: f64,
    h: f64,
    out: *mut *mut HjField,
) -> HjStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        let grid = GridField::boxed(spec.inner.dim(), half_width, h).map_err(lift)?;
        let (u, _) = solve_eps_problem(&spec.inner, alpha, eps, &grid, &SolveOptions::default()).map_err(lift)?;
        write(out, Box::into_raw(Box::new(HjField { inner: u })))
    })
}

/// Number of nodes (including inactive ones).
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_field_len(field: *const HjField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.len())
}

/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_field_dim(field: *const HjField) -> u32 {
    field.as_ref().map_or(0, |f| f.inner.dim as u32)
}

/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_field_spacing(field: *const HjField) -> f64 {
    field.as_ref().map_or(f64::NAN, |f| f.inner.h)
}

/// Copies all node values into `buf`, which must hold `hj_field_len` doubles.
///
/// # Safety
/// `field` must be a live handle and `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hj_field_values(field: *const HjField, buf: *mut f64, cap: usize) -> HjStatus {
    guard(|| {
        let f = &field.as_ref().ok_or_else(|| null("field"))?.inner;
        if cap < f.len() {
            return Err((HjStatus::Config, format!("buffer holds {cap} values, field has {}", f.len())));
        }
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(f.values.as_ptr(), buf, f.len());
        Ok(())
    })
}

/// Coordinates of node `index` into `xy[0..2]` (second entry 0 in 1D).
///
/// # Safety
/// `field` must be a live handle and `xy` must hold 2 doubles.
#[no_mangle]
pub unsafe extern "C" fn hj_field_coords(field: *const HjField, index: usize, xy: *mut f64) -> HjStatus {
    guard(|| {
        let f = &field.as_ref().ok_or_else(|| null("field"))?.inner;
        if index >= f.len() {
            return Err((HjStatus::Domain, format!("node {index} out of range")));
        }
        if xy.is_null() {
            return Err(null("xy"));
        }
        let c = f.coords(index);
        xy.write(c[0]);
        xy.add(1).write(c[1]);
        Ok(())
    })
}

/// Interpolated value at `x` (`dim` entries).
///
/// # Safety
/// `field` must be a live handle, `x` must hold `dim` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hj_field_eval(field: *const HjField, x: *const f64, out: *mut f64) -> HjStatus {
    guard(|| {
        let f = &field.as_ref().ok_or_else(|| null("field"))?.inner;
        let x = read_slice(x, f.dim, "x")?;
        let v = f.interpolate(x).ok_or_else(|| (HjStatus::Domain, format!("point {x:?} is outside the grid")))?;
        write(out, v)
    })
}

/// # Safety
/// `field` must come from `hj_solve_eps` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hj_field_free(field: *mut HjField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}
