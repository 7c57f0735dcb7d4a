//! C ABI over `landau-lab`.
//!
//! Objects are opaque handles created by `ll_*_new` style constructors and
//! released with the matching `ll_*_free`. Every fallible call returns an
//! [`LlStatus`]; the message of the last failure on the calling thread is
//! available through [`ll_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use landau_lab::coefficients::{self, Normalization};
use landau_lab::grid::{self, ScalarField, VelocityGrid};
use landau_lab::poincare;
use landau_lab::solver::{self, DtPolicy, Solver, SolverConfig, SolverState};
use landau_lab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    GammaOutOfRange = 4,
    NegativeField = 5,
    NoConvergence = 6,
    Stability = 7,
    Io = 8,
    Snapshot = 9,
    BufferTooSmall = 10,
    NotInitialized = 11,
    Panic = 12,
    Other = 13,
}

/// Coefficient fields available through [`ll_coefficient_field`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlCoefficient {
    /// Reaction coefficient `h`.
    H = 0,
    /// Trace `a = tr A`.
    A = 1,
    /// Smallest eigenvalue of `A`.
    AStar = 2,
    /// Drift potential.
    Potential = 3,
}

/// Velocity lattice.
pub struct LlGrid(VelocityGrid);

/// Density sampled on a lattice.
pub struct LlField(ScalarField);

/// Time stepper together with its current state.
pub struct LlSolver {
    solver: Solver,
    state: Option<SolverState>,
    dt: Option<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> LlStatus {
    match err {
        Error::InvalidGrid(_) | Error::Dimension(_) => LlStatus::InvalidGrid,
        Error::InvalidParameter { .. } | Error::ZeroField | Error::EmptyRegion | Error::Config(_) => {
            LlStatus::InvalidArgument
        }
        Error::GammaOutOfRange(_) => LlStatus::GammaOutOfRange,
        Error::NegativeField { .. } => LlStatus::NegativeField,
        Error::NoConvergence { .. } | Error::EigenFailure { .. } | Error::MassDrift { .. } => {
            LlStatus::NoConvergence
        }
        Error::Stability { .. } => LlStatus::Stability,
        Error::Io(_) => LlStatus::Io,
        Error::Snapshot(_) => LlStatus::Snapshot,
        _ => LlStatus::Other,
    }
}

/// Runs `body`, recording errors and containing panics.
fn guard(body: impl FnOnce() -> Result<(), LlStatus>) -> LlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside landau-lab");
            LlStatus::Panic
        }
    }
}

fn fail(err: Error) -> LlStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn invalid(msg: &str) -> LlStatus {
    set_error(msg);
    LlStatus::InvalidArgument
}

fn null(name: &str) -> LlStatus {
    set_error(format!("{name} is null"));
    LlStatus::NullPointer
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, LlStatus> {
    // SAFETY: the caller passes a live handle from this library or null.
    unsafe { p.as_ref() }.ok_or_else(|| null(name))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, LlStatus> {
    // SAFETY: as for `borrow`, and the handle is not shared across threads.
    unsafe { p.as_mut() }.ok_or_else(|| null(name))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), LlStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and points to writable storage.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, LlStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    // SAFETY: `p` is a NUL-terminated string owned by the caller.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str().map(PathBuf::from).map_err(|_| invalid("path is not UTF-8"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, or 0 when there is
/// no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ll_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: `buf` has room for `len` bytes and `n < len`.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Creates a `dim`-dimensional lattice on `[-half_extent, half_extent]^dim`
/// with `points` cells per axis.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ll_grid_new(dim: usize, half_extent: f64, points: usize, out: *mut *mut LlGrid) -> LlStatus {
    guard(|| {
        let g = VelocityGrid::new(dim, half_extent, points).map_err(fail)?;
        unsafe { store(out, LlGrid(g)) }
    })
}

/// Number of nodes of the lattice, 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_grid_len(grid: *const LlGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.len())
}

/// # Safety
/// `grid` must be null or a handle from [`ll_grid_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ll_grid_free(grid: *mut LlGrid) {
    if !grid.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Unit-mass Maxwellian with unit temperature.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_field_maxwellian(grid: *const LlGrid, out: *mut *mut LlField) -> LlStatus {
    guard(|| {
        let g = unsafe { borrow(grid, "grid") }?;
        unsafe { store(out, LlField(grid::maxwellian(&g.0))) }
    })
}

/// Field from `len` nodal values in row-major order (last axis fastest).
///
/// # Safety
/// `grid` must be a live handle, `values` must point to `len` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ll_field_from_values(
    grid: *const LlGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut LlField,
) -> LlStatus {
    guard(|| {
        let g = unsafe { borrow(grid, "grid") }?;
        if values.is_null() {
            return Err(null("values"));
        }
        // SAFETY: the caller guarantees `len` readable doubles.
        let v = unsafe { std::slice::from_raw_parts(values, len) }.to_vec();
        let f = ScalarField::from_values(&g.0, v).map_err(fail)?;
        unsafe { store(out, LlField(f)) }
    })
}

/// Reads a snapshot file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_field_load(path: *const c_char, out: *mut *mut LlField) -> LlStatus {
    guard(|| {
        let p = unsafe { path_arg(path) }?;
        let f = grid::load_snapshot(&p).map_err(fail)?;
        unsafe { store(out, LlField(f)) }
    })
}

/// Writes a snapshot file.
///
/// # Safety
/// `field` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ll_field_save(field: *const LlField, path: *const c_char) -> LlStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field") }?;
        let p = unsafe { path_arg(path) }?;
        grid::save_snapshot(&p, &f.0).map_err(fail)
    })
}

/// Number of nodal values, 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_field_len(field: *const LlField) -> usize {
    unsafe { field.as_ref() }.map_or(0, |f| f.0.len())
}

/// Copies the nodal values into `out`, which must hold at least
/// [`ll_field_len`] doubles.
///
/// # Safety
/// `field` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ll_field_values(field: *const LlField, out: *mut f64, len: usize) -> LlStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field") }?;
        copy_out(&f.0.values, out, len)
    })
}

fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), LlStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < values.len() {
        set_error(format!("buffer holds {len} values, {} needed", values.len()));
        return Err(LlStatus::BufferTooSmall);
    }
    // SAFETY: `out` has room for `len >= values.len()` doubles.
    unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

/// Integral of the field over the whole lattice.
///
/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_field_mass(field: *const LlField, out: *mut f64) -> LlStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field") }?;
        let m = grid::integrate(&f.0, &grid::Region::All).map_err(fail)?;
        write_scalar(out, m)
    })
}

fn write_scalar(out: *mut f64, v: f64) -> Result<(), LlStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and writable.
    unsafe { *out = v };
    Ok(())
}

/// # Safety
/// `field` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ll_field_free(field: *mut LlField) {
    if !field.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Computes one coefficient field of `field` for the interaction exponent
/// `gamma` into `out`.
///
/// # Safety
/// `field` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ll_coefficient_field(
    field: *const LlField,
    gamma: f64,
    which: LlCoefficient,
    out: *mut f64,
    len: usize,
) -> LlStatus {
    guard(|| {
        let f = &unsafe { borrow(field, "field") }?.0;
        let values = match which {
            LlCoefficient::H => coefficients::h_field(f, gamma),
            LlCoefficient::A => coefficients::a_field(f, gamma),
            LlCoefficient::AStar => coefficients::a_star_field(f, gamma),
            LlCoefficient::Potential => coefficients::potential_field(f, gamma),
        }
        .map_err(fail)?;
        copy_out(&values.values, out, len)
    })
}

/// Top eigenvalue `Lambda_f(eps)` of the epsilon-Poincaré operator.
///
/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_lambda(field: *const LlField, gamma: f64, eps: f64, out: *mut f64) -> LlStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field") }?;
        write_scalar(out, poincare::lambda_f(&f.0, gamma, eps).map_err(fail)?)
    })
}

/// Ratio of the two sides of the nonlinear Coulomb inequality for power `p`
/// (0 when both sides vanish).
///
/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_gks_ratio(field: *const LlField, p: f64, out: *mut f64) -> LlStatus {
    guard(|| {
        let f = unsafe { borrow(field, "field") }?;
        let r = poincare::gks_check(&f.0, p).map_err(fail)?;
        write_scalar(out, r.ratio.unwrap_or(0.0))
    })
}

/// Creates an IMEX solver. A positive `dt` fixes the step; otherwise the
/// step is chosen from the coefficients.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_new(grid: *const LlGrid, gamma: f64, dt: f64, out: *mut *mut LlSolver) -> LlStatus {
    guard(|| {
        let g = unsafe { borrow(grid, "grid") }?;
        if dt.is_nan() {
            return Err(invalid("dt is NaN"));
        }
        let mut cfg = SolverConfig::default();
        let fixed = (dt > 0.0).then_some(dt);
        if let Some(dt) = fixed {
            cfg.dt = DtPolicy::Fixed { dt };
        }
        let solver = Solver::new(&g.0, gamma, cfg).map_err(fail)?;
        unsafe {
            store(
                out,
                LlSolver {
                    solver,
                    state: None,
                    dt: fixed,
                },
            )
        }
    })
}

/// Sets the initial density; resets time and ledger.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_init(solver: *mut LlSolver, field: *const LlField) -> LlStatus {
    guard(|| {
        let s = unsafe { borrow_mut(solver, "solver") }?;
        let f = unsafe { borrow(field, "field") }?;
        s.state = Some(s.solver.init(f.0.clone()).map_err(fail)?);
        Ok(())
    })
}

/// Advances `steps` time steps.
///
/// # Safety
/// `solver` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_step(solver: *mut LlSolver, steps: usize) -> LlStatus {
    guard(|| {
        let s = unsafe { borrow_mut(solver, "solver") }?;
        let Some(state) = s.state.as_mut() else {
            set_error("solver has no initial density");
            return Err(LlStatus::NotInitialized);
        };
        for _ in 0..steps {
            let dt = match s.dt {
                Some(dt) => dt,
                None => s.solver.auto_dt().map_err(fail)?,
            };
            s.solver.step(state, dt).map_err(fail)?;
        }
        Ok(())
    })
}

/// Current time, or NaN before initialisation.
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_time(solver: *const LlSolver) -> f64 {
    unsafe { solver.as_ref() }
        .and_then(|s| s.state.as_ref())
        .map_or(f64::NAN, |st| st.time)
}

/// Entropy `int f log f` of the current density.
///
/// # Safety
/// `solver` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_entropy(solver: *const LlSolver, out: *mut f64) -> LlStatus {
    guard(|| {
        let s = unsafe { borrow(solver, "solver") }?;
        let Some(state) = s.state.as_ref() else {
            set_error("solver has no initial density");
            return Err(LlStatus::NotInitialized);
        };
        write_scalar(out, solver::entropy(&state.f))
    })
}

/// Copies the current density into a new field handle.
///
/// # Safety
/// `solver` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_field(solver: *const LlSolver, out: *mut *mut LlField) -> LlStatus {
    guard(|| {
        let s = unsafe { borrow(solver, "solver") }?;
        let Some(state) = s.state.as_ref() else {
            set_error("solver has no initial density");
            return Err(LlStatus::NotInitialized);
        };
        unsafe { store(out, LlField(state.f.clone())) }
    })
}

/// # Safety
/// `solver` must be null or a handle from [`ll_solver_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ll_solver_free(solver: *mut LlSolver) {
    if !solver.is_null() {
        // SAFETY: the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(solver) });
    }
}

/// Whether `gamma` is an admissible interaction exponent in dimension `dim`.
#[no_mangle]
pub extern "C" fn ll_gamma_supported(dim: usize, gamma: f64) -> bool {
    Normalization::new(dim, gamma).is_ok()
}
