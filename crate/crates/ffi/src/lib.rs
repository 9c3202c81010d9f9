//! C ABI over `jumpset`.
//!
//! Grids are opaque `JsGrid` handles owned by the caller and released with
//! [`js_grid_free`]. Every fallible function returns a [`JsStatus`]; on
//! failure a message is available from [`js_last_error`] on the same thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use jumpset::classify::{classify_point, ClassifyConfig, PointClass};
use jumpset::decompose::{cone_from_params, in_cone, verify_cone_property, ConeSpec};
use jumpset::oscillation::{osc_stats, weighted_median};
use jumpset::{phi_apply, read_grid, write_grid, Ball, Error, GridFunction};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    OutOfDomain = 4,
    DimensionMismatch = 5,
    NonFinite = 6,
    DegenerateCone = 7,
    Io = 8,
    Format = 9,
    BufferTooSmall = 10,
    Panic = 255,
}

/// Grey levels of the point classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsClassCode {
    ApproxContinuous = 0,
    Jump = 64,
    SingularNonJump = 128,
    NonConvergent = 192,
    Insufficient = 255,
}

/// Opaque grid handle.
pub struct JsGrid(GridFunction);

/// Classifier thresholds. `value_range <= 0` means "use the data range".
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct JsClassifyConfig {
    pub lattice_resolution: usize,
    pub sigma: f64,
    pub max_radius_cells: f64,
    pub min_radius_cells: f64,
    pub boundary_fraction: f64,
    pub tol_cauchy: f64,
    pub tol_const: f64,
    pub tol_jump: f64,
    pub sep_min: f64,
    pub value_range: f64,
}

/// Classification of one point. Fields not used by `code` are zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct JsPointClass {
    pub code: JsClassCode,
    /// Limit value for approximately continuous points.
    pub value: f64,
    pub a: f64,
    pub b: f64,
    /// Jump normal, padded with zeros beyond the grid dimension.
    pub normal: [f64; 3],
    pub residual: f64,
    pub osc_of_limit: f64,
}

/// Exclusion cone of a ball `B_rho(z0)`; vectors padded with zeros.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct JsCone {
    pub dim: usize,
    pub z0: [f64; 3],
    pub axis: [f64; 3],
    pub z0_norm: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub eps: f64,
    pub sin_half_aperture: f64,
    pub lipschitz: f64,
    pub range: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> JsStatus {
    match e {
        Error::OutOfDomain { .. } | Error::RadiusTooSmall { .. } => JsStatus::OutOfDomain,
        Error::DimensionMismatch { .. } | Error::DimensionUnsupported(_) | Error::LatticeMismatch => {
            JsStatus::DimensionMismatch
        }
        Error::InvalidGrid(_) => JsStatus::InvalidGrid,
        Error::NonFiniteValues => JsStatus::NonFinite,
        Error::DegenerateCone(_) => JsStatus::DegenerateCone,
        Error::Io { .. } => JsStatus::Io,
        Error::Format { .. } | Error::Json(_) => JsStatus::Format,
        _ => JsStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (JsStatus, String)>) -> JsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            JsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            JsStatus::Panic
        }
    }
}

fn lib(e: Error) -> (JsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (JsStatus, String) {
    (JsStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (JsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (JsStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn grid_ref<'a>(g: *const JsGrid) -> Result<&'a GridFunction, (JsStatus, String)> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("grid"))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, (JsStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (JsStatus::InvalidArgument, "path is not UTF-8".into()))
}

fn boxed(g: GridFunction) -> *mut JsGrid {
    Box::into_raw(Box::new(JsGrid(g)))
}

fn pad3(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len().min(3)].copy_from_slice(&v[..v.len().min(3)]);
    out
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn js_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn js_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a grid from row-major `values` (`len` = product of `shape`).
///
/// # Safety
/// `shape` and `origin` must point to `dim` elements and `values` to `len`.
#[no_mangle]
pub unsafe extern "C" fn js_grid_new(
    dim: usize,
    shape: *const usize,
    spacing: f64,
    origin: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut JsGrid,
) -> JsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let shape = slice_in(shape, dim, "shape")?.to_vec();
        let origin = slice_in(origin, dim, "origin")?.to_vec();
        let values = slice_in(values, len, "values")?.to_vec();
        *out = boxed(GridFunction::new(shape, spacing, origin, values).map_err(lib)?);
        Ok(())
    })
}

/// Reads a GF1 grid from its header path.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn js_grid_read(path: *const c_char, out: *mut *mut JsGrid) -> JsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(read_grid(path_arg(path)?).map_err(lib)?);
        Ok(())
    })
}

/// Writes a GF1 header and its payload next to it.
///
/// # Safety
/// `grid` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn js_grid_write(grid: *const JsGrid, path: *const c_char) -> JsStatus {
    guard(|| write_grid(grid_ref(grid)?, path_arg(path)?).map_err(lib))
}

/// Releases a grid. Null is ignored.
///
/// # Safety
/// `grid` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn js_grid_free(grid: *mut JsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Grid dimension, or 0 for null.
///
/// # Safety
/// `grid` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn js_grid_dim(grid: *const JsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.dim())
}

/// Number of samples, or 0 for null.
///
/// # Safety
/// `grid` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn js_grid_len(grid: *const JsGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Copies the samples into `buf`, which must hold `js_grid_len` values.
///
/// # Safety
/// `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn js_grid_values(grid: *const JsGrid, buf: *mut f64, cap: usize) -> JsStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        if cap < g.len() {
            return Err((JsStatus::BufferTooSmall, format!("need {} values, got {cap}", g.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, g.len()).copy_from_slice(g.values());
        Ok(())
    })
}

/// New grid holding `arctan` of the samples (with `±inf -> ±pi/2`).
///
/// # Safety
/// `grid` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn js_grid_phi_apply(grid: *const JsGrid, out: *mut *mut JsGrid) -> JsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        *out = boxed(phi_apply(grid_ref(grid)?));
        Ok(())
    })
}

/// Fills `out` with the default thresholds.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn js_classify_config_default(out: *mut JsClassifyConfig) -> JsStatus {
    guard(|| {
        let d = ClassifyConfig::default();
        *out_ref(out, "out")? = JsClassifyConfig {
            lattice_resolution: d.lattice_resolution,
            sigma: d.sigma,
            max_radius_cells: d.max_radius_cells,
            min_radius_cells: d.min_radius_cells,
            boundary_fraction: d.boundary_fraction,
            tol_cauchy: d.tol_cauchy,
            tol_const: d.tol_const,
            tol_jump: d.tol_jump,
            sep_min: d.sep_min,
            value_range: 0.0,
        };
        Ok(())
    })
}

fn config_from(c: &JsClassifyConfig) -> ClassifyConfig {
    ClassifyConfig {
        lattice_resolution: c.lattice_resolution,
        sigma: c.sigma,
        max_radius_cells: c.max_radius_cells,
        min_radius_cells: c.min_radius_cells,
        boundary_fraction: c.boundary_fraction,
        tol_cauchy: c.tol_cauchy,
        tol_const: c.tol_const,
        tol_jump: c.tol_jump,
        sep_min: c.sep_min,
        value_range: (c.value_range > 0.0).then_some(c.value_range),
        ..ClassifyConfig::default()
    }
}

fn class_from(c: &PointClass) -> JsPointClass {
    let mut out = JsPointClass {
        code: JsClassCode::Insufficient,
        value: 0.0,
        a: 0.0,
        b: 0.0,
        normal: [0.0; 3],
        residual: 0.0,
        osc_of_limit: 0.0,
    };
    match c {
        PointClass::ApproxContinuous { value } => {
            out.code = JsClassCode::ApproxContinuous;
            out.value = *value;
        }
        PointClass::Jump(f) => {
            out.code = JsClassCode::Jump;
            out.a = f.a;
            out.b = f.b;
            out.normal = pad3(&f.normal);
            out.residual = f.residual;
        }
        PointClass::SingularNonJump { osc_of_limit } => {
            out.code = JsClassCode::SingularNonJump;
            out.osc_of_limit = *osc_of_limit;
        }
        PointClass::NonConvergent => out.code = JsClassCode::NonConvergent,
        PointClass::Insufficient => {}
    }
    out
}

/// Classifies the point `x` (of length `dim`). `config` may be null for
/// the defaults.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn js_classify_point(
    grid: *const JsGrid,
    x: *const f64,
    dim: usize,
    config: *const JsClassifyConfig,
    out: *mut JsPointClass,
) -> JsStatus {
    guard(|| {
        let u = grid_ref(grid)?;
        let x = slice_in(x, dim, "x")?;
        let cfg = config.as_ref().map_or_else(ClassifyConfig::default, config_from);
        let out = out_ref(out, "out")?;
        *out = class_from(&classify_point(u, x, &cfg).map_err(lib)?);
        Ok(())
    })
}

/// Lower weighted median of `n` finite values with positive weights.
///
/// # Safety
/// `values` and `weights` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn js_weighted_median(
    values: *const f64,
    weights: *const f64,
    n: usize,
    out: *mut f64,
) -> JsStatus {
    guard(|| {
        let v = slice_in(values, n, "values")?;
        let w = slice_in(weights, n, "weights")?;
        *out_ref(out, "out")? = weighted_median(v, w).map_err(lib)?;
        Ok(())
    })
}

/// L¹ oscillation `min_c mean |v - c|` of `n` equally weighted values.
///
/// # Safety
/// `values` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn js_osc_values(values: *const f64, n: usize, out: *mut f64) -> JsStatus {
    guard(|| {
        let v = slice_in(values, n, "values")?;
        *out_ref(out, "out")? = osc_stats(v).map_err(lib)?.osc();
        Ok(())
    })
}

fn cone_spec(c: &JsCone) -> Result<ConeSpec, (JsStatus, String)> {
    if !(1..=3).contains(&c.dim) {
        return Err((JsStatus::DimensionMismatch, format!("cone dimension {}", c.dim)));
    }
    Ok(ConeSpec {
        z0: c.z0[..c.dim].to_vec(),
        axis: c.axis[..c.dim].to_vec(),
        z0_norm: c.z0_norm,
        rho: c.rho,
        rho_prime: c.rho_prime,
        eps: c.eps,
        sin_half_aperture: c.sin_half_aperture,
        lipschitz: c.lipschitz,
        range: c.range,
    })
}

/// Builds the exclusion cone of `B_rho(center)` for `tau` and `r0`.
///
/// # Safety
/// `center` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn js_cone_from_params(
    center: *const f64,
    dim: usize,
    rho: f64,
    tau: f64,
    r0: f64,
    out: *mut JsCone,
) -> JsStatus {
    guard(|| {
        let c = slice_in(center, dim, "center")?;
        let ball = Ball::new(c.to_vec(), rho).map_err(lib)?;
        let s = cone_from_params(&ball, tau, r0, dim).map_err(lib)?;
        *out_ref(out, "out")? = JsCone {
            dim,
            z0: pad3(&s.z0),
            axis: pad3(&s.axis),
            z0_norm: s.z0_norm,
            rho: s.rho,
            rho_prime: s.rho_prime,
            eps: s.eps,
            sin_half_aperture: s.sin_half_aperture,
            lipschitz: s.lipschitz,
            range: s.range,
        };
        Ok(())
    })
}

/// Whether `delta` lies in the truncated cone.
///
/// # Safety
/// `cone` must be valid and `delta` point to `cone->dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn js_in_cone(cone: *const JsCone, delta: *const f64, out: *mut bool) -> JsStatus {
    guard(|| {
        let cone = cone.as_ref().ok_or_else(|| null("cone"))?;
        let spec = cone_spec(cone)?;
        let d = slice_in(delta, cone.dim, "delta")?;
        *out_ref(out, "out")? = in_cone(d, &spec);
        Ok(())
    })
}

/// Number of point pairs farther apart than `guard_dist` with one point in
/// the other's cone. `points` holds `n_points * cone->dim` coordinates.
///
/// # Safety
/// `cone` must be valid and `points` point to `n_points * cone->dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn js_verify_cone(
    cone: *const JsCone,
    points: *const f64,
    n_points: usize,
    guard_dist: f64,
    out_violations: *mut usize,
) -> JsStatus {
    guard(|| {
        let cone = cone.as_ref().ok_or_else(|| null("cone"))?;
        let spec = cone_spec(cone)?;
        let flat = slice_in(points, n_points * cone.dim, "points")?;
        let pts: Vec<Vec<f64>> = flat.chunks(cone.dim).map(<[f64]>::to_vec).collect();
        *out_ref(out_violations, "out_violations")? = verify_cone_property(&pts, &spec, guard_dist).len();
        Ok(())
    })
}
