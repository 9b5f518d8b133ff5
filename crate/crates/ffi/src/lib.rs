//! C ABI over `aos-core`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_build`
//! style functions and released with the matching `*_free`. Every fallible
//! function returns an [`AosStatus`]; on failure a description is available
//! from [`aos_last_error_message`] on the same thread.
//!
//! Pointer arguments must be null or valid for the access the function makes:
//! handles must come from this library and not yet be freed, `out` pointers
//! must be writable, and strings must be NUL-terminated. Null is reported as
//! [`AosStatus::NullPointer`] rather than dereferenced.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aos_core::error::Error;
use aos_core::forest::{forest_stats, generate_forest, DensityClass, Forest, TreeParams};
use aos_core::geometry::Rect;
use aos_core::glam::{DVec2, DVec3};
use aos_core::integration::{integrate, plan_flight, visibility, FlightMode, GroundGrid, IntegralImage, RegionOfInterest};
use aos_core::sampling::{alpha_max, ground_coverage, optimal_fov, samples_per_point, SensorConfig};
use aos_core::scene::{build_scene, Scene};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Stats = 4,
    Pose = 5,
    Coverage = 6,
    Io = 7,
    Parse = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AosFlightMode {
    Line = 0,
    Grid = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AosForestStats {
    pub h_t_m: f64,
    pub d_t_m: f64,
    pub trees_per_ha: f64,
}

/// Flight, sensor and ground grid for [`aos_integrate`]. The aperture is the
/// rectangle the poses span; the grid has `nx × ny` cells of `cell_m` from
/// `(grid_origin_x, grid_origin_y)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AosIntegrateParams {
    pub aperture_min_x: f64,
    pub aperture_min_y: f64,
    pub aperture_max_x: f64,
    pub aperture_max_y: f64,
    pub spacing_m: f64,
    pub altitude_m: f64,
    pub mode: AosFlightMode,
    pub fov_deg: f64,
    pub resolution_px: u32,
    pub grid_origin_x: f64,
    pub grid_origin_y: f64,
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
}

pub struct AosForest(Forest);
pub struct AosScene(Scene);
pub struct AosIntegral(IntegralImage);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AosStatus {
    match e {
        Error::Domain(_) => AosStatus::Domain,
        Error::Param(_) | Error::Config { .. } | Error::Query(_) => AosStatus::InvalidArgument,
        Error::Stats(_) => AosStatus::Stats,
        Error::Pose(_) => AosStatus::Pose,
        Error::Coverage(_) => AosStatus::Coverage,
        Error::Io(_) => AosStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::Image(_) => AosStatus::Parse,
        Error::Plot(_) => AosStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (AosStatus, String)>) -> AosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            AosStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            AosStatus::Internal
        }
    }
}

fn lift(e: Error) -> (AosStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (AosStatus, String) {
    (AosStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (AosStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (AosStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn aos_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn scalar(out: *mut f64, f: impl FnOnce() -> aos_core::Result<f64>) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = f().map_err(lift)?;
        Ok(())
    })
}

/// Maximal off-nadir angle (degrees) for a full field of view.
#[no_mangle]
pub unsafe extern "C" fn aos_alpha_max(fov_deg: f64, out: *mut f64) -> AosStatus {
    scalar(out, || alpha_max(fov_deg))
}

/// Ground footprint width `2 h tan(fov / 2)`.
#[no_mangle]
pub unsafe extern "C" fn aos_ground_coverage(altitude_m: f64, fov_deg: f64, out: *mut f64) -> AosStatus {
    scalar(out, || ground_coverage(altitude_m, fov_deg))
}

#[no_mangle]
pub unsafe extern "C" fn aos_samples_per_point(coverage_m: f64, sample_dist_m: f64, out: *mut f64) -> AosStatus {
    scalar(out, || samples_per_point(coverage_m, sample_dist_m))
}

/// `2 atan(d_t / h_t)` in degrees.
#[no_mangle]
pub unsafe extern "C" fn aos_optimal_fov(d_t_m: f64, h_t_m: f64, out: *mut f64) -> AosStatus {
    scalar(out, || optimal_fov(d_t_m, h_t_m))
}

/// Generates a forest with default tree parameters on an `extent_x × extent_y`
/// patch centred on the origin.
#[no_mangle]
pub unsafe extern "C" fn aos_forest_generate(
    seed: u64,
    trees_per_ha: f64,
    extent_x_m: f64,
    extent_y_m: f64,
    min_spacing_m: f64,
    out: *mut *mut AosForest,
) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = ptr::null_mut();
        if !(extent_x_m > 0.0 && extent_y_m > 0.0) {
            return Err((AosStatus::InvalidArgument, "extent must be positive".into()));
        }
        let forest = generate_forest(
            seed,
            DensityClass::Custom(trees_per_ha),
            Rect::centered(extent_x_m, extent_y_m),
            &TreeParams::default(),
            min_spacing_m,
        )
        .map_err(lift)?;
        *out = Box::into_raw(Box::new(AosForest(forest)));
        Ok(())
    })
}

/// Parses a forest from its JSON serialization (NUL-terminated UTF-8).
#[no_mangle]
pub unsafe extern "C" fn aos_forest_from_json(json: *const c_char, out: *mut *mut AosForest) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let bytes = unsafe { CStr::from_ptr(json) }.to_bytes();
        let forest = Forest::from_json(bytes).map_err(lift)?;
        *out = Box::into_raw(Box::new(AosForest(forest)));
        Ok(())
    })
}

/// Serializes a forest. Release the string with [`aos_string_free`].
#[no_mangle]
pub unsafe extern "C" fn aos_forest_to_json(forest: *const AosForest, out: *mut *mut c_char) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = ptr::null_mut();
        let forest = unsafe { in_ref(forest, "forest") }?;
        let bytes = forest.0.to_json().map_err(lift)?;
        let s = CString::new(bytes).map_err(|e| (AosStatus::Internal, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn aos_forest_tree_count(forest: *const AosForest, out: *mut usize) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = unsafe { in_ref(forest, "forest") }?.0.trees.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn aos_forest_stats(forest: *const AosForest, out: *mut AosForestStats) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let s = forest_stats(&unsafe { in_ref(forest, "forest") }?.0).map_err(lift)?;
        *out = AosForestStats {
            h_t_m: s.h_t_m,
            d_t_m: s.d_t_m,
            trees_per_ha: s.trees_per_ha,
        };
        Ok(())
    })
}

/// # Safety
/// `forest` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn aos_forest_free(forest: *mut AosForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn aos_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds the ray-queryable scene of a forest. The forest may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn aos_scene_build(forest: *const AosForest, out: *mut *mut AosScene) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = ptr::null_mut();
        let forest = unsafe { in_ref(forest, "forest") }?;
        *out = Box::into_raw(Box::new(AosScene(build_scene(&forest.0))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn aos_scene_primitive_count(scene: *const AosScene, out: *mut usize) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = unsafe { in_ref(scene, "scene") }?.0.primitive_count();
        Ok(())
    })
}

/// Whether any occluder blocks the segment between two points, each given as `[x, y, z]`.
#[no_mangle]
pub unsafe extern "C" fn aos_scene_occluded(scene: *const AosScene, from: *const f64, to: *const f64, out: *mut bool) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let scene = unsafe { in_ref(scene, "scene") }?;
        let a = unsafe { in_ref(from as *const [f64; 3], "from") }?;
        let b = unsafe { in_ref(to as *const [f64; 3], "to") }?;
        *out = scene.0.occluded(DVec3::from_array(*a), DVec3::from_array(*b));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn aos_scene_free(scene: *mut AosScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Flies the plan described by `params` over `scene` and returns the integral image.
#[no_mangle]
pub unsafe extern "C" fn aos_integrate(scene: *const AosScene, params: *const AosIntegrateParams, out: *mut *mut AosIntegral) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        *out = ptr::null_mut();
        let scene = unsafe { in_ref(scene, "scene") }?;
        let p = unsafe { in_ref(params, "params") }?;
        let aperture = Rect::new(
            DVec2::new(p.aperture_min_x, p.aperture_min_y),
            DVec2::new(p.aperture_max_x, p.aperture_max_y),
        );
        let mode = match p.mode {
            AosFlightMode::Line => FlightMode::Line,
            AosFlightMode::Grid => FlightMode::Grid,
        };
        let plan = plan_flight(aperture, p.spacing_m, p.altitude_m, mode).map_err(lift)?;
        let sensor = SensorConfig::new(p.fov_deg, p.resolution_px).map_err(lift)?;
        let grid = GroundGrid::new(DVec2::new(p.grid_origin_x, p.grid_origin_y), p.cell_m, p.nx, p.ny)
            .map_err(lift)?;
        let integral = integrate(&scene.0, &plan, &sensor, &grid).map_err(lift)?;
        *out = Box::into_raw(Box::new(AosIntegral(integral)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn aos_integral_dims(integral: *const AosIntegral, nx: *mut usize, ny: *mut usize) -> AosStatus {
    guard(|| {
        let integral = unsafe { in_ref(integral, "integral") }?;
        *unsafe { out_ref(nx, "nx") }? = integral.0.grid.nx;
        *unsafe { out_ref(ny, "ny") }? = integral.0.grid.ny;
        Ok(())
    })
}

/// Mean sample value of cell `(ix, iy)`; `AOS_STATUS_COVERAGE` if nothing sampled it.
#[no_mangle]
pub unsafe extern "C" fn aos_integral_value(integral: *const AosIntegral, ix: usize, iy: usize, out: *mut f64) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let ii = &unsafe { in_ref(integral, "integral") }?.0;
        if ix >= ii.grid.nx || iy >= ii.grid.ny {
            return Err((
                AosStatus::InvalidArgument,
                format!("cell ({ix}, {iy}) outside a {}x{} grid", ii.grid.nx, ii.grid.ny),
            ));
        }
        *out = ii
            .value(ix, iy)
            .ok_or_else(|| (AosStatus::Coverage, format!("cell ({ix}, {iy}) has no samples")))?;
        Ok(())
    })
}

/// Mean integral value over the cells whose centres fall in the given rectangle.
#[no_mangle]
pub unsafe extern "C" fn aos_integral_visibility(
    integral: *const AosIntegral,
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
    out: *mut f64,
) -> AosStatus {
    guard(|| {
        let out = unsafe { out_ref(out, "out") }?;
        let ii = &unsafe { in_ref(integral, "integral") }?.0;
        let roi = RegionOfInterest::new(Rect::new(DVec2::new(min_x, min_y), DVec2::new(max_x, max_y)));
        *out = visibility(ii, &roi).map_err(lift)?;
        Ok(())
    })
}

/// # Safety
/// `integral` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn aos_integral_free(integral: *mut AosIntegral) {
    if !integral.is_null() {
        drop(Box::from_raw(integral));
    }
}
