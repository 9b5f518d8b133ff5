use std::ffi::{CStr, CString};
use std::ptr;

use aos_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(aos_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn closed_forms() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(aos_alpha_max(90.0, &mut v), AosStatus::Ok);
        assert_eq!(v, 45.0);
        assert_eq!(aos_ground_coverage(30.0, 90.0, &mut v), AosStatus::Ok);
        assert!((v - 60.0).abs() < 1e-9);
        assert_eq!(aos_samples_per_point(60.0, 2.0, &mut v), AosStatus::Ok);
        assert!((v - 30.0).abs() < 1e-9);
        assert_eq!(aos_optimal_fov(3.5, 7.0, &mut v), AosStatus::Ok);
        assert!((v - 53.13).abs() < 0.01);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(aos_alpha_max(180.0, &mut v), AosStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(aos_alpha_max(10.0, ptr::null_mut()), AosStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(aos_alpha_max(10.0, &mut v), AosStatus::Ok);
        assert!(last_error().is_empty());
        let mut forest = ptr::null_mut();
        assert_eq!(
            aos_forest_generate(1, -5.0, 50.0, 50.0, 2.0, &mut forest),
            AosStatus::InvalidArgument
        );
        assert!(forest.is_null());
        let mut count = 0usize;
        assert_eq!(aos_forest_tree_count(ptr::null(), &mut count), AosStatus::NullPointer);
    }
}

#[test]
fn forest_scene_integral_round_trip() {
    unsafe {
        let mut forest = ptr::null_mut();
        assert_eq!(aos_forest_generate(3, 200.0, 50.0, 50.0, 2.0, &mut forest), AosStatus::Ok);
        let mut count = 0usize;
        assert_eq!(aos_forest_tree_count(forest, &mut count), AosStatus::Ok);
        assert_eq!(count, 50);
        let mut stats = AosForestStats::default();
        assert_eq!(aos_forest_stats(forest, &mut stats), AosStatus::Ok);
        assert!(stats.d_t_m >= 2.0 && stats.h_t_m >= 4.0 && stats.h_t_m <= 8.0);

        let mut json = ptr::null_mut();
        assert_eq!(aos_forest_to_json(forest, &mut json), AosStatus::Ok);
        let mut copy = ptr::null_mut();
        assert_eq!(aos_forest_from_json(json, &mut copy), AosStatus::Ok);
        let mut copy_count = 0usize;
        assert_eq!(aos_forest_tree_count(copy, &mut copy_count), AosStatus::Ok);
        assert_eq!(copy_count, 50);
        aos_string_free(json);
        aos_forest_free(copy);

        let mut scene = ptr::null_mut();
        assert_eq!(aos_scene_build(forest, &mut scene), AosStatus::Ok);
        aos_forest_free(forest);
        let mut prims = 0usize;
        assert_eq!(aos_scene_primitive_count(scene, &mut prims), AosStatus::Ok);
        assert!(prims >= 50);
        let mut blocked = true;
        let (a, b) = ([100.0, 100.0, 30.0], [100.0, 100.0, 0.0]);
        assert_eq!(aos_scene_occluded(scene, a.as_ptr(), b.as_ptr(), &mut blocked), AosStatus::Ok);
        assert!(!blocked);

        let params = AosIntegrateParams {
            aperture_min_x: -2.0,
            aperture_min_y: -2.0,
            aperture_max_x: 2.0,
            aperture_max_y: 2.0,
            spacing_m: 1.0,
            altitude_m: 30.0,
            mode: AosFlightMode::Grid,
            fov_deg: 50.0,
            resolution_px: 64,
            grid_origin_x: -20.0,
            grid_origin_y: -20.0,
            cell_m: 1.0,
            nx: 40,
            ny: 40,
        };
        let mut integral = ptr::null_mut();
        assert_eq!(aos_integrate(scene, &params, &mut integral), AosStatus::Ok);
        let (mut nx, mut ny) = (0usize, 0usize);
        assert_eq!(aos_integral_dims(integral, &mut nx, &mut ny), AosStatus::Ok);
        assert_eq!((nx, ny), (40, 40));
        let mut v = -1.0;
        assert_eq!(aos_integral_value(integral, 20, 20, &mut v), AosStatus::Ok);
        assert!((0.0..=1.0).contains(&v));
        // The corner lies outside every footprint.
        assert_eq!(aos_integral_value(integral, 0, 0, &mut v), AosStatus::Coverage);
        assert_eq!(aos_integral_value(integral, 40, 0, &mut v), AosStatus::InvalidArgument);
        let mut vis = -1.0;
        assert_eq!(aos_integral_visibility(integral, -5.0, -5.0, 5.0, 5.0, &mut vis), AosStatus::Ok);
        assert!((0.0..=1.0).contains(&vis));
        assert_eq!(
            aos_integral_visibility(integral, -20.0, -20.0, 20.0, 20.0, &mut vis),
            AosStatus::Coverage
        );
        aos_integral_free(integral);
        aos_scene_free(scene);
    }
}

#[test]
fn bad_json_is_a_parse_error() {
    unsafe {
        let text = CString::new("{not json").unwrap();
        let mut forest = ptr::null_mut();
        assert_eq!(aos_forest_from_json(text.as_ptr(), &mut forest), AosStatus::Parse);
        assert!(forest.is_null());
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        aos_forest_free(ptr::null_mut());
        aos_scene_free(ptr::null_mut());
        aos_integral_free(ptr::null_mut());
        aos_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/aos_ffi.h")).unwrap();
    for name in [
        "AOS_FFI_H",
        "AOS_STATUS_OK",
        "AOS_STATUS_COVERAGE",
        "typedef struct AosForest AosForest",
        "AosStatus aos_integrate(",
        "void aos_forest_free(",
        "const char *aos_last_error_message(void)",
    ] {
        assert!(header.contains(name), "header lacks `{name}`");
    }
}
