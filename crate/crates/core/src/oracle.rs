//! Brute-force visibility by direct sight-line casting, with no images and
//! no registration involved.

use glam::DVec2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{check_pose, footprint_contains, CameraPose};
use crate::integration::{FlightPlan, GroundGrid, IntegralImage};
use crate::sampling::SensorConfig;
use crate::scene::{Scene, GROUND_Z};

/// `(unoccluded, covering)` pose counts for one ground point.
fn sight_counts(scene: &Scene, p: DVec2, poses: &[CameraPose], sensor: &SensorConfig) -> (u32, u32) {
    let target = p.extend(GROUND_Z);
    let mut seen = 0;
    let mut covering = 0;
    for pose in poses {
        if footprint_contains(pose, sensor, p) {
            covering += 1;
            if !scene.occluded(pose.position, target) {
                seen += 1;
            }
        }
    }
    (seen, covering)
}

/// Fraction of the poses covering `p` that have a clear line of sight to it.
pub fn point_visibility(scene: &Scene, p: DVec2, poses: &[CameraPose], sensor: &SensorConfig) -> Result<f64> {
    if poses.is_empty() {
        return Err(Error::Param("no poses given".into()));
    }
    let (seen, covering) = sight_counts(scene, p, poses, sensor);
    if covering == 0 {
        return Err(Error::Coverage(format!(
            "point ({}, {}) lies outside every footprint",
            p.x, p.y
        )));
    }
    Ok(seen as f64 / covering as f64)
}

/// Integral whose cells hold the exact sight-line fraction at their centres.
pub fn oracle_integral(scene: &Scene, plan: &FlightPlan, sensor: &SensorConfig, grid: &GroundGrid) -> Result<IntegralImage> {
    sensor.validate()?;
    if plan.poses.is_empty() {
        return Err(Error::Param("flight plan has no poses".into()));
    }
    for pose in &plan.poses {
        check_pose(scene, pose)?;
    }
    let rows: Vec<(Vec<u32>, Vec<u32>)> = (0..grid.ny)
        .into_par_iter()
        .map(|iy| {
            (0..grid.nx)
                .map(|ix| sight_counts(scene, grid.cell_center(ix, iy), &plan.poses, sensor))
                .unzip()
        })
        .collect();
    let mut out = IntegralImage::zeros(*grid);
    for (iy, (sum, count)) in rows.into_iter().enumerate() {
        let k = iy * grid.nx;
        out.sum[k..k + grid.nx].copy_from_slice(&sum);
        out.count[k..k + grid.nx].copy_from_slice(&count);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cylinder, Disc, Primitive, Rect};
    use crate::integration::{plan_flight, FlightMode};
    use glam::DVec3;

    fn trunk_scene() -> Scene {
        Scene::from_primitives(
            vec![Primitive::Cylinder(Cylinder {
                base: DVec3::ZERO,
                top: DVec3::new(0.0, 0.0, 6.0),
                radius: 0.3,
            })],
            Rect::centered(40.0, 40.0),
        )
    }

    fn line_poses() -> Vec<CameraPose> {
        (-5..=5)
            .map(|x| CameraPose::new(x as f64, 0.0, 30.0).unwrap())
            .collect()
    }

    #[test]
    fn empty_scene_is_fully_visible() {
        let scene = Scene::empty(Rect::centered(40.0, 40.0));
        let sensor = SensorConfig::new(50.0, 64).unwrap();
        let v = point_visibility(&scene, DVec2::new(1.0, 2.0), &line_poses(), &sensor).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn slab_blocks_everything() {
        let scene = Scene::from_primitives(
            vec![Primitive::Disc(Disc {
                center: DVec3::new(0.0, 0.0, 10.0),
                normal: DVec3::Z,
                radius: 50.0,
            })],
            Rect::centered(40.0, 40.0),
        );
        let sensor = SensorConfig::new(50.0, 64).unwrap();
        let v = point_visibility(&scene, DVec2::ZERO, &line_poses(), &sensor).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_trunk_regression() {
        let scene = trunk_scene();
        let sensor = SensorConfig::new(50.0, 512).unwrap();
        // The ground point under the trunk axis is inside its cross-section.
        assert_eq!(point_visibility(&scene, DVec2::ZERO, &line_poses(), &sensor).unwrap(), 0.0);
        // From (0.5, 0) the sight line reaches x = 0.3 below the 6 m top only
        // for poses at x <= -0.5, i.e. five of the eleven.
        let v = point_visibility(&scene, DVec2::new(0.5, 0.0), &line_poses(), &sensor).unwrap();
        assert_eq!(v, 6.0 / 11.0);
    }

    #[test]
    fn outside_every_footprint_is_an_error() {
        let scene = trunk_scene();
        let sensor = SensorConfig::new(20.0, 64).unwrap();
        let r = point_visibility(&scene, DVec2::new(100.0, 0.0), &line_poses(), &sensor);
        assert!(matches!(r, Err(Error::Coverage(_))));
        assert!(point_visibility(&scene, DVec2::ZERO, &[], &sensor).is_err());
    }

    #[test]
    fn independent_of_resolution() {
        let scene = trunk_scene();
        let plan = plan_flight(Rect::centered(10.0, 10.0), 2.5, 30.0, FlightMode::Grid).unwrap();
        let grid = GroundGrid::covering(&Rect::centered(30.0, 30.0), 0.5).unwrap();
        let a = oracle_integral(&scene, &plan, &SensorConfig::new(40.0, 128).unwrap(), &grid).unwrap();
        let b = oracle_integral(&scene, &plan, &SensorConfig::new(40.0, 511).unwrap(), &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_invariant() {
        let scene = trunk_scene();
        let sensor = SensorConfig::new(60.0, 64).unwrap();
        let poses = line_poses();
        let mut rev = poses.clone();
        rev.reverse();
        for x in [0.4, 0.5, 0.8, -0.45] {
            let p = DVec2::new(x, 0.1);
            assert_eq!(
                point_visibility(&scene, p, &poses, &sensor).unwrap(),
                point_visibility(&scene, p, &rev, &sensor).unwrap()
            );
        }
    }
}
