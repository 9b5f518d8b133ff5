//! Flight planning, ground registration, integral accumulation and
//! visibility scoring.
//!
//! Binary samples are accumulated as integer `(sum, count)` pairs per ground
//! cell, so the integral does not depend on the order poses are processed in.

use glam::DVec2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::imaging::{axis_to_pixel, render_pixels, BinaryAerialImage, CameraPose};
use crate::pgm::GrayImage;
use crate::sampling::{ground_coverage, SensorConfig};
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightMode {
    /// One pass along x through the aperture centre.
    Line,
    /// Regular 2D lattice over the aperture.
    Grid,
}

impl std::str::FromStr for FlightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(FlightMode::Line),
            "grid" => Ok(FlightMode::Grid),
            _ => Err(Error::Param(format!("unknown flight mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub mode: FlightMode,
    pub spacing_m: f64,
    pub altitude_m: f64,
    pub aperture: Rect,
    pub poses: Vec<CameraPose>,
}

/// Lattice positions along one axis: `⌊span/d⌋ + 1` points, centred in the span.
fn lattice(min: f64, max: f64, spacing: f64) -> Vec<f64> {
    let span = max - min;
    // Tolerate representation error so that e.g. 10 / 2 counts as exactly 5 steps.
    let steps = (span / spacing + 1e-9).floor().max(0.0) as usize;
    let start = 0.5 * (min + max) - 0.5 * steps as f64 * spacing;
    (0..=steps).map(|k| start + k as f64 * spacing).collect()
}

pub fn plan_flight(aperture: Rect, spacing_m: f64, altitude_m: f64, mode: FlightMode) -> Result<FlightPlan> {
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(Error::Param(format!(
            "sampling distance must be positive, got {spacing_m}"
        )));
    }
    if !(aperture.width() >= 0.0 && aperture.height() >= 0.0) {
        return Err(Error::Param("aperture extent must not be inverted".into()));
    }
    let xs = lattice(aperture.min.x, aperture.max.x, spacing_m);
    let poses = match mode {
        FlightMode::Line => {
            let y = aperture.center().y;
            xs.iter()
                .map(|&x| CameraPose::new(x, y, altitude_m))
                .collect::<Result<Vec<_>>>()?
        }
        FlightMode::Grid => {
            let ys = lattice(aperture.min.y, aperture.max.y, spacing_m);
            let mut poses = Vec::with_capacity(xs.len() * ys.len());
            for &y in &ys {
                for &x in &xs {
                    poses.push(CameraPose::new(x, y, altitude_m)?);
                }
            }
            poses
        }
    };
    Ok(FlightPlan {
        mode,
        spacing_m,
        altitude_m,
        aperture,
        poses,
    })
}

/// Discretized ground plane: `nx × ny` square cells from `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundGrid {
    pub origin: DVec2,
    pub cell_m: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GroundGrid {
    pub fn new(origin: DVec2, cell_m: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(cell_m > 0.0 && cell_m.is_finite()) || nx == 0 || ny == 0 {
            return Err(Error::Param(format!(
                "grid needs cell_m > 0 and at least one cell, got cell_m={cell_m}, {nx}x{ny}"
            )));
        }
        Ok(GroundGrid {
            origin,
            cell_m,
            nx,
            ny,
        })
    }

    /// Smallest grid of `cell_m` cells anchored at `rect.min` covering `rect`.
    pub fn covering(rect: &Rect, cell_m: f64) -> Result<Self> {
        let n = |len: f64| ((len / cell_m - 1e-9).ceil().max(1.0)) as usize;
        GroundGrid::new(rect.min, cell_m, n(rect.width()), n(rect.height()))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> DVec2 {
        self.origin + DVec2::new(ix as f64 + 0.5, iy as f64 + 0.5) * self.cell_m
    }

    pub fn center_x(&self, ix: usize) -> f64 {
        self.origin.x + (ix as f64 + 0.5) * self.cell_m
    }

    pub fn center_y(&self, iy: usize) -> f64 {
        self.origin.y + (iy as f64 + 0.5) * self.cell_m
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(
            self.origin,
            self.origin + DVec2::new(self.nx as f64, self.ny as f64) * self.cell_m,
        )
    }
}

/// Per-cell `(sum, count)` one image adds to an integral.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contribution {
    pub sum: Vec<u32>,
    pub count: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralImage {
    pub grid: GroundGrid,
    pub sum: Vec<u32>,
    pub count: Vec<u32>,
}

impl IntegralImage {
    pub fn zeros(grid: GroundGrid) -> Self {
        IntegralImage {
            grid,
            sum: vec![0; grid.len()],
            count: vec![0; grid.len()],
        }
    }

    /// Mean sample value of the cell; `None` where nothing was sampled.
    pub fn value(&self, ix: usize, iy: usize) -> Option<f64> {
        let k = iy * self.grid.nx + ix;
        (self.count[k] > 0).then(|| self.sum[k] as f64 / self.count[k] as f64)
    }

    pub fn add(&mut self, c: &Contribution) {
        for (s, v) in self.sum.iter_mut().zip(&c.sum) {
            *s += v;
        }
        for (s, v) in self.count.iter_mut().zip(&c.count) {
            *s += v;
        }
    }

    fn merge(mut self, other: IntegralImage) -> IntegralImage {
        for (s, v) in self.sum.iter_mut().zip(&other.sum) {
            *s += v;
        }
        for (s, v) in self.count.iter_mut().zip(&other.count) {
            *s += v;
        }
        self
    }

    /// Grayscale export: `round(value · 255)`, uncovered cells black. Row 0 is
    /// the grid's lowest y.
    pub fn to_pgm(&self) -> GrayImage {
        let data = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &c)| {
                if c == 0 {
                    0
                } else {
                    (s as f64 / c as f64 * 255.0).round() as u8
                }
            })
            .collect();
        GrayImage::new(self.grid.nx, self.grid.ny, data).expect("grid dimensions")
    }

    pub fn mean_abs_diff(&self, other: &IntegralImage) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Param("integrals are on different grids".into()));
        }
        let mut total = 0.0;
        let mut n = 0usize;
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                if let (Some(a), Some(b)) = (self.value(ix, iy), other.value(ix, iy)) {
                    total += (a - b).abs();
                    n += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::Coverage("integrals share no covered cell".into()));
        }
        Ok(total / n as f64)
    }
}

/// Nearest pixel index for each grid column / row centre, `None` outside the
/// footprint along that axis.
fn axis_maps(grid: &GroundGrid, pose: &CameraPose, sensor: &SensorConfig) -> (Vec<Option<u32>>, Vec<Option<u32>>) {
    let (h, t, res) = (pose.altitude(), sensor.half_tan(), sensor.resolution_px);
    let cols = (0..grid.nx)
        .map(|ix| axis_to_pixel(pose.position.x, h, t, res, grid.center_x(ix)))
        .collect();
    let rows = (0..grid.ny)
        .map(|iy| axis_to_pixel(pose.position.y, h, t, res, grid.center_y(iy)))
        .collect();
    (cols, rows)
}

/// Back-projects every grid cell centre into the image (nearest pixel).
pub fn register_to_ground(image: &BinaryAerialImage, grid: &GroundGrid) -> Contribution {
    let (cols, rows) = axis_maps(grid, &image.pose, &image.sensor);
    let mut sum = vec![0u32; grid.len()];
    let mut count = vec![0u32; grid.len()];
    for (iy, j) in rows.iter().enumerate() {
        let Some(j) = *j else { continue };
        for (ix, i) in cols.iter().enumerate() {
            let Some(i) = *i else { continue };
            let k = iy * grid.nx + ix;
            sum[k] = image.get(i, j) as u32;
            count[k] = 1;
        }
    }
    Contribution { sum, count }
}

/// Distinct pixel indices of a monotone axis map, and each cell's slot in that list.
fn compact(map: &[Option<u32>]) -> (Vec<u32>, Vec<Option<usize>>) {
    let mut unique: Vec<u32> = Vec::new();
    let slots = map
        .iter()
        .map(|p| {
            p.map(|p| {
                if unique.last() != Some(&p) {
                    unique.push(p);
                }
                unique.len() - 1
            })
        })
        .collect();
    (unique, slots)
}

/// Renders only the pixels registration reads; equivalent to
/// `register_to_ground(render_aerial(..))`.
fn accumulate_pose(
    scene: &Scene,
    pose: &CameraPose,
    sensor: &SensorConfig,
    grid: &GroundGrid,
    acc: &mut IntegralImage,
) -> Result<()> {
    let (cols, rows) = axis_maps(grid, pose, sensor);
    let (ucols, cslots) = compact(&cols);
    let (urows, rslots) = compact(&rows);
    if ucols.is_empty() || urows.is_empty() {
        return Ok(());
    }
    let pixels = render_pixels(scene, pose, sensor, &ucols, &urows)?;
    for (iy, rs) in rslots.iter().enumerate() {
        let Some(r) = *rs else { continue };
        let base = iy * grid.nx;
        for (ix, cs) in cslots.iter().enumerate() {
            let Some(c) = *cs else { continue };
            acc.sum[base + ix] += pixels[r * ucols.len() + c] as u32;
            acc.count[base + ix] += 1;
        }
    }
    Ok(())
}

/// Renders every pose of the plan, registers it onto `grid` and accumulates.
pub fn integrate(scene: &Scene, plan: &FlightPlan, sensor: &SensorConfig, grid: &GroundGrid) -> Result<IntegralImage> {
    sensor.validate()?;
    if plan.poses.is_empty() {
        return Err(Error::Param("flight plan has no poses".into()));
    }
    plan.poses
        .par_iter()
        .try_fold(
            || IntegralImage::zeros(*grid),
            |mut acc, pose| {
                accumulate_pose(scene, pose, sensor, grid, &mut acc)?;
                Ok(acc)
            },
        )
        .try_reduce(|| IntegralImage::zeros(*grid), |a, b| Ok(a.merge(b)))
}

/// Ground rectangle in which every cell is seen by the full set of poses: the
/// aperture shrunk by half a footprint on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub rect: Rect,
}

/// Reason attached to sweep rows whose evaluation region does not fit.
pub const FOOTPRINT_EXCEEDS_EXTENT: &str = "footprint_exceeds_extent";

impl RegionOfInterest {
    pub fn new(rect: Rect) -> Self {
        RegionOfInterest { rect }
    }

    pub fn for_aperture(aperture: &Rect, altitude_m: f64, fov_deg: f64) -> Result<Self> {
        let c = ground_coverage(altitude_m, fov_deg)?;
        let rect = aperture.shrink(0.5 * c);
        if rect.is_empty() {
            return Err(Error::Coverage(format!(
                "{FOOTPRINT_EXCEEDS_EXTENT}: footprint {c:.3} m leaves no interior in a {:.3} x {:.3} m aperture",
                aperture.width(),
                aperture.height()
            )));
        }
        Ok(RegionOfInterest { rect })
    }

    /// Grid cells whose centres fall inside the region.
    pub fn cells(&self, grid: &GroundGrid) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                if self.rect.contains(grid.cell_center(ix, iy)) {
                    out.push((ix, iy));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityStats {
    pub mean: f64,
    pub std: f64,
    pub cells: usize,
}

pub fn visibility_stats(integral: &IntegralImage, roi: &RegionOfInterest) -> Result<VisibilityStats> {
    let cells = roi.cells(&integral.grid);
    if cells.is_empty() {
        return Err(Error::Coverage("region of interest contains no grid cell".into()));
    }
    let mut values = Vec::with_capacity(cells.len());
    for &(ix, iy) in &cells {
        let v = integral.value(ix, iy).ok_or_else(|| {
            Error::Coverage(format!("cell ({ix}, {iy}) in the region of interest has no samples"))
        })?;
        values.push(v);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(VisibilityStats {
        mean,
        std: var.sqrt(),
        cells: values.len(),
    })
}

/// Mean integral value over the region of interest.
pub fn visibility(integral: &IntegralImage, roi: &RegionOfInterest) -> Result<f64> {
    visibility_stats(integral, roi).map(|s| s.mean)
}

/// Sidecar record written next to an exported integral image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralMetadata {
    /// `integrate` or `oracle`.
    pub tag: String,
    pub grid: GroundGrid,
    pub mode: FlightMode,
    pub spacing_m: f64,
    pub altitude_m: f64,
    pub aperture: Rect,
    pub pose_count: usize,
    pub sensor: SensorConfig,
    pub seed: Option<u64>,
    pub scene: String,
    /// Ground size of one pixel at the image centre.
    pub finest_gsd_m: f64,
    pub roi: Option<Rect>,
    pub visibility: Option<f64>,
    pub version: String,
}

impl IntegralMetadata {
    pub fn new(tag: &str, integral: &IntegralImage, plan: &FlightPlan, sensor: &SensorConfig) -> Self {
        let c = 2.0 * plan.altitude_m * sensor.half_tan();
        IntegralMetadata {
            tag: tag.into(),
            grid: integral.grid,
            mode: plan.mode,
            spacing_m: plan.spacing_m,
            altitude_m: plan.altitude_m,
            aperture: plan.aperture,
            pose_count: plan.poses.len(),
            sensor: *sensor,
            seed: None,
            scene: String::new(),
            finest_gsd_m: c / sensor.resolution_px as f64,
            roi: None,
            visibility: None,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cylinder, Primitive};
    use crate::imaging::render_aerial;
    use crate::forest::{generate_forest, DensityClass, TreeParams};
    use crate::scene::build_scene;
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

    #[test]
    fn plan_pose_counts() {
        let line = plan_flight(Rect::centered(10.0, 0.0), 2.0, 30.0, FlightMode::Line).unwrap();
        assert_eq!(line.poses.len(), 6);
        let grid = plan_flight(Rect::centered(10.0, 10.0), 5.0, 30.0, FlightMode::Grid).unwrap();
        assert_eq!(grid.poses.len(), 9);
        let tiny = plan_flight(Rect::centered(1.0, 0.0), 2.0, 30.0, FlightMode::Line).unwrap();
        assert_eq!(tiny.poses.len(), 1);
        assert_eq!(tiny.poses[0].ground_xy(), DVec2::ZERO);
        assert!(plan_flight(Rect::centered(1.0, 1.0), 0.0, 30.0, FlightMode::Grid).is_err());
        assert!(plan_flight(Rect::centered(1.0, 1.0), 1.0, 0.0, FlightMode::Grid).is_err());
    }

    #[test]
    fn plan_spacing_and_altitude() {
        let plan = plan_flight(Rect::centered(9.0, 7.0), 1.5, 42.0, FlightMode::Grid).unwrap();
        let xs: Vec<f64> = plan.poses.iter().take(7).map(|p| p.position.x).collect();
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - 1.5).abs() < 1e-9);
        }
        assert!(plan.poses.iter().all(|p| p.altitude() == 42.0));
        assert!(plan.poses.iter().all(|p| plan.aperture.contains(p.ground_xy())));
    }

    #[test]
    fn empty_scene_integrates_to_one() {
        let scene = Scene::empty(Rect::centered(40.0, 40.0));
        let plan = plan_flight(Rect::centered(6.0, 6.0), 2.0, 30.0, FlightMode::Grid).unwrap();
        let sensor = SensorConfig::new(50.0, 32).unwrap();
        let grid = GroundGrid::covering(&Rect::centered(50.0, 50.0), 0.5).unwrap();
        let ii = integrate(&scene, &plan, &sensor, &grid).unwrap();
        let mut covered = 0;
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                if let Some(v) = ii.value(ix, iy) {
                    assert_eq!(v, 1.0);
                    covered += 1;
                }
            }
        }
        assert!(covered > 0 && covered < grid.len());
    }

    #[test]
    fn duplicate_poses_are_idempotent() {
        let scene = trunk_scene();
        let sensor = SensorConfig::new(60.0, 64).unwrap();
        let grid = GroundGrid::covering(&Rect::centered(20.0, 20.0), 0.25).unwrap();
        let single = plan_flight(Rect::centered(0.0, 0.0), 1.0, 30.0, FlightMode::Grid).unwrap();
        let mut triple = single.clone();
        triple.poses = vec![single.poses[0]; 3];
        let a = integrate(&scene, &single, &sensor, &grid).unwrap();
        let b = integrate(&scene, &triple, &sensor, &grid).unwrap();
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                assert_eq!(a.value(ix, iy), b.value(ix, iy));
            }
        }
    }

    #[test]
    fn lazy_rendering_matches_full_render_and_register() {
        let params = TreeParams {
            leaves_per_branch: 15,
            ..TreeParams::default()
        };
        let forest =
            generate_forest(9, DensityClass::Dense, Rect::centered(30.0, 30.0), &params, 2.0).unwrap();
        let scene = build_scene(&forest);
        let sensor = SensorConfig::new(50.0, 48).unwrap();
        let plan = plan_flight(Rect::centered(4.0, 4.0), 2.0, 30.0, FlightMode::Grid).unwrap();
        // Cells both finer and coarser than the pixels.
        for cell in [0.1, 0.7] {
            let grid = GroundGrid::covering(&Rect::centered(12.0, 10.0), cell).unwrap();
            let fast = integrate(&scene, &plan, &sensor, &grid).unwrap();
            let mut slow = IntegralImage::zeros(grid);
            for pose in &plan.poses {
                let img = render_aerial(&scene, pose, &sensor).unwrap();
                slow.add(&register_to_ground(&img, &grid));
            }
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn registration_inside_and_outside_footprint() {
        let scene = Scene::empty(Rect::centered(40.0, 40.0));
        let pose = CameraPose::new(0.0, 0.0, 30.0).unwrap();
        let sensor = SensorConfig::new(90.0, 64).unwrap();
        let img = render_aerial(&scene, &pose, &sensor).unwrap();
        // Cell centres at -40.5 … +40.5; footprint is ±30 m.
        let grid = GroundGrid::new(DVec2::new(-41.0, -0.5), 1.0, 82, 1).unwrap();
        let c = register_to_ground(&img, &grid);
        assert_eq!((c.sum[41], c.count[41]), (1, 1));
        assert_eq!((c.sum[0], c.count[0]), (0, 0));
        assert_eq!(c.count.iter().sum::<u32>(), 60);
    }

    #[test]
    fn visibility_means() {
        let grid = GroundGrid::new(DVec2::ZERO, 1.0, 4, 1).unwrap();
        let roi = RegionOfInterest::new(grid.bounds());
        let mk = |sum: [u32; 4]| IntegralImage {
            grid,
            sum: sum.to_vec(),
            count: vec![1; 4],
        };
        assert_eq!(visibility(&mk([1, 1, 1, 1]), &roi).unwrap(), 1.0);
        assert_eq!(visibility(&mk([0, 0, 0, 0]), &roi).unwrap(), 0.0);
        assert_eq!(visibility(&mk([1, 0, 1, 0]), &roi).unwrap(), 0.5);
        let mut hole = mk([1, 1, 1, 1]);
        hole.count[2] = 0;
        hole.sum[2] = 0;
        assert!(matches!(visibility(&hole, &roi), Err(Error::Coverage(_))));
    }

    #[test]
    fn roi_shrinks_by_half_footprint() {
        let ap = Rect::centered(80.0, 80.0);
        let roi = RegionOfInterest::for_aperture(&ap, 30.0, 90.0).unwrap();
        assert!((roi.rect.width() - 20.0).abs() < 1e-9);
        let err = RegionOfInterest::for_aperture(&ap, 50.0, 90.0).unwrap_err();
        assert!(err.to_string().contains(FOOTPRINT_EXCEEDS_EXTENT));
    }

    #[test]
    fn roi_cells_have_uniform_full_coverage() {
        let scene = Scene::empty(Rect::centered(80.0, 80.0));
        let sensor = SensorConfig::new(40.0, 32).unwrap();
        let ap = Rect::centered(30.0, 30.0);
        let plan = plan_flight(ap, 1.0, 30.0, FlightMode::Grid).unwrap();
        let roi = RegionOfInterest::for_aperture(&ap, 30.0, 40.0).unwrap();
        let grid = GroundGrid::covering(&roi.rect, 0.5).unwrap();
        let ii = integrate(&scene, &plan, &sensor, &grid).unwrap();
        let counts: Vec<u32> = roi
            .cells(&grid)
            .iter()
            .map(|&(ix, iy)| ii.count[iy * grid.nx + ix])
            .collect();
        let n = crate::sampling::ground_coverage(30.0, 40.0).unwrap() / 1.0;
        let lo = *counts.iter().min().unwrap() as f64;
        let hi = *counts.iter().max().unwrap() as f64;
        // Within one lattice row/column of n² everywhere.
        assert!(lo >= (n - 1.0).powi(2) && hi <= (n + 1.0).powi(2), "{lo} {hi} {n}");
    }
}
