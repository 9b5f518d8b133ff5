//! Nadir pinhole camera and binarized aerial image synthesis.
//!
//! Pixel `(i, j)` is column `i` (world +x) and row `j` (world +y). Pixel
//! centres sit at `u = (i + 0.5) / res` and are uniform on the image plane,
//! so their ground offsets are `h (2u - 1) tan(fov / 2)` along each axis.

use glam::{DVec2, DVec3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::pgm::GrayImage;
use crate::sampling::SensorConfig;
use crate::scene::{Scene, GROUND_Z};

/// Camera position; the camera always looks straight down with image x
/// along world x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: DVec3,
}

impl CameraPose {
    pub fn new(x: f64, y: f64, altitude_m: f64) -> Result<Self> {
        if !(altitude_m > 0.0 && altitude_m.is_finite()) {
            return Err(Error::Pose(format!(
                "altitude must be positive, got {altitude_m}"
            )));
        }
        Ok(CameraPose {
            position: DVec3::new(x, y, altitude_m),
        })
    }

    pub fn altitude(&self) -> f64 {
        self.position.z
    }

    pub fn ground_xy(&self) -> DVec2 {
        self.position.truncate()
    }
}

/// Continuous image coordinate `u ∈ [0, 1]` to a ground offset along one axis.
#[inline]
fn axis_offset(altitude: f64, half_tan: f64, u: f64) -> f64 {
    altitude * (2.0 * u - 1.0) * half_tan
}

/// Nearest pixel index along one axis for a ground coordinate, `None` outside
/// the footprint. Shared by registration and the oracle so both agree on
/// footprint membership.
#[inline]
pub fn axis_to_pixel(center: f64, altitude: f64, half_tan: f64, res: u32, coord: f64) -> Option<u32> {
    let u = ((coord - center) / (altitude * half_tan) + 1.0) * 0.5;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    Some(((u * res as f64) as u32).min(res - 1))
}

pub fn continuous_to_ground(pose: &CameraPose, sensor: &SensorConfig, u: f64, v: f64) -> DVec2 {
    let h = pose.altitude();
    let t = sensor.half_tan();
    DVec2::new(
        pose.position.x + axis_offset(h, t, u),
        pose.position.y + axis_offset(h, t, v),
    )
}

/// Ground point hit by the centre ray of pixel `(i, j)`.
pub fn pixel_to_ground(pose: &CameraPose, sensor: &SensorConfig, i: u32, j: u32) -> Result<DVec2> {
    let res = sensor.resolution_px;
    if i >= res || j >= res {
        return Err(Error::Param(format!(
            "pixel ({i}, {j}) outside a {res}x{res} image"
        )));
    }
    let r = res as f64;
    Ok(continuous_to_ground(
        pose,
        sensor,
        (i as f64 + 0.5) / r,
        (j as f64 + 0.5) / r,
    ))
}

/// Nearest pixel whose centre ray lands closest to `p`; `None` outside the footprint.
pub fn ground_to_pixel(pose: &CameraPose, sensor: &SensorConfig, p: DVec2) -> Option<(u32, u32)> {
    let (h, t, res) = (pose.altitude(), sensor.half_tan(), sensor.resolution_px);
    let i = axis_to_pixel(pose.position.x, h, t, res, p.x)?;
    let j = axis_to_pixel(pose.position.y, h, t, res, p.y)?;
    Some((i, j))
}

pub fn footprint_contains(pose: &CameraPose, sensor: &SensorConfig, p: DVec2) -> bool {
    ground_to_pixel(pose, sensor, p).is_some()
}

pub fn footprint(pose: &CameraPose, sensor: &SensorConfig) -> Rect {
    Rect::new(
        continuous_to_ground(pose, sensor, 0.0, 0.0),
        continuous_to_ground(pose, sensor, 1.0, 1.0),
    )
}

pub(crate) fn check_pose(scene: &Scene, pose: &CameraPose) -> Result<()> {
    if !(pose.altitude() > 0.0) {
        return Err(Error::Pose(format!(
            "altitude must be positive, got {}",
            pose.altitude()
        )));
    }
    if pose.altitude() <= scene.top_z() {
        return Err(Error::Pose(format!(
            "camera at {} m is not above the tallest occluder ({} m)",
            pose.altitude(),
            scene.top_z()
        )));
    }
    Ok(())
}

/// Renders the pixels at the cross product of `cols × rows`, row-major.
/// Value 1 = ground reached, 0 = occluded.
pub fn render_pixels(
    scene: &Scene,
    pose: &CameraPose,
    sensor: &SensorConfig,
    cols: &[u32],
    rows: &[u32],
) -> Result<Vec<u8>> {
    check_pose(scene, pose)?;
    let (h, t, r) = (pose.altitude(), sensor.half_tan(), sensor.resolution_px as f64);
    let xs: Vec<f64> = cols
        .iter()
        .map(|&i| pose.position.x + axis_offset(h, t, (i as f64 + 0.5) / r))
        .collect();
    let mut out = vec![0u8; cols.len() * rows.len()];
    for (row_out, &j) in out.chunks_mut(cols.len().max(1)).zip(rows) {
        let y = pose.position.y + axis_offset(h, t, (j as f64 + 0.5) / r);
        for (px, &x) in row_out.iter_mut().zip(&xs) {
            *px = !scene.occluded(pose.position, DVec3::new(x, y, GROUND_Z)) as u8;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAerialImage {
    pub pose: CameraPose,
    pub sensor: SensorConfig,
    /// Row-major `resolution²` values in {0, 1}.
    pub pixels: Vec<u8>,
}

impl BinaryAerialImage {
    pub fn resolution(&self) -> u32 {
        self.sensor.resolution_px
    }

    pub fn get(&self, i: u32, j: u32) -> u8 {
        self.pixels[j as usize * self.sensor.resolution_px as usize + i as usize]
    }

    pub fn white_ratio(&self) -> f64 {
        white_ratio(&self.pixels)
    }

    pub fn to_pgm(&self) -> GrayImage {
        let res = self.sensor.resolution_px as usize;
        GrayImage::new(res, res, self.pixels.iter().map(|&v| v * 255).collect())
            .expect("image is square")
    }
}

pub fn white_ratio(bits: &[u8]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / bits.len() as f64
}

pub fn render_aerial(scene: &Scene, pose: &CameraPose, sensor: &SensorConfig) -> Result<BinaryAerialImage> {
    sensor.validate()?;
    check_pose(scene, pose)?;
    let res = sensor.resolution_px;
    let all: Vec<u32> = (0..res).collect();
    let pixels: Vec<u8> = all
        .par_iter()
        .map(|&j| render_pixels(scene, pose, sensor, &all, &[j]))
        .collect::<Result<Vec<_>>>()?
        .concat();
    Ok(BinaryAerialImage {
        pose: *pose,
        sensor: *sensor,
        pixels,
    })
}

/// Top-down orthographic occupancy over `extent`, `res × res` cells; 1 where
/// the vertical line through the cell centre reaches the ground.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<u8>,
}

impl Bitmap {
    pub fn white_ratio(&self) -> f64 {
        white_ratio(&self.bits)
    }

    pub fn to_pgm(&self) -> GrayImage {
        GrayImage::new(self.width, self.height, self.bits.iter().map(|&v| v * 255).collect())
            .expect("dimensions match")
    }
}

pub fn ortho_occupancy(scene: &Scene, extent: &Rect, res: u32) -> Result<Bitmap> {
    if res < 2 {
        return Err(Error::Param(format!("resolution must be >= 2, got {res}")));
    }
    let n = res as usize;
    let step = DVec2::new(extent.width(), extent.height()) / res as f64;
    let bits: Vec<u8> = (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..n).map(move |i| {
                let c = extent.min + step * DVec2::new(i as f64 + 0.5, j as f64 + 0.5);
                !scene.column_occluded(c) as u8
            })
        })
        .collect();
    Ok(Bitmap {
        width: n,
        height: n,
        bits,
    })
}
