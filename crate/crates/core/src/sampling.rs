//! Closed-form sampling geometry of a nadir camera flown over flat ground.
//!
//! All angles cross this API in degrees; trigonometry happens in radians
//! internally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION_PX: u32 = 512;

/// Square-frustum camera intrinsics. `fov_deg` is the full angle across each
/// image axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub fov_deg: f64,
    #[serde(default = "default_resolution")]
    pub resolution_px: u32,
}

fn default_resolution() -> u32 {
    DEFAULT_RESOLUTION_PX
}

impl SensorConfig {
    pub fn new(fov_deg: f64, resolution_px: u32) -> Result<Self> {
        let sensor = SensorConfig {
            fov_deg,
            resolution_px,
        };
        sensor.validate()?;
        Ok(sensor)
    }

    pub fn validate(&self) -> Result<()> {
        alpha_max(self.fov_deg)?;
        if self.resolution_px < 2 {
            return Err(Error::Param(format!(
                "resolution_px must be >= 2, got {}",
                self.resolution_px
            )));
        }
        Ok(())
    }

    /// tan of the half-angle, i.e. the image-plane half extent at unit depth.
    pub fn half_tan(&self) -> f64 {
        (self.fov_deg * 0.5).to_radians().tan()
    }
}

/// Altitude, sampling distance and the coverage/sample count they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGeometry {
    pub altitude_m: f64,
    pub sample_dist_m: f64,
    pub coverage_m: f64,
    pub samples_n: f64,
}

impl SamplingGeometry {
    pub fn new(altitude_m: f64, sample_dist_m: f64, fov_deg: f64) -> Result<Self> {
        if !(altitude_m > 0.0) {
            return Err(Error::Domain(format!(
                "altitude must be positive, got {altitude_m}"
            )));
        }
        let coverage_m = ground_coverage(altitude_m, fov_deg)?;
        let samples_n = samples_per_point(coverage_m, sample_dist_m)?;
        Ok(SamplingGeometry {
            altitude_m,
            sample_dist_m,
            coverage_m,
            samples_n,
        })
    }
}

/// Average trunk-part height, average nearest-neighbour tree distance and the
/// realized stand density of a forest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestStats {
    pub h_t_m: f64,
    pub d_t_m: f64,
    pub trees_per_ha: f64,
}

/// Maximal off-nadir viewing angle: half the field of view. Must stay below 90°.
pub fn alpha_max(fov_deg: f64) -> Result<f64> {
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(Error::Domain(format!(
            "field of view must lie in (0, 180) degrees, got {fov_deg}"
        )));
    }
    Ok(fov_deg / 2.0)
}

/// Ground footprint width `2 h tan(alpha_max)` of one nadir image.
pub fn ground_coverage(altitude_m: f64, fov_deg: f64) -> Result<f64> {
    let alpha = alpha_max(fov_deg)?;
    if !(altitude_m >= 0.0) {
        return Err(Error::Domain(format!(
            "altitude must be non-negative, got {altitude_m}"
        )));
    }
    Ok(2.0 * altitude_m * alpha.to_radians().tan())
}

/// How many poses see the same ground point: `coverage / spacing`, unfloored.
pub fn samples_per_point(coverage_m: f64, sample_dist_m: f64) -> Result<f64> {
    if !(sample_dist_m > 0.0) {
        return Err(Error::Domain(format!(
            "sampling distance must be positive, got {sample_dist_m}"
        )));
    }
    if !(coverage_m >= 0.0) {
        return Err(Error::Domain(format!(
            "coverage must be non-negative, got {coverage_m}"
        )));
    }
    Ok(coverage_m / sample_dist_m)
}

/// Field of view at which the steepest sight line just passes under the
/// neighbouring crown: `2 atan(d_t / h_t)`.
pub fn optimal_fov(d_t_m: f64, h_t_m: f64) -> Result<f64> {
    if !(d_t_m > 0.0 && h_t_m > 0.0) {
        return Err(Error::Domain(format!(
            "tree distance and trunk height must be positive, got d_t={d_t_m}, h_t={h_t_m}"
        )));
    }
    Ok(2.0 * (d_t_m / h_t_m).atan().to_degrees())
}

impl ForestStats {
    pub fn optimal_fov(&self) -> Result<f64> {
        optimal_fov(self.d_t_m, self.h_t_m)
    }
}
