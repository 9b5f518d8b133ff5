//! Run configuration: a preset, optionally overlaid with a JSON file and
//! `key=value` overrides, validated before any work starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::forest::{DensityClass, TreeParams, DEFAULT_MIN_SPACING_M};
use crate::geometry::Rect;
use crate::integration::FlightMode;
use crate::sampling::SensorConfig;
use crate::sweep::SweepConfig;

pub const PRESETS: [&str; 2] = ["desk", "paper"];

/// Default field of view for single integrations.
pub const DEFAULT_FOV_DEG: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlightConfig {
    pub altitude_m: f64,
    pub sample_dist_m: f64,
    pub mode: FlightMode,
    /// Size `[x, y]` of the area the poses span, centred on the forest.
    pub aperture_m: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cell_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub density: DensityClass,
    pub extent_m: [f64; 2],
    pub min_spacing_m: f64,
    pub tree: TreeParams,
    pub sensor: SensorConfig,
    pub flight: FlightConfig,
    pub grid: GridConfig,
    /// Camera position `[x, y, altitude]` for single renders.
    pub pose_m: [f64; 3],
    pub ortho_resolution_px: u32,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig {
            preset: "desk".into(),
            seed: 1,
            density: DensityClass::Medium,
            extent_m: [100.0, 100.0],
            min_spacing_m: DEFAULT_MIN_SPACING_M,
            tree: TreeParams::default(),
            sensor: SensorConfig {
                fov_deg: DEFAULT_FOV_DEG,
                resolution_px: 128,
            },
            flight: FlightConfig {
                altitude_m: 30.0,
                sample_dist_m: 1.0,
                mode: FlightMode::Grid,
                aperture_m: [40.0, 40.0],
            },
            grid: GridConfig { cell_m: 0.5 },
            pose_m: [0.0, 0.0, 30.0],
            ortho_resolution_px: 512,
            sweep: SweepConfig::desk(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn paper() -> Self {
        RunConfig {
            preset: "paper".into(),
            extent_m: [150.0, 150.0],
            sensor: SensorConfig {
                fov_deg: DEFAULT_FOV_DEG,
                resolution_px: 512,
            },
            grid: GridConfig { cell_m: 0.25 },
            ortho_resolution_px: 1024,
            sweep: SweepConfig::paper(),
            ..RunConfig::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(RunConfig::desk()),
            "paper" => Ok(RunConfig::paper()),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}`, expected one of {PRESETS:?}"),
            )),
        }
    }

    pub fn extent(&self) -> Rect {
        Rect::centered(self.extent_m[0], self.extent_m[1])
    }

    /// Flight aperture, centred on the forest.
    pub fn aperture(&self) -> Rect {
        Rect::around(self.extent().center(), self.flight.aperture_m[0], self.flight.aperture_m[1])
    }

    /// Resolves preset, file and overrides. The preset named by `preset`
    /// wins over a `preset` key in the file; without either, `desk` is used.
    pub fn load(preset: Option<&str>, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let file_value = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::config("<file>", format!("cannot read {}: {e}", path.display()))
                })?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
                if !v.is_object() {
                    return Err(Error::config("<file>", "top level must be an object"));
                }
                Some(v)
            }
            None => None,
        };
        let name = preset
            .map(str::to_owned)
            .or_else(|| {
                file_value
                    .as_ref()
                    .and_then(|v| v.get("preset"))
                    .and_then(Value::as_str)
                    .map(str::to_owned)
            })
            .unwrap_or_else(|| "desk".into());
        let mut merged = serde_json::to_value(RunConfig::preset(&name)?)?;
        if let Some(v) = file_value {
            merge(&mut merged, v);
        }
        merged["preset"] = Value::String(name);
        for item in overrides {
            apply_override(&mut merged, item)?;
        }
        RunConfig::from_value(merged)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !PRESETS.contains(&self.preset.as_str()) {
            return Err(Error::config("preset", format!("unknown preset `{}`", self.preset)));
        }
        let tph = self.density.trees_per_ha();
        if !(tph >= 0.0 && tph.is_finite()) {
            return Err(Error::config("density", format!("{tph} trees/ha is not valid")));
        }
        for (i, v) in self.extent_m.iter().enumerate() {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("extent_m[{i}]"), "must be positive"));
            }
        }
        if !(self.min_spacing_m >= 0.0 && self.min_spacing_m.is_finite()) {
            return Err(Error::config("min_spacing_m", "must be non-negative"));
        }
        self.tree.validate().map_err(|e| Error::config("tree", e.to_string()))?;
        if let Err(e) = crate::sampling::alpha_max(self.sensor.fov_deg) {
            return Err(Error::config("sensor.fov_deg", e.to_string()));
        }
        if self.sensor.resolution_px < 2 {
            return Err(Error::config("sensor.resolution_px", "must be >= 2"));
        }
        let f = &self.flight;
        if !(f.altitude_m > 0.0 && f.altitude_m.is_finite()) {
            return Err(Error::config("flight.altitude_m", "must be positive"));
        }
        if !(f.sample_dist_m > 0.0 && f.sample_dist_m.is_finite()) {
            return Err(Error::config("flight.sample_dist_m", "must be positive"));
        }
        for (i, v) in f.aperture_m.iter().enumerate() {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("flight.aperture_m[{i}]"), "must be non-negative"));
            }
        }
        if !(self.grid.cell_m > 0.0 && self.grid.cell_m.is_finite()) {
            return Err(Error::config("grid.cell_m", "must be positive"));
        }
        if !(self.pose_m[2] > 0.0 && self.pose_m.iter().all(|v| v.is_finite())) {
            return Err(Error::config("pose_m", "altitude must be positive"));
        }
        if self.ortho_resolution_px < 1 {
            return Err(Error::config("ortho_resolution_px", "must be >= 1"));
        }
        self.sweep.validate().map_err(|e| match e {
            Error::Config { key, message } => Error::config(format!("sweep.{key}"), message),
            other => other,
        })
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`. The value is parsed as JSON when possible and taken
/// as a plain string otherwise, so `density=dense` and `seed=4` both work.
fn apply_override(root: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(item, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(key, "empty key segment"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_owned()));
    let mut slot = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let here = parts[..=depth].join(".");
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| Error::config(&here, "parent is not an object"))?;
        if depth + 1 == parts.len() {
            obj.insert((*part).to_owned(), value);
            return Ok(());
        }
        slot = obj
            .get_mut(*part)
            .ok_or_else(|| Error::config(&here, "unknown key"))?;
    }
    Ok(())
}
