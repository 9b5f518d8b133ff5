//! Factorial parameter sweeps over field of view, altitude, sampling distance
//! and forest density.
//!
//! Every configuration is scored on the same central evaluation square of
//! the forest. The flight aperture is that square grown by half a footprint on
//! each side, so the square is exactly the region where every cell sees the
//! full sample count.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};
use std::time::Instant;

use plotters::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{forest_stats, generate_forest, DensityClass, TreeParams, DEFAULT_MIN_SPACING_M};
use crate::geometry::Rect;
use crate::integration::{
    integrate, plan_flight, visibility_stats, FlightMode, GroundGrid, RegionOfInterest, FOOTPRINT_EXCEEDS_EXTENT,
};
use crate::sampling::{ground_coverage, samples_per_point, ForestStats, SensorConfig};
use crate::scene::{build_scene, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub fovs_deg: Vec<f64>,
    pub altitudes_m: Vec<f64>,
    pub sample_dists_m: Vec<f64>,
    pub densities: Vec<DensityClass>,
    pub seeds: Vec<u64>,
    pub resolution_px: u32,
    /// Forest patch size `[x, y]`, centred on the origin.
    pub extent_m: [f64; 2],
    /// Side of the central evaluation square.
    pub roi_m: f64,
    pub mode: FlightMode,
    pub cell_m: f64,
    pub min_spacing_m: f64,
    pub tree: TreeParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::desk()
    }
}

impl SweepConfig {
    /// Laptop-scale preset: 100 m patch, 128 px images.
    pub fn desk() -> Self {
        SweepConfig {
            fovs_deg: (2..=9).map(|k| k as f64 * 10.0).collect(),
            altitudes_m: vec![30.0, 40.0, 50.0],
            sample_dists_m: vec![0.5, 1.0, 1.5, 2.0],
            densities: vec![DensityClass::Sparse, DensityClass::Medium, DensityClass::Dense],
            seeds: (1..=5).collect(),
            resolution_px: 128,
            extent_m: [100.0, 100.0],
            roi_m: 16.0,
            mode: FlightMode::Grid,
            cell_m: 0.5,
            min_spacing_m: DEFAULT_MIN_SPACING_M,
            tree: TreeParams::default(),
        }
    }

    /// Full-size preset: 150 m patch, 512 px images, 0.25 m cells.
    pub fn paper() -> Self {
        SweepConfig {
            resolution_px: 512,
            extent_m: [150.0, 150.0],
            roi_m: 20.0,
            cell_m: 0.25,
            ..SweepConfig::desk()
        }
    }

    pub fn extent(&self) -> Rect {
        Rect::centered(self.extent_m[0], self.extent_m[1])
    }

    pub fn roi(&self) -> RegionOfInterest {
        RegionOfInterest::new(Rect::centered(self.roi_m, self.roi_m))
    }

    /// Checks every list and scalar; the error key names the offending field.
    pub fn validate(&self) -> Result<()> {
        fn nonempty<T>(key: &str, v: &[T]) -> Result<()> {
            if v.is_empty() {
                return Err(Error::config(key, "must not be empty"));
            }
            Ok(())
        }
        nonempty("fovs_deg", &self.fovs_deg)?;
        nonempty("altitudes_m", &self.altitudes_m)?;
        nonempty("sample_dists_m", &self.sample_dists_m)?;
        nonempty("densities", &self.densities)?;
        nonempty("seeds", &self.seeds)?;
        for (i, &f) in self.fovs_deg.iter().enumerate() {
            if !(f > 0.0 && f < 180.0) {
                return Err(Error::config(format!("fovs_deg[{i}]"), format!("{f} is not in (0, 180)")));
            }
        }
        for (i, &h) in self.altitudes_m.iter().enumerate() {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("altitudes_m[{i}]"), format!("{h} is not positive")));
            }
        }
        for (i, &d) in self.sample_dists_m.iter().enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config(format!("sample_dists_m[{i}]"), format!("{d} is not positive")));
            }
        }
        for (i, dens) in self.densities.iter().enumerate() {
            let t = dens.trees_per_ha();
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config(format!("densities[{i}]"), format!("{t} trees/ha is not valid")));
            }
        }
        if self.resolution_px < 2 {
            return Err(Error::config("resolution_px", "must be >= 2"));
        }
        if !(self.extent_m.iter().all(|v| *v > 0.0 && v.is_finite())) {
            return Err(Error::config("extent_m", "both sides must be positive"));
        }
        if !(self.roi_m > 0.0 && self.roi_m <= self.extent_m[0].min(self.extent_m[1])) {
            return Err(Error::config("roi_m", "must be positive and fit inside the extent"));
        }
        if !(self.cell_m > 0.0 && self.cell_m <= self.roi_m) {
            return Err(Error::config("cell_m", "must be positive and no larger than roi_m"));
        }
        if !(self.min_spacing_m >= 0.0 && self.min_spacing_m.is_finite()) {
            return Err(Error::config("min_spacing_m", "must be non-negative"));
        }
        self.tree
            .validate()
            .map_err(|e| Error::config("tree", e.to_string()))
    }

    pub fn cell_count(&self) -> usize {
        self.fovs_deg.len()
            * self.altitudes_m.len()
            * self.sample_dists_m.len()
            * self.densities.len()
            * self.seeds.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

/// One row of the results table. Visibility columns are empty on failed rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub density_class: DensityClass,
    pub trees_per_ha: f64,
    pub seed: u64,
    pub fov_deg: f64,
    pub altitude_m: f64,
    pub sample_dist_m: f64,
    pub coverage_m: f64,
    pub samples_n: f64,
    pub visibility_mean: Option<f64>,
    pub visibility_std: Option<f64>,
    pub pose_count: usize,
    pub roi_cells: usize,
    pub d_t_m: Option<f64>,
    pub h_t_m: Option<f64>,
    pub status: RecordStatus,
    pub reason: String,
    /// Wall-clock time; kept out of the results table so reruns compare equal.
    #[serde(skip)]
    pub runtime_s: f64,
}

/// Column order of the results table.
pub const RESULTS_HEADER: [&str; 16] = [
    "density_class",
    "trees_per_ha",
    "seed",
    "fov_deg",
    "altitude_m",
    "sample_dist_m",
    "coverage_m",
    "samples_n",
    "visibility_mean",
    "visibility_std",
    "pose_count",
    "roi_cells",
    "d_t_m",
    "h_t_m",
    "status",
    "reason",
];

impl SweepRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

struct SceneJob {
    density: DensityClass,
    seed: u64,
    scene: Scene,
    stats: Option<ForestStats>,
}

fn build_job(config: &SweepConfig, density: DensityClass, seed: u64) -> Result<SceneJob> {
    let forest = generate_forest(seed, density, config.extent(), &config.tree, config.min_spacing_m)?;
    let stats = forest_stats(&forest).ok();
    Ok(SceneJob {
        density,
        seed,
        scene: build_scene(&forest),
        stats,
    })
}

fn run_cell(config: &SweepConfig, job: &SceneJob, fov: f64, h: f64, d: f64) -> Result<SweepRecord> {
    let coverage_m = ground_coverage(h, fov)?;
    let samples_n = samples_per_point(coverage_m, d)?;
    let roi = config.roi();
    let grid = GroundGrid::covering(&roi.rect, config.cell_m)?;
    let aperture = roi.rect.grow(0.5 * coverage_m);
    let mut record = SweepRecord {
        density_class: job.density,
        trees_per_ha: job.density.trees_per_ha(),
        seed: job.seed,
        fov_deg: fov,
        altitude_m: h,
        sample_dist_m: d,
        coverage_m,
        samples_n,
        visibility_mean: None,
        visibility_std: None,
        pose_count: 0,
        roi_cells: 0,
        d_t_m: job.stats.map(|s| s.d_t_m),
        h_t_m: job.stats.map(|s| s.h_t_m),
        status: RecordStatus::Failed,
        reason: String::new(),
        runtime_s: 0.0,
    };
    if !config.extent().contains_rect(&aperture) {
        record.reason = FOOTPRINT_EXCEEDS_EXTENT.into();
        return Ok(record);
    }
    let start = Instant::now();
    let outcome = plan_flight(aperture, d, h, config.mode).and_then(|plan| {
        record.pose_count = plan.poses.len();
        let sensor = SensorConfig::new(fov, config.resolution_px)?;
        let integral = integrate(&job.scene, &plan, &sensor, &grid)?;
        visibility_stats(&integral, &roi)
    });
    record.runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(stats) => {
            record.visibility_mean = Some(stats.mean);
            record.visibility_std = Some(stats.std);
            record.roi_cells = stats.cells;
            record.status = RecordStatus::Ok;
        }
        Err(e) => record.reason = e.to_string(),
    }
    Ok(record)
}

/// Runs the full factorial product. Rows come back in canonical order
/// (density, seed, fov, altitude, sampling distance, each in config order)
/// regardless of how jobs were scheduled. Cells that cannot be evaluated are
/// returned as failed rows.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    let jobs: Vec<(DensityClass, u64)> = config
        .densities
        .iter()
        .flat_map(|&d| config.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let cells: Vec<(f64, f64, f64)> = config
        .fovs_deg
        .iter()
        .flat_map(|&f| {
            config
                .altitudes_m
                .iter()
                .flat_map(move |&h| config.sample_dists_m.iter().map(move |&d| (f, h, d)))
        })
        .collect();
    let per_job: Vec<Vec<SweepRecord>> = jobs
        .par_iter()
        .map(|&(density, seed)| {
            let job = build_job(config, density, seed)?;
            cells
                .par_iter()
                .map(|&(f, h, d)| run_cell(config, &job, f, h, d))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Seed-averaged visibility of one configuration over its successful rows.
pub fn seed_mean(records: &[SweepRecord], density: DensityClass, fov: f64, altitude_m: f64, sample_dist_m: f64) -> Option<f64> {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| {
            r.density_class == density
                && r.fov_deg == fov
                && r.altitude_m == altitude_m
                && r.sample_dist_m == sample_dist_m
        })
        .filter_map(|r| r.visibility_mean)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Seed-averaged visibility per FOV, ascending in FOV.
pub fn fov_curve(records: &[SweepRecord], density: DensityClass, altitude_m: f64, sample_dist_m: f64) -> Vec<(f64, f64)> {
    let mut fovs: Vec<f64> = records
        .iter()
        .filter(|r| {
            r.is_ok()
                && r.density_class == density
                && r.altitude_m == altitude_m
                && r.sample_dist_m == sample_dist_m
        })
        .map(|r| r.fov_deg)
        .collect();
    fovs.sort_by(f64::total_cmp);
    fovs.dedup();
    fovs.into_iter()
        .filter_map(|f| seed_mean(records, density, f, altitude_m, sample_dist_m).map(|v| (f, v)))
        .collect()
}

/// FOV with the highest seed-averaged visibility; ties go to the narrower FOV.
pub fn find_optimal_fov(records: &[SweepRecord], density: DensityClass, altitude_m: f64, sample_dist_m: f64) -> Result<f64> {
    let curve = fov_curve(records, density, altitude_m, sample_dist_m);
    if curve.is_empty() {
        return Err(Error::Query(format!(
            "no successful records for {density} at h = {altitude_m} m, d = {sample_dist_m} m"
        )));
    }
    if curve.len() < 2 {
        return Err(Error::Query(format!(
            "need at least two fields of view for {density} at h = {altitude_m} m, d = {sample_dist_m} m"
        )));
    }
    let mut best = curve[0];
    for &(f, v) in &curve[1..] {
        if v.partial_cmp(&best.1) == Some(Ordering::Greater) {
            best = (f, v);
        }
    }
    Ok(best.0)
}

pub fn write_results(path: impl AsRef<Path>, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct TimingRow<'a> {
    density_class: &'a DensityClass,
    seed: u64,
    fov_deg: f64,
    altitude_m: f64,
    sample_dist_m: f64,
    runtime_s: f64,
}

pub fn write_timings(path: impl AsRef<Path>, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(TimingRow {
            density_class: &r.density_class,
            seed: r.seed,
            fov_deg: r.fov_deg,
            altitude_m: r.altitude_m,
            sample_dist_m: r.sample_dist_m,
            runtime_s: r.runtime_s,
        })?;
    }
    w.flush()?;
    Ok(())
}

type Series = (String, Vec<(f64, f64)>);

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

fn line_chart(path: &Path, title: &str, x_desc: &str, series: &[Series]) -> Result<()> {
    let points = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let xpad = ((x1 - x0) * 0.05).max(0.5);
    let ypad = ((y1 - y0) * 0.1).max(0.01);
    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(60)
        .build_cartesian_2d((x0 - xpad)..(x1 + xpad), (y0 - ypad).max(0.0)..(y1 + ypad).min(1.0))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc("visibility")
        .draw()
        .map_err(plot_err)?;
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Visibility against FOV (one line per altitude and sampling distance) and
/// against sample count at the lowest altitude (one line per FOV), per density.
pub fn write_plots(dir: impl AsRef<Path>, config: &SweepConfig, records: &[SweepRecord]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let h_low = config
        .altitudes_m
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    for &density in &config.densities {
        let mut by_fov = Vec::new();
        for &h in &config.altitudes_m {
            for &d in &config.sample_dists_m {
                let curve = fov_curve(records, density, h, d);
                if !curve.is_empty() {
                    by_fov.push((format!("h={h} m, d={d} m"), curve));
                }
            }
        }
        let path = dir.join(format!("visibility_vs_fov_{}.svg", density.label().replace(':', "_")));
        line_chart(&path, &format!("{density}: visibility vs FOV"), "FOV (deg)", &by_fov)?;
        written.push(path);

        let mut by_n = Vec::new();
        for &f in &config.fovs_deg {
            let mut pts: Vec<(f64, f64)> = config
                .sample_dists_m
                .iter()
                .filter_map(|&d| {
                    let n = samples_per_point(ground_coverage(h_low, f).ok()?, d).ok()?;
                    seed_mean(records, density, f, h_low, d).map(|v| (n, v))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            if !pts.is_empty() {
                by_n.push((format!("FOV={f} deg"), pts));
            }
        }
        let path = dir.join(format!("visibility_vs_n_{}.svg", density.label().replace(':', "_")));
        line_chart(
            &path,
            &format!("{density}: visibility vs samples (h={h_low} m)"),
            "samples per point n",
            &by_n,
        )?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(fovs: Vec<f64>, density: DensityClass) -> SweepConfig {
        SweepConfig {
            fovs_deg: fovs,
            altitudes_m: vec![30.0],
            sample_dists_m: vec![2.0],
            densities: vec![density],
            seeds: vec![7],
            resolution_px: 32,
            extent_m: [60.0, 60.0],
            roi_m: 4.0,
            cell_m: 1.0,
            ..SweepConfig::desk()
        }
    }

    fn rec(density: DensityClass, seed: u64, fov: f64, v: f64) -> SweepRecord {
        SweepRecord {
            density_class: density,
            trees_per_ha: density.trees_per_ha(),
            seed,
            fov_deg: fov,
            altitude_m: 30.0,
            sample_dist_m: 1.0,
            coverage_m: ground_coverage(30.0, fov).unwrap(),
            samples_n: samples_per_point(ground_coverage(30.0, fov).unwrap(), 1.0).unwrap(),
            visibility_mean: Some(v),
            visibility_std: Some(0.0),
            pose_count: 1,
            roi_cells: 1,
            d_t_m: None,
            h_t_m: None,
            status: RecordStatus::Ok,
            reason: String::new(),
            runtime_s: 0.0,
        }
    }

    #[test]
    fn empty_forest_is_fully_visible() {
        let records = run_sweep(&tiny(vec![50.0], DensityClass::Custom(0.0))).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].visibility_mean, Some(1.0));
    }

    #[test]
    fn coverage_ratio_follows_half_angle_tangent() {
        let records = run_sweep(&tiny(vec![30.0, 60.0], DensityClass::Custom(0.0))).unwrap();
        assert_eq!(records.len(), 2);
        let ratio = records[0].coverage_m / records[1].coverage_m;
        let expect = 15f64.to_radians().tan() / 30f64.to_radians().tan();
        assert!((ratio - expect).abs() < 1e-12);
    }

    #[test]
    fn oversized_footprint_is_recorded_not_fatal() {
        let records = run_sweep(&tiny(vec![40.0, 120.0], DensityClass::Custom(20.0))).unwrap();
        assert_eq!(records.len(), 2);
        assert!(records[0].is_ok());
        assert_eq!(records[1].status, RecordStatus::Failed);
        assert_eq!(records[1].reason, FOOTPRINT_EXCEEDS_EXTENT);
        assert_eq!(records[1].visibility_mean, None);
    }

    #[test]
    fn optimal_fov_argmax_and_ties() {
        let d = DensityClass::Medium;
        let recs = vec![rec(d, 1, 20.0, 0.3), rec(d, 1, 50.0, 0.5), rec(d, 1, 90.0, 0.4)];
        assert_eq!(find_optimal_fov(&recs, d, 30.0, 1.0).unwrap(), 50.0);
        let tie = vec![rec(d, 1, 60.0, 0.5), rec(d, 1, 40.0, 0.5)];
        assert_eq!(find_optimal_fov(&tie, d, 30.0, 1.0).unwrap(), 40.0);
        assert!(matches!(find_optimal_fov(&tie, DensityClass::Dense, 30.0, 1.0), Err(Error::Query(_))));
        assert!(matches!(find_optimal_fov(&tie, d, 40.0, 1.0), Err(Error::Query(_))));
    }

    #[test]
    fn optimal_fov_averages_seeds() {
        let d = DensityClass::Dense;
        let recs = vec![
            rec(d, 1, 30.0, 0.9),
            rec(d, 2, 30.0, 0.1),
            rec(d, 1, 60.0, 0.6),
            rec(d, 2, 60.0, 0.5),
        ];
        assert_eq!(find_optimal_fov(&recs, d, 30.0, 1.0).unwrap(), 60.0);
    }

    #[test]
    fn results_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let mut recs = vec![rec(DensityClass::Sparse, 3, 50.0, 0.123456789)];
        let mut failed = rec(DensityClass::Custom(12.5), 4, 90.0, 0.0);
        failed.visibility_mean = None;
        failed.visibility_std = None;
        failed.status = RecordStatus::Failed;
        failed.reason = FOOTPRINT_EXCEEDS_EXTENT.into();
        recs.push(failed);
        write_results(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
        assert_eq!(read_results(&path).unwrap(), recs);
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = SweepConfig::desk();
        c.sample_dists_m = vec![1.0, -1.0];
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "sample_dists_m[1]"),
            other => panic!("{other:?}"),
        }
        c = SweepConfig::desk();
        c.seeds.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn plots_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny(vec![30.0, 50.0], DensityClass::Custom(30.0));
        let records = run_sweep(&config).unwrap();
        let files = write_plots(dir.path(), &config, &records).unwrap();
        assert_eq!(files.len(), 2);
        for f in files {
            let svg = std::fs::read_to_string(f).unwrap();
            assert!(svg.starts_with("<svg"));
        }
    }
}
