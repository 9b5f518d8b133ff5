use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aos_core::config::RunConfig;
use aos_core::error::{Error, Result};
use aos_core::forest::{forest_stats, generate_forest, Forest};
use aos_core::imaging::{ortho_occupancy, render_aerial, CameraPose};
use aos_core::integration::{
    integrate, plan_flight, visibility_stats, FlightPlan, GroundGrid, IntegralImage, IntegralMetadata,
    RegionOfInterest,
};
use aos_core::oracle::oracle_integral;
use aos_core::sampling::{ground_coverage, optimal_fov, samples_per_point, SensorConfig};
use aos_core::scene::{build_scene, Scene};
use aos_core::sweep::{find_optimal_fov, run_sweep, write_plots, write_results, write_timings};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL_SWEEP: u8 = 3;

/// Airborne optical sectioning simulator over procedural forests.
///
/// Exit codes: 0 success, 1 runtime error, 2 invalid configuration or
/// arguments, 3 sweep finished with failed rows.
#[derive(Parser)]
#[command(name = "aos", version)]
struct Cli {
    /// Maximum number of worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file overlaid on the preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Base preset: desk or paper.
    #[arg(long)]
    preset: Option<String>,
    /// Override a config value, e.g. `--set flight.altitude_m=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    /// Generated forest from the config.
    Forest,
    /// A single bare trunk (radius 0.3 m, 6 m) at the origin.
    SingleTrunk,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a forest, save it as JSON and render its top-down occupancy map.
    Forest(Common),
    /// Render one binary aerial image.
    Render {
        #[command(flatten)]
        common: Common,
        /// Camera position `x,y,altitude` (overrides `pose_m`).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        pose: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "forest")]
        fixture: Fixture,
    },
    /// Fly the configured plan and write the integral image.
    Integrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "forest")]
        fixture: Fixture,
    },
    /// Run the configured parameter sweep.
    Sweep(Common),
    /// Optimal FOV from trunk-part height and tree distance, with coverage and samples.
    Predict {
        /// Average trunk-part height (m).
        #[arg(long, requires = "d_t", conflicts_with = "forest")]
        h_t: Option<f64>,
        /// Average tree distance (m).
        #[arg(long, requires = "h_t", conflicts_with = "forest")]
        d_t: Option<f64>,
        /// Forest JSON to measure h_t and d_t from.
        #[arg(long)]
        forest: Option<PathBuf>,
        /// Altitudes for the coverage table.
        #[arg(long, value_delimiter = ',', default_value = "30,40,50")]
        altitudes: Vec<f64>,
        /// Sampling distances for the coverage table.
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2")]
        sample_dists: Vec<f64>,
    },
    /// Compare the integral against brute-force sight-line counting.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "forest")]
        fixture: Fixture,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    let outcome = match cli.command {
        Command::Forest(common) => cmd_forest(&common),
        Command::Render {
            common,
            pose,
            fixture,
        } => cmd_render(&common, pose, fixture),
        Command::Integrate { common, fixture } => cmd_integrate(&common, fixture),
        Command::Sweep(common) => cmd_sweep(&common),
        Command::Predict {
            h_t,
            d_t,
            forest,
            altitudes,
            sample_dists,
        } => cmd_predict(h_t, d_t, forest.as_deref(), &altitudes, &sample_dists),
        Command::Oracle { common, fixture } => cmd_oracle(&common, fixture),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            })
        }
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let config = RunConfig::load(common.preset.as_deref(), common.config.as_deref(), &common.sets)?;
    let out = common.out.clone().unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    Ok((config, out))
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    outputs: T,
}

fn write_manifest<T: Serialize>(out: &Path, command: &str, config: &RunConfig, outputs: T) -> Result<()> {
    let manifest = Manifest {
        tool: "aos",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        outputs,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out.join("manifest.json"), text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn make_forest(config: &RunConfig) -> Result<Forest> {
    generate_forest(config.seed, config.density, config.extent(), &config.tree, config.min_spacing_m)
}

fn make_scene(config: &RunConfig, fixture: Fixture) -> Result<(Scene, String)> {
    Ok(match fixture {
        Fixture::Forest => (build_scene(&make_forest(config)?), config.density.label()),
        Fixture::SingleTrunk => (Scene::single_trunk(config.extent()), "single_trunk".into()),
    })
}

fn cmd_forest(common: &Common) -> Result<u8> {
    let (config, out) = load(common)?;
    let forest = make_forest(&config)?;
    let forest_path = out.join("forest.json");
    std::fs::write(&forest_path, forest.to_json()?)?;
    let scene = build_scene(&forest);
    let occupancy = ortho_occupancy(&scene, &forest.extent, config.ortho_resolution_px)?;
    let image_path = out.join("occupancy.pgm");
    occupancy.to_pgm().save(&image_path)?;
    println!(
        "{} trees ({}), {} primitives",
        forest.trees.len(),
        forest.density,
        scene.primitive_count()
    );
    match forest_stats(&forest) {
        Ok(s) => println!(
            "h_t = {:.3} m, d_t = {:.3} m, optimal FOV = {:.1} deg",
            s.h_t_m,
            s.d_t_m,
            s.optimal_fov()?
        ),
        Err(e) => println!("stats unavailable: {e}"),
    }
    println!("white ratio {:.6}", occupancy.white_ratio());
    write_manifest(&out, "forest", &config, [&forest_path, &image_path])?;
    Ok(0)
}

fn cmd_render(common: &Common, pose: Option<Vec<f64>>, fixture: Fixture) -> Result<u8> {
    let (config, out) = load(common)?;
    let p = pose.unwrap_or_else(|| config.pose_m.to_vec());
    if p.len() != 3 {
        return Err(Error::Config {
            key: "--pose".into(),
            message: format!("expected x,y,altitude, got {} values", p.len()),
        });
    }
    let pose = CameraPose::new(p[0], p[1], p[2])?;
    let (scene, _) = make_scene(&config, fixture)?;
    let image = render_aerial(&scene, &pose, &config.sensor)?;
    let path = out.join("render.pgm");
    image.to_pgm().save(&path)?;
    println!("white ratio {:.6}", image.white_ratio());
    write_manifest(&out, "render", &config, [&path])?;
    Ok(0)
}

struct Setup {
    scene: Scene,
    label: String,
    plan: FlightPlan,
    sensor: SensorConfig,
    grid: GroundGrid,
}

/// Plan over the configured aperture; the grid spans every cell any footprint covers.
fn setup(config: &RunConfig, fixture: Fixture) -> Result<Setup> {
    let (scene, label) = make_scene(config, fixture)?;
    let f = &config.flight;
    let plan = plan_flight(config.aperture(), f.sample_dist_m, f.altitude_m, f.mode)?;
    let c = ground_coverage(f.altitude_m, config.sensor.fov_deg)?;
    let covered = match f.mode {
        aos_core::integration::FlightMode::Grid => plan.aperture.grow(0.5 * c),
        aos_core::integration::FlightMode::Line => {
            let a = plan.aperture;
            aos_core::geometry::Rect::around(a.center(), a.width() + c, c)
        }
    };
    let grid = GroundGrid::covering(&covered, config.grid.cell_m)?;
    Ok(Setup {
        scene,
        label,
        plan,
        sensor: config.sensor,
        grid,
    })
}

fn export(out: &Path, name: &str, integral: &IntegralImage, meta: &IntegralMetadata) -> Result<[PathBuf; 2]> {
    let pgm = out.join(format!("{name}.pgm"));
    let json = out.join(format!("{name}.json"));
    integral.to_pgm().save(&pgm)?;
    write_json(&json, meta)?;
    Ok([pgm, json])
}

fn describe(config: &RunConfig, s: &Setup, tag: &str, integral: &IntegralImage) -> IntegralMetadata {
    let mut meta = IntegralMetadata::new(tag, integral, &s.plan, &s.sensor);
    meta.seed = Some(config.seed);
    meta.scene = s.label.clone();
    match RegionOfInterest::for_aperture(&s.plan.aperture, s.plan.altitude_m, s.sensor.fov_deg)
        .and_then(|roi| visibility_stats(integral, &roi).map(|v| (roi, v)))
    {
        Ok((roi, v)) => {
            meta.roi = Some(roi.rect);
            meta.visibility = Some(v.mean);
        }
        Err(e) => println!("{tag}: visibility unavailable: {e}"),
    }
    meta
}

fn cmd_integrate(common: &Common, fixture: Fixture) -> Result<u8> {
    let (config, out) = load(common)?;
    let s = setup(&config, fixture)?;
    let integral = integrate(&s.scene, &s.plan, &s.sensor, &s.grid)?;
    let meta = describe(&config, &s, "integrate", &integral);
    let files = export(&out, "integral", &integral, &meta)?;
    println!(
        "{} poses, grid {}x{} at {} m",
        s.plan.poses.len(),
        s.grid.nx,
        s.grid.ny,
        s.grid.cell_m
    );
    if let Some(v) = meta.visibility {
        println!("visibility {v:.6}");
    }
    write_manifest(&out, "integrate", &config, files)?;
    Ok(0)
}

fn cmd_oracle(common: &Common, fixture: Fixture) -> Result<u8> {
    let (config, out) = load(common)?;
    let s = setup(&config, fixture)?;
    let integral = integrate(&s.scene, &s.plan, &s.sensor, &s.grid)?;
    let oracle = oracle_integral(&s.scene, &s.plan, &s.sensor, &s.grid)?;
    let diff = integral.mean_abs_diff(&oracle)?;
    let meta = describe(&config, &s, "oracle", &oracle);
    let mut files = export(&out, "oracle", &oracle, &meta)?.to_vec();
    let meta = describe(&config, &s, "integrate", &integral);
    files.extend(export(&out, "integral", &integral, &meta)?);
    let report = out.join("oracle_diff.json");
    write_json(
        &report,
        &serde_json::json!({ "mean_abs_diff": diff, "resolution_px": s.sensor.resolution_px }),
    )?;
    files.push(report);
    println!("mean absolute difference {diff:.6}");
    write_manifest(&out, "oracle", &config, files)?;
    Ok(0)
}

fn cmd_sweep(common: &Common) -> Result<u8> {
    let (config, out) = load(common)?;
    let sweep = &config.sweep;
    eprintln!("running {} sweep cells", sweep.cell_count());
    let records = run_sweep(sweep)?;
    let results = out.join("results.csv");
    let timings = out.join("timings.csv");
    write_results(&results, &records)?;
    write_timings(&timings, &records)?;
    let plots = write_plots(out.join("plots"), sweep, &records)?;
    for &density in &sweep.densities {
        for &h in &sweep.altitudes_m {
            for &d in &sweep.sample_dists_m {
                match find_optimal_fov(&records, density, h, d) {
                    Ok(f) => println!("{density} h={h} d={d}: best FOV {f} deg"),
                    Err(e) => println!("{density} h={h} d={d}: {e}"),
                }
            }
        }
    }
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    write_manifest(&out, "sweep", &config, (&results, &timings, &plots))?;
    println!("{} rows, {failed} failed", records.len());
    if failed > 0 {
        eprintln!("{failed} of {} sweep rows failed; see the reason column", records.len());
        return Ok(EXIT_PARTIAL_SWEEP);
    }
    Ok(0)
}

fn cmd_predict(h_t: Option<f64>, d_t: Option<f64>, forest: Option<&Path>, altitudes: &[f64], dists: &[f64]) -> Result<u8> {
    let (h_t, d_t) = match (h_t, d_t, forest) {
        (Some(h), Some(d), None) => (h, d),
        (None, None, Some(path)) => {
            let bytes = std::fs::read(path)?;
            let stats = forest_stats(&Forest::from_json(&bytes)?)?;
            println!("measured h_t = {:.3} m, d_t = {:.3} m", stats.h_t_m, stats.d_t_m);
            (stats.h_t_m, stats.d_t_m)
        }
        _ => {
            return Err(Error::Config {
                key: "predict".into(),
                message: "give either --h-t and --d-t, or --forest".into(),
            })
        }
    };
    let fov = optimal_fov(d_t, h_t)?;
    println!("optimal FOV {fov:.1} deg");
    println!("{:>10} {:>10} {:>12} {:>10}", "h_m", "d_m", "coverage_m", "n");
    for &h in altitudes {
        let c = ground_coverage(h, fov)?;
        for &d in dists {
            println!("{h:>10} {d:>10} {c:>12.3} {:>10.2}", samples_per_point(c, d)?);
        }
    }
    Ok(0)
}
