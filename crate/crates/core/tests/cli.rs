use std::path::Path;
use std::process::{Command, Output};

fn aos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aos"))
        .args(args)
        .output()
        .expect("spawn aos")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn line_value(text: &str, prefix: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_else(|| panic!("no `{prefix}` line in:\n{text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn help_lists_subcommands() {
    let text = stdout(&aos(&["--help"]));
    for cmd in ["forest", "render", "integrate", "sweep", "predict", "oracle"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn predict_worked_examples() {
    for (h_t, d_t, fov) in [(7.0, 3.0, 46.4), (7.0, 3.5, 53.1), (5.0, 3.5, 70.0)] {
        let out = aos(&["predict", "--h-t", &h_t.to_string(), "--d-t", &d_t.to_string()]);
        assert!(out.status.success());
        let got = line_value(&stdout(&out), "optimal FOV ");
        assert!((got - fov).abs() <= 0.1, "h_t={h_t} d_t={d_t}: {got}");
    }
}

fn white_ratio(dir: &Path, density: &str) -> f64 {
    let out = aos(&[
        "forest",
        "-o",
        dir.join(density).to_str().unwrap(),
        "--set",
        &format!("density={density}"),
        "--set",
        "extent_m=[40,40]",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    line_value(&stdout(&out), "white ratio ")
}

#[test]
fn forest_occupancy_orders_by_density() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(white_ratio(dir.path(), "0"), 1.0);
    let ratios: Vec<f64> = ["sparse", "medium", "dense"]
        .iter()
        .map(|d| white_ratio(dir.path(), d))
        .collect();
    assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2], "{ratios:?}");
    for d in ["sparse", "medium", "dense"] {
        for f in ["forest.json", "occupancy.pgm", "manifest.json"] {
            assert!(dir.path().join(d).join(f).is_file(), "{d}/{f}");
        }
    }
}

#[test]
fn config_errors_exit_2_with_key_path() {
    let out = aos(&["forest", "--set", "flight.bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("flight.bogus"));

    let out = aos(&["sweep", "--set", "sweep.sample_dists_m=[1,-1]"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep.sample_dists_m[1]"));
}

#[test]
fn partial_sweep_exits_3_and_keeps_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = aos(&[
        "sweep",
        "-o",
        dir.path().to_str().unwrap(),
        "--set",
        "sweep.extent_m=[40,40]",
        "--set",
        "sweep.fovs_deg=[20,90]",
        "--set",
        "sweep.altitudes_m=[30]",
        "--set",
        "sweep.sample_dists_m=[2]",
        "--set",
        "sweep.densities=[\"sparse\"]",
        "--set",
        "sweep.seeds=[1]",
        "--set",
        "sweep.resolution_px=16",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("footprint_exceeds_extent"));
    assert!(dir.path().join("timings.csv").is_file());
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn oracle_single_trunk_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = aos(&["oracle", "--fixture", "single-trunk", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(line_value(&stdout(&out), "mean absolute difference ") <= 0.05);
    assert!(dir.path().join("oracle_diff.json").is_file());
}
