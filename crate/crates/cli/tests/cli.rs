use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn lcf(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcf"))
        .args(args)
        .arg("--output")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config_arg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

/// Writes a config into `dir`, with paths pointing at the shipped materials.
fn write_config(dir: &Path, json: &str) -> String {
    let text = json.replace("@MATERIALS@", &configs().join("materials").to_string_lossy());
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_column(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn calibrate_reproduces_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lcf(&["calibrate"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("calibration.csv")).unwrap();
    let unit: Vec<f64> = csv
        .lines()
        .find(|l| l.starts_with("unit_area,"))
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((unit[0] - 2536.0).abs() / 2536.0 < 5e-3);
    assert!((unit[1] - 0.254).abs() / 0.254 < 5e-3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "calibrate");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn calibrate_config_matches_defaults() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(lcf(&["calibrate"], a.path()).status.code(), Some(0));
    let o = lcf(&["calibrate", "--config", &config_arg("calibrate.json")], b.path());
    assert_eq!(o.status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("calibration.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn pof_with_injected_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lcf(&["pof", "--config", &config_arg("weibull_check.json")], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("eta 3.568221e3"));
    let csv = fs::read_to_string(tmp.path().join("pof.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows[0][1], 0.0);
    let at2000 = rows.iter().find(|r| r[0] == 2000.0).unwrap()[1];
    assert!((at2000 - 0.27).abs() / 0.27 < 0.02, "{at2000}");
}

#[test]
fn solve_rod_reports_peak_and_balances_reactions() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lcf(&["solve", "--config", &config_arg("rod.json")], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("peak von Mises"));
    let s = fs::read_to_string(tmp.path().join("solve_summary.csv")).unwrap();
    assert!((csv_column(&s, "reaction_x") + 18.85).abs() < 1e-8);
    assert!(csv_column(&s, "reaction_y").abs() < 1e-8);
    // the hot spot sits near the clamp on the inner side of the first bend
    assert!(csv_column(&s, "peak_x") < 1.5);
    assert!(csv_column(&s, "peak_y") > 0.3);
    for f in ["displacement.csv", "displacement.vtk", "manifest.json"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    let vtk = fs::read_to_string(tmp.path().join("displacement.vtk")).unwrap();
    assert!(vtk.contains("CELL_TYPES 60\n25\n"));
}

#[test]
fn zero_load_gives_zero_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"mesh": {"rod": {"axial_divisions": 4}}, "load": {"volume": {"type": "none"}, "traction": {"type": "none"}}}"#,
    );
    let out = tmp.path().join("out");
    let o = lcf(&["solve", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("displacement.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for v in line.split(',').skip(4) {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(lcf(&["solve"], &out).status.code(), Some(2));
    assert_eq!(lcf(&["solve", "--config", "/nonexistent/config.json"], &out).status.code(), Some(2));
    let cases = [
        r#"{"mesh": "#,
        r#"{"mesh": {"rod": {}}, "unknown_key": 1}"#,
        r#"{"mesh": {"rod": {}}, "times": [-1.0]}"#,
        r#"{"mesh": {"rod": {}}, "validation": {"thresholds": {"total": 2.0}}}"#,
        r#"{"mesh": {"rod": {}}, "lcf": "missing_material.json"}"#,
        r#"{"mesh": {"file": "missing_mesh.json"}}"#,
        r#"{"mesh": {"rod": {"kind": "WEDGE6"}}}"#,
        r#"{"mesh": {"rod": {}}, "threads": 0}"#,
        r#"{"mesh": {"rod": {}}, "elastic": {"youngs_modulus": -1.0, "poisson_ratio": 0.3}}"#,
    ];
    for json in cases {
        let cfg = write_config(tmp.path(), json);
        let o = lcf(&["solve", "--config", &cfg], &out);
        assert_eq!(o.status.code(), Some(2), "{json}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn floating_mesh_is_a_solver_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = fs::read_to_string(configs().join("cube.mesh.json")).unwrap().replace("[0, 3, 4, 7]", "[]");
    fs::write(tmp.path().join("free.mesh.json"), mesh).unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"mesh": {"file": "free.mesh.json"}, "load": {"volume": {"type": "constant", "force": [0, 0, -1]}}}"#,
    );
    let o = lcf(&["solve", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("singular"));
}

#[test]
fn sensitivity_outputs_and_sign() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lcf(&["sensitivity", "--config", &config_arg("rod.json")], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    for f in ["gradient.csv", "dpof_gradient.csv", "sensitivity.vtk"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    // the largest normal component is negative: pushing the surface out helps
    let top = stdout(&o).lines().nth(2).unwrap().split_whitespace().last().unwrap().parse::<f64>().unwrap();
    assert!(top < 0.0);
    let grad = fs::read_to_string(tmp.path().join("gradient.csv")).unwrap();
    assert_eq!(grad.lines().count(), 357);
}

#[test]
fn zero_adjoint_and_debug_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"mesh": {"rod": {"axial_divisions": 4}}, "zero_adjoint": true}"#);
    let out = tmp.path().join("out");
    let o = lcf(&["sensitivity", "--config", &cfg, "--debug-dump"], &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("adjoint terms dropped"));
    let adjoint = fs::read_to_string(out.join("adjoint.csv")).unwrap();
    assert!(adjoint.lines().skip(1).all(|l| l.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0)));
    let mtx = fs::read_to_string(out.join("stiffness.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket"));
}

#[test]
fn outputs_are_reproducible_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"mesh": {"rod": {"axial_divisions": 6}}, "lcf": "@MATERIALS@/almgsi6082.json"}"#,
    );
    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        let o = lcf(&["sensitivity", "--config", &cfg, "--threads", threads], &out);
        assert_eq!(o.status.code(), Some(0));
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["threads"].as_u64().unwrap().to_string(), threads);
        (fs::read(out.join("gradient.csv")).unwrap(), fs::read(out.join("dpof_gradient.csv")).unwrap())
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "4"));
}

#[test]
fn validate_passes_and_fails_by_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ok");
    let o = lcf(&["validate", "--config", &config_arg("rod_validate.json")], &out);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let summary = fs::read_to_string(out.join("validation_summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",true")));
    let cfg = write_config(
        tmp.path(),
        r#"{"mesh": {"rod": {"axial_divisions": 4}}, "validation": {"directions": ["normal"], "thresholds": {"total": 1e-15}}}"#,
    );
    let o = lcf(&["validate", "--config", &cfg], &tmp.path().join("strict"));
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn ring_pof_writes_intensity() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lcf(&["pof", "--config", &config_arg("ring.json")], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let vtk = fs::read_to_string(tmp.path().join("intensity.vtk")).unwrap();
    assert!(vtk.contains("SCALARS crack_intensity double 1"));
}
