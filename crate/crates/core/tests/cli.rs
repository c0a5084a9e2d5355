use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use magbill::cli::{resolve_geometry, EXAMPLE_PRESETS};
use magbill::output::{read_orbit_data, RunMetadata};

fn magbill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magbill"))
        .args(args)
        .output()
        .unwrap()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--magnetic-field",
        "0.5",
        "--semi-axis-b",
        "8",
        "--orbits",
        "5",
        "--points-per-orbit",
        "30",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    magbill(&args)
}

#[test]
fn simulate_writes_a_complete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = read_orbit_data(&dir.path().join("orbits.csv")).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records.iter().all(|r| r.points.len() == 31));
    let meta = RunMetadata::read(&dir.path().join("orbits.meta")).unwrap();
    assert_eq!(meta.get("master_seed"), Some("7"));
    assert_eq!(meta.get("semi_axis_b"), Some("8"));
    for f in ["phase_portrait.svg", "table.svg"] {
        let svg = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(simulate(a.path(), &["--palette", "random"])
        .status
        .success());
    assert!(simulate(b.path(), &["--palette", "random"])
        .status
        .success());
    for f in [
        "orbits.csv",
        "orbits.meta",
        "phase_portrait.svg",
        "table.svg",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn plot_rerenders_from_data() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &[]).status.success());
    let replot = dir.path().join("replot");
    let out = magbill(&[
        "plot",
        "--data",
        dir.path().join("orbits.csv").to_str().unwrap(),
        "--magnetic-field",
        "0.5",
        "--semi-axis-b",
        "8",
        "--seed",
        "7",
        "--out",
        replot.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        fs::read(dir.path().join("phase_portrait.svg")).unwrap(),
        fs::read(replot.join("phase_portrait.svg")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = magbill(&[
        "simulate",
        "--eccentricity",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = magbill(&[
        "simulate",
        "--semi-axis-b",
        "8",
        "--tol",
        "0.01",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(magbill(&["example", "9"]).status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_with_three() {
    let out = magbill(&[
        "plot",
        "--data",
        "/nonexistent/orbits.csv",
        "--semi-axis-b",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_reports_every_check() {
    let out = magbill(&["verify", "--samples", "3"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    for name in [
        "boundary_residual",
        "circle_integrability",
        "circle_closed_form",
        "circle_oracle_agreement",
        "ellipse_joachimsthal",
        "symplectic_defect",
        "reversibility_defect",
        "straight_line_limit",
    ] {
        assert!(
            text.lines()
                .any(|l| l.starts_with("PASS") && l.contains(name)),
            "{name}\n{text}"
        );
    }
}

#[test]
fn eccentricity_warning_is_printed() {
    let dir = tempfile::tempdir().unwrap();
    let out = magbill(&[
        "simulate",
        "--eccentricity",
        "1.5",
        "--orbits",
        "1",
        "--points-per-orbit",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("WARNING"));
}

#[test]
fn preset_table_is_pinned() {
    let expected = [
        ("example_0", 0.0, 2.0, 1000, 1000, 1000),
        ("example_1", 0.01, 2.0, 1000, 1000, 2000),
        ("example_2", 0.5, 2.0, 1000, 1000, 500),
        ("example_3", 1.0, 2.0, 1000, 1000, 500),
        ("example_4", 2.0, 2.0, 1000, 1000, 500),
        ("example_5", 0.0, 2.005, 1000, 1000, 1000),
        ("example_all", 1.0, 2.0, 2000, 3000, 500),
    ];
    for (preset, (name, b, p, orbits, points, on_table)) in EXAMPLE_PRESETS.iter().zip(expected) {
        assert_eq!(preset.name, name);
        assert_eq!(preset.field_b, b);
        assert_eq!(preset.power_p, p);
        assert_eq!(preset.eccentricity, 1.5);
        assert_eq!(preset.number_of_orbits, orbits);
        assert_eq!(preset.points_per_orbit, points);
        assert_eq!(preset.points_on_table, on_table);
    }
    let (curve, _) = resolve_geometry(10.0, None, Some(1.5), 2.005).unwrap();
    assert!((curve.semi_axis_b() - 10.0 * 1.25f64.powf(1.0 / 2.005)).abs() < 1e-12);
}
