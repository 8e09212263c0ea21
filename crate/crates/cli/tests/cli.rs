use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cavity_ef_cli::output::{AUTOCORR_HEADER, POPULATIONS_HEADER, SNAPSHOT_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavity-ef"))
}

fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SHORT_SMOKE: &[&str] = &[
    "--override",
    "propagator_config.n_steps=2000",
    "--override",
    "propagator_config.save_stride=100",
    "--override",
    "run.snapshot_times=[0.0, 5.0, 10.0]",
];

fn emit(name: &str) -> String {
    let out = run_cli(&["presets", "emit", name]);
    assert!(out.status.success());
    String::from_utf8(out.stdout).unwrap()
}

fn csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn presets_list_and_emit() {
    let out = run_cli(&["presets", "list"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    assert_eq!(names.lines().count(), 10);
    for name in names.lines() {
        assert!(emit(name).contains("[run]"), "{name}");
    }
    assert_eq!(
        run_cli(&["presets", "emit", "missing"]).status.code(),
        Some(2)
    );
}

#[test]
fn runs_are_byte_identical_and_headers_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "smoke.toml", &emit("smoke-zero-coupling"));
    let mut dirs = Vec::new();
    for k in 0..2 {
        let dir = tmp.path().join(format!("out{k}"));
        let mut args = vec!["run", cfg.as_str(), "--output", dir.to_str().unwrap()];
        args.extend_from_slice(SHORT_SMOKE);
        let out = run_cli(&args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        dirs.push(dir);
    }
    let files = [
        "autocorr.csv",
        "populations.csv",
        "snapshot_0.000.csv",
        "snapshot_5.000.csv",
        "snapshot_10.000.csv",
        "manifest.toml",
    ];
    for f in files {
        assert_eq!(
            fs::read(dirs[0].join(f)).unwrap(),
            fs::read(dirs[1].join(f)).unwrap(),
            "{f}"
        );
    }
    let first = |f: &str| {
        fs::read_to_string(dirs[0].join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(first("autocorr.csv"), AUTOCORR_HEADER);
    assert_eq!(first("populations.csv"), POPULATIONS_HEADER);
    assert_eq!(first("snapshot_5.000.csv"), SNAPSHOT_HEADER);

    // the decoupled upper state is stationary
    for row in csv(&dirs[0].join("autocorr.csv")) {
        assert!(
            (row[1] - 1.0).abs() < 1e-10 && (row[2] - 1.0).abs() < 1e-10,
            "{row:?}"
        );
    }
    for row in csv(&dirs[0].join("populations.csv")) {
        assert!(
            (row[1] - 1.0).abs() < 1e-10 && row[2].abs() < 1e-10 && row[3] == 0.0,
            "{row:?}"
        );
    }
    let snap = fs::read_to_string(dirs[0].join("snapshot_10.000.csv")).unwrap();
    let masked = snap.lines().skip(1).filter(|l| l.ends_with(",0")).count();
    assert!(masked > 0);
    for l in snap.lines().skip(1).filter(|l| l.ends_with(",0")) {
        let v: Vec<&str> = l.split(',').collect();
        assert_eq!(&v[4..8], &["nan"; 4]);
    }
}

#[test]
fn manifest_lists_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bare.toml", "[run]\nmode = \"single_mode\"\n");
    let dir = tmp.path().join("out");
    let mut args = vec!["run", cfg.as_str(), "--output", dir.to_str().unwrap()];
    args.extend_from_slice(SHORT_SMOKE);
    args.extend_from_slice(&["--override", "model_params.couplings=[0.0]"]);
    let out = run_cli(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: toml::Table = fs::read_to_string(dir.join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["status"].as_str(), Some("ok"));
    let defaults: Vec<&str> = manifest["defaults_applied"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    for key in [
        "model_params.omega0",
        "model_params.mode_freqs",
        "q_grid.n_points",
        "propagator_config.dt",
        "run.initial_state",
    ] {
        assert!(
            defaults.iter().any(|d| d.starts_with(key)),
            "{key} missing from {defaults:?}"
        );
    }
    assert!(!defaults
        .iter()
        .any(|d| d.starts_with("model_params.couplings")));
    assert!(!defaults
        .iter()
        .any(|d| d.starts_with("propagator_config.n_steps")));
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = write(tmp.path(), "typo.toml", "[model_params]\nomega_0 = 0.4\n");
    assert_eq!(run_cli(&["run", &typo]).status.code(), Some(2));
    let section = write(tmp.path(), "section.toml", "[grid]\nn_points = 65\n");
    assert_eq!(run_cli(&["run", &section]).status.code(), Some(2));
    assert_eq!(
        run_cli(&["run", "/nonexistent/config.toml"]).status.code(),
        Some(2)
    );
    let fine = write(tmp.path(), "fine.toml", "");
    let dir = tmp.path().join("o");
    let d = dir.to_str().unwrap();
    // step too large for the mode frequency
    let out = run_cli(&[
        "run",
        &fine,
        "--output",
        d,
        "--override",
        "propagator_config.dt=2.0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_cli(&[
        "run",
        &fine,
        "--output",
        d,
        "--override",
        "run.snapshot_times=[1e9]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_cli(&["run", &fine, "--output", d, "--override", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn edge_density_breach_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "narrow.toml",
        "[q_grid]\nq_min = -2.0\nq_max = 2.0\nn_points = 33\n",
    );
    let dir = tmp.path().join("out");
    let mut args = vec!["run", cfg.as_str(), "--output", dir.to_str().unwrap()];
    args.extend_from_slice(SHORT_SMOKE);
    let out = run_cli(&args);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"failed\""));
    assert!(manifest.contains("edge density"));
}

#[test]
fn ww_run_writes_the_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ww.toml", &emit("ww-off-resonant"));
    let dir = tmp.path().join("out");
    let out = run_cli(&[
        "run",
        &cfg,
        "--output",
        dir.to_str().unwrap(),
        "--override",
        "ww_mode_set.n_frames=24",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let pops = csv(&dir.join("populations.csv"));
    assert_eq!(pops.len(), 25);
    assert_eq!(pops[0][1], 1.0);
    // population decays monotonically while photons build up
    assert!(pops
        .windows(2)
        .all(|w| w[1][1] < w[0][1] && w[1][2] > w[0][2]));
    let snaps = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("snapshot_")
        })
        .count();
    assert_eq!(snaps, 6);
}

#[test]
fn central_difference_route_reports_frame_spacing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "cd.toml",
        "[run]\ntime_derivative = \"central_difference\"\n[model_params]\ncouplings = [0.1]\n",
    );
    let dir = tmp.path().join("out");
    let out = run_cli(&[
        "run",
        &cfg,
        "--output",
        dir.to_str().unwrap(),
        "--override",
        "propagator_config.n_steps=400",
        "--override",
        "propagator_config.save_stride=40",
        "--override",
        "run.snapshot_times=[0.0, 1.0]",
    ]);
    let manifest: toml::Table = fs::read_to_string(dir.join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let change = manifest["diagnostics"]["max_frame_spacing_change"]
        .as_float()
        .unwrap();
    // the run fails exactly when the spacing check does
    let expect = if change > 1e-2 { Some(3) } else { Some(0) };
    assert_eq!(out.status.code(), expect, "change {change}");
}

#[test]
fn long_emission_runs_are_not_flagged_for_round_off() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ww.toml", &emit("ww-off-resonant"));
    let dir = tmp.path().join("out");
    // about 117 decay times: eps_kin near q = 0 reaches 1e11 before masking
    let out = run_cli(&[
        "run",
        &cfg,
        "--output",
        dir.to_str().unwrap(),
        "--override",
        "ww_mode_set.t_end=3300.0",
        "--override",
        "ww_mode_set.n_frames=40",
        "--override",
        "run.snapshot_times=[0.0]",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: toml::Table = fs::read_to_string(dir.join("manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let diag = &manifest["diagnostics"];
    assert!(diag["max_closure"].as_float().unwrap() > 1e-6);
    assert!(diag["max_closure_scaled"].as_float().unwrap() < 1e-6);
}
