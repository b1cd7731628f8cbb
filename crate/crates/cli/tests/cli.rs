use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

fn enzsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enzsim"))
        .args(args)
        .env_remove("ENZSIM_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn derive_prints_step_parameters() {
    let out = enzsim(&["derive", "--preset", "fig3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("r_rms = 22.894 nm"), "{text}");
    assert!(text.contains("r_B = 2.285 nm"), "{text}");
    assert!(text.contains("steps = 200"), "{text}");
    assert!(stderr(&out).is_empty());
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = enzsim(&["derive", "--preset", "fig9"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("fig9"));

    let out = enzsim(&["derive"]);
    assert!(!out.status.success());

    let out = enzsim(&["derive", "--preset", "fig3", "--config", "x.toml"]);
    assert!(!out.status.success());

    let out = enzsim(&["run", "--preset", "fig3", "--trials", "many"]);
    assert!(!out.status.success());
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        enzsim_core::presets::FIG3.replace("dt_s = 0.5e-6\n", ""),
    )
    .unwrap();
    let out = enzsim(&["derive", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("dt_s"), "{}", stderr(&out));

    fs::write(
        &path,
        enzsim_core::presets::FIG3.replace("radius_m = 25.0e-9", "radius_m = -25.0e-9"),
    )
    .unwrap();
    let out = enzsim(&["derive", "--config", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("receivers[0].radius_m"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn regime_warning_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.toml");
    fs::write(
        &path,
        enzsim_core::presets::FIG3.replace("k1_m3_per_s = 1.0e-19", "k1_m3_per_s = 1.0e-16"),
    )
    .unwrap();
    let out = enzsim(&["derive", "--config", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));
}

#[test]
fn curve_is_fast_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = enzsim(&[
        "curve",
        "--preset",
        "fig3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
    assert!(
        stdout(&out).contains("rx0 diffusion_only       peak 14.2749 at 8.5 us"),
        "{}",
        stdout(&out)
    );
    let csv = read(dir.path(), "curves.csv");
    assert_eq!(csv.lines().count(), 201);
    assert!(csv.starts_with("step,time_s,rx0_diffusion_only_molecules,"));
}

#[test]
fn run_is_reproducible_and_comparable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = enzsim(&[
            "run",
            "--preset",
            "fig3",
            "--trials",
            "1",
            "--seed",
            "7",
            "--workers",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for name in ["series.csv", "control.csv", "bundle.toml", "config.toml"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    let series = read(a.path(), "series.csv");
    assert_eq!(series.lines().count(), 201);
    assert!(series.lines().all(|l| l.split(',').count() == 10));
    let meta = read(a.path(), "bundle.toml");
    assert!(meta.contains("seed = 7"), "{meta}");
    assert!(meta.contains("trials = 1"), "{meta}");

    let out = enzsim(&["compare", a.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = stdout(&out);
    assert!(report.contains("1 trials, seed 7"), "{report}");
    assert!(
        report.contains("simulation vs enzyme_lower_bound"),
        "{report}"
    );
    assert!(report.contains("control vs diffusion_only"), "{report}");
}

#[test]
fn echoed_config_regenerates_the_run() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let out = enzsim(&[
        "run",
        "--preset",
        "fig4",
        "--trials",
        "1",
        "--seed",
        "3",
        "--out",
        first.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let echo = first.path().join("config.toml");
    let out = enzsim(&[
        "run",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["series.csv", "control.csv", "bundle.toml"] {
        assert_eq!(
            read(first.path(), name),
            read(second.path(), name),
            "{name}"
        );
    }
}

#[test]
fn worker_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_enzsim"))
        .args([
            "run",
            "--preset",
            "fig4",
            "--trials",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("ENZSIM_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(read(dir.path(), "config.toml").contains("workers = 2"));
}

#[test]
fn compare_missing_bundle_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = enzsim(&["compare", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("bundle.toml"), "{}", stderr(&out));
}
