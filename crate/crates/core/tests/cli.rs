use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use filt3r::acceptance::EXAMPLE_CONFIG;
use filt3r::harness::{RunConfig, FRAMES_HEADER, SUMMARY_HEADER};

fn filt3r(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filt3r"))
        .args(args)
        .env_remove("FILT3R_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

const MINIMAL: &str = r#"
seeds = [3]
output_formats = ["csv", "jsonl"]

[scenario]
n_tokens = 4
dim = 2
length = 10
measurement_std = 1.0

[[policies]]
kind = "filt3r-full"
"#;

fn write_config(dir: &Path, body: &str) -> String {
    let out = dir.join("out");
    let text = format!("output_dir = {:?}\n{body}", out.to_str().unwrap());
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn minimal_run_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), MINIMAL);
    let out = filt3r(&["run", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let frames = fs::read_to_string(dir.path().join("out/filt3r-full_seed3.frames.csv")).unwrap();
    let lines: Vec<&str> = frames.lines().collect();
    assert!(lines[0].starts_with("# filt3r-frames schema=1"));
    assert_eq!(lines[1], FRAMES_HEADER);
    assert_eq!(lines.len() - 2, 10);
    assert!(lines[2].starts_with("1,1,0,1.5,1,0,"));

    let jsonl = fs::read_to_string(dir.path().join("out/filt3r-full_seed3.frames.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 10);
    let row: serde_json::Value = serde_json::from_str(jsonl.lines().last().unwrap()).unwrap();
    assert_eq!(row["frame"], 10);

    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert!(lines[0].contains("percentile_method=linear"));
    assert_eq!(lines[1], SUMMARY_HEADER);
    assert_eq!(lines.len() - 2, 1);
    assert!(lines[2].starts_with("filt3r-full,3,10,"));
}

#[test]
fn invariant_violation_exits_3_naming_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{MINIMAL}\n[filter]\nq_min = 0.9\nq_max = 0.5\n"));
    let out = filt3r(&["run", &config]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_min"));

    let config = write_config(dir.path(), &MINIMAL.replace("seeds = [3]", "seeds = []"));
    let out = filt3r(&["run", &config]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds"));
}

#[test]
fn parse_failure_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &MINIMAL.replace("length = 10", "length = ten"));
    let out = filt3r(&["run", &config]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 9, column"), "{err}");
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, format!("output_dir = {:?}\n{MINIMAL}", blocker.join("sub").to_str().unwrap())).unwrap();
    let out = filt3r(&["run", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let out = filt3r(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, MINIMAL).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_filt3r"))
        .args(["run", config.to_str().unwrap()])
        .env("FILT3R_OUTPUT_DIR", dir.path().join("env-out"))
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("env-out/summary.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = filt3r(&[
            "run",
            write_config(dir.path(), MINIMAL).as_str(),
            "--output-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn example_config_parses_and_validates() {
    let config = RunConfig::parse(EXAMPLE_CONFIG, Path::new("example.toml")).unwrap();
    config.validate().unwrap();
    assert_eq!(config.policies.len(), 5);
    assert_eq!(config.filter, filt3r::FilterConfig::default());
}

#[test]
fn static_scene_summary_reports_gain_floor() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
seeds = [1]
[scenario]
n_tokens = 32
dim = 8
length = 2000
measurement_std = 1.0
[[policies]]
kind = "filt3r-full"
"#;
    let config = RunConfig::parse(&format!("output_dir = {:?}\n{body}", dir.path().to_str().unwrap()), Path::new("x")).unwrap();
    let out = filt3r::harness::run(&config).unwrap();
    let late = out.cells[0].late_mean_gain.unwrap();
    assert!((late - 0.132).abs() <= 0.015, "late mean gain {late}");
}

#[test]
fn verify_subset_and_oracles() {
    let out = filt3r(&["verify", "--only", "4,9"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);

    let out = filt3r(&["oracle", "static-gain", "2", "1.5", "1.0"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.375");
    let out = filt3r(&["oracle", "gain-floor"]);
    let floor: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!((floor - 0.132).abs() < 5e-4);
    let out = filt3r(&["oracle", "steady-state", "1", "1"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("p_star=0.618"));
    assert_eq!(filt3r(&["oracle", "static-gain", "x"]).status.code(), Some(2));
}
