//! End-to-end tests of the `evsheaf` binary: block pipelines over CSV files,
//! scenario runs, law suites, and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use evsheaf::scenario::ScenarioConfig;

fn evsheaf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evsheaf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// Unit-slope-per-second ramp sampled at 100 ticks/s over one second.
fn ramp_csv() -> String {
    let mut out = String::from("length,seconds_per_tick\n100,0.01\nt_tick,t_seconds,v_0\n");
    for t in 0..=100u64 {
        out.push_str(&format!("{t},{},{}\n", t as f64 * 0.01, t as f64 * 0.01));
    }
    out
}

#[test]
fn levelcross_on_ramp_emits_four_events() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ramp.csv");
    let output = dir.path().join("events.csv");
    write(&input, &ramp_csv());
    let out = evsheaf(&[
        "block",
        "levelcross",
        "--level",
        "0.25",
        "--a0",
        "0",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&output).unwrap();
    assert_eq!(
        text,
        "length,seconds_per_tick\n100,0.01\nt_tick,t_seconds,value_repr\n\
         25,0.25,0.25\n50,0.5,0.5\n75,0.75,0.75\n100,1,1\n"
    );
}

#[test]
fn zoh_on_empty_events_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    let output = dir.path().join("step.csv");
    write(
        &input,
        "length,seconds_per_tick\n10,0.01\nt_tick,t_seconds,value_repr\n",
    );
    let out = evsheaf(&[
        "block",
        "zoh",
        "--a0",
        "1",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&output).unwrap();
    assert_eq!(
        text,
        "length,seconds_per_tick\n10,0.01\nt_tick,t_seconds,v_0\n0,0,1\n"
    );
}

#[test]
fn sampler_with_period_equal_to_horizon_hits_both_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ramp.csv");
    let output = dir.path().join("events.csv");
    write(&input, &ramp_csv());
    let out = evsheaf(&[
        "block",
        "sampler",
        "--period",
        "100",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&output).unwrap();
    let rows: Vec<&str> = text.lines().skip(3).collect();
    assert_eq!(rows, vec!["0,0,0", "100,1,1"]);
}

#[test]
fn pixel_on_exponential_ramp_fires_positive() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("exp.csv");
    let output = dir.path().join("events.csv");
    let mut csv = String::from("length,seconds_per_tick\n100,0.01\nt_tick,t_seconds,v_0\n");
    for t in 0..=100u64 {
        csv.push_str(&format!(
            "{t},{},{}\n",
            t as f64 * 0.01,
            (t as f64 / 100.0).exp()
        ));
    }
    write(&input, &csv);
    let out = evsheaf(&[
        "block",
        "pixel",
        "--contrast",
        "0.25",
        "--i0",
        "1",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&output).unwrap();
    let rows: Vec<&str> = text.lines().skip(3).collect();
    assert_eq!(rows, vec!["25,0.25,+", "50,0.5,+", "75,0.75,+", "100,1,+"]);
}

#[test]
fn block_rejects_bad_input_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    write(&input, "not a csv header\n");
    let out = evsheaf(&[
        "block",
        "zoh",
        "--a0",
        "1",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("out.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_uniform_scene_reports_zero_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ScenarioConfig::shipped_uniform();
    config.horizon_seconds = 1.0;
    let path = dir.path().join("uniform.toml");
    write(&path, &config.to_toml());
    let out_dir = dir.path().join("out");
    let out = evsheaf(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let row = summary.lines().nth(1).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    // abs_error_final == abs_error_initial and no events at all
    assert_eq!(cells[2], cells[3]);
    assert_eq!(cells[4], "0");
    assert_eq!(cells[5], "0");
}

#[test]
fn run_cosine_scene_reduces_error_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ScenarioConfig::shipped();
    config.horizon_seconds = 2.0;
    config.record = vec!["heading".to_string(), "camera".to_string()];
    let path = dir.path().join("cosine.toml");
    write(&path, &config.to_toml());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = evsheaf(&[
            "run",
            "--config",
            path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
        let mut bytes = std::fs::read(out_dir.join("summary.csv")).unwrap();
        bytes.extend(std::fs::read(out_dir.join("heading.csv")).unwrap());
        bytes.extend(std::fs::read(out_dir.join("camera.csv")).unwrap());
        outputs.push(bytes);
    }
    assert_eq!(outputs[0], outputs[1], "repeated runs must be byte-identical");
    let summary = std::fs::read_to_string(dir.path().join("a/summary.csv")).unwrap();
    let cells: Vec<f64> = summary
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|c| c.parse().unwrap())
        .collect();
    assert!(cells[3] < cells[2], "final error {} vs initial {}", cells[3], cells[2]);
}

#[test]
fn run_rejects_malformed_config_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    write(&path, "version = 1\nthis is not toml [");
    let out_dir = dir.path().join("out");
    let out = evsheaf(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn laws_pass_and_report_fixture() {
    let out = evsheaf(&["laws", "--budget", "300", "--fixture", "nondet"]);
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("law translation-category: pass"));
    assert!(stdout.contains("deterministic:false"), "{stdout}");
}

#[test]
fn laws_with_zero_budget_exit_2() {
    let out = evsheaf(&["laws", "--budget", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
