use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qtraj_cli::config::ModelConfig;
use qtraj_cli::{run_scenario, CliError, RunConfig, SCENARIOS};

const EXPLICIT: &str = r#"{
  "model": {"explicit": {
    "hamiltonian": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]],
    "channels": [
      {"matrix": [[[0, 0], [1.0954451150103321, 0]], [[0, 0], [0, 0]]],
       "entropy_flux": 0.4054651081081644, "efficiency": 0.5, "reverse_index": 1},
      {"matrix": [[[0, 0], [0, 0]], [[0.8944271909999159, 0], [0, 0]]],
       "entropy_flux": -0.4054651081081644, "efficiency": 0.5, "reverse_index": 0}
    ],
    "beta": {"0": 0.4054651081081644}
  }},
  "tau": 0.5
}"#;

fn qtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtraj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn invalid(text: &str) -> Vec<String> {
    match RunConfig::from_json(text) {
        Err(CliError::Invalid(v)) => v,
        other => panic!("expected violations, got {other:?}"),
    }
}

#[test]
fn empty_config_fills_defaults() {
    let cfg = RunConfig::from_json("{}").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.samples, 10_000);
    assert_eq!(cfg.tau, 1.0);
    let ModelConfig::TwoLevel(p) = &cfg.model else {
        panic!("default model is the emitter")
    };
    assert_eq!((p.eta_minus, p.eta_plus), (0.2, 0.2));
}

#[test]
fn out_of_range_efficiency_names_the_field() {
    let v = invalid(r#"{"model": {"two_level": {"eta_minus": 1.2}}}"#);
    assert!(
        v.iter()
            .any(|m| m.starts_with("model.two_level.eta_minus") && m.contains("1.2")),
        "{v:?}"
    );
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(
        matches!(RunConfig::from_json(r#"{"tua": 1}"#), Err(CliError::Parse(m)) if m.contains("tua"))
    );
}

#[test]
fn invalid_explicit_model_reports_violations() {
    let text = EXPLICIT.replace(
        "[[[0, 0], [0, 0]], [[0, 0], [1, 0]]]",
        "[[[0, 0], [0.5, 0]], [[0, 0], [1, 0]]]",
    );
    let v = invalid(&text);
    assert!(v.iter().any(|m| m.contains("not Hermitian")), "{v:?}");
}

#[test]
fn unknown_scenario_is_a_violation() {
    let v = invalid(r#"{"scenario": "nope"}"#);
    assert!(v.iter().any(|m| m.starts_with("scenario")), "{v:?}");
}

#[test]
fn oracle_validate_passes_for_both_model_kinds() {
    for text in ["{}", EXPLICIT] {
        let mut cfg = RunConfig::from_json(text).unwrap();
        cfg.scenario = Some("oracle-validate".into());
        let result = run_scenario(&cfg).unwrap();
        assert!(result.passed(), "{}", result.summary());
        assert!(!result.tables[0].rows.is_empty());
    }
}

#[test]
fn list_scenarios_prints_every_name() {
    let out = qtraj(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in SCENARIOS {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn validate_reports_errors_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{"model": {"two_level": {"eta_plus": -0.1}}}"#,
    );
    let out = qtraj(&["validate", "--config", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("model.two_level.eta_plus"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), r#"{"samples": 300, "tau": 0.5}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = qtraj(&[
            "run",
            "--config",
            &path,
            "--scenario",
            "averaged-ft",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(
            o.status.code() == Some(0) || o.status.code() == Some(1),
            "{o:?}"
        );
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 2);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn run_writes_header_and_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "{}");
    let out_dir = dir.path().join("out");
    let o = qtraj(&[
        "run",
        "--config",
        &path,
        "--scenario",
        "oracle-validate",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let text = fs::read_to_string(out_dir.join("oracle-validate-assertions.csv")).unwrap();
    assert!(text.starts_with("# qtraj-cli "));
    assert!(text.contains("# scenario: oracle-validate"));
    assert!(
        text.lines().skip(3).skip(1).all(|l| l.ends_with(",pass")),
        "{text}"
    );
    assert!(out_dir.join("oracle-validate-leaves.csv").exists());
}
