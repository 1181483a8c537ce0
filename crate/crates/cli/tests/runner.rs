use std::process::Command;

use groupoid_ricci::analysis::SteadyKind;
use groupoid_ricci::flow::CheckpointSchedule;
use groupoid_ricci_cli::config::WeightSource;
use groupoid_ricci_cli::{emit_report, preset, run_scenario, CliError, Format, RunOptions, ScenarioConfig, Suite, PRESET_NAMES};

const BIN: &str = env!("CARGO_BIN_EXE_groupoid-ricci");

/// Short twisted run, cheap enough for every suite but blowdown.
fn small() -> ScenarioConfig {
    let mut c = preset("twisted").unwrap();
    c.name = "small".into();
    c.grid.n_nodes = 32;
    c.flow.t_end = 0.4;
    c.flow.checkpoints = CheckpointSchedule::Uniform { interval: 1e-3 };
    c.tolerances.identity_from = 0.25;
    c.flow.weight = WeightSource::Conjugate;
    c.suites = vec![Suite::Monotonicity, Suite::Lambda];
    c.output = Default::default();
    c
}

#[test]
fn every_preset_round_trips_through_toml() {
    for name in PRESET_NAMES {
        let c = preset(name).unwrap();
        let back = ScenarioConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c, "{name}");
    }
}

#[test]
fn unknown_preset_is_none() {
    assert!(preset("nope").is_none());
}

#[test]
fn config_errors_name_the_field() {
    let mut c = small();
    c.flow.t_end = -1.0;
    match c.validate() {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "flow.t_end"),
        other => panic!("{other:?}"),
    }

    let mut c = small();
    c.tolerances.harnack = 0.0;
    match c.validate() {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "tolerances.harnack"),
        other => panic!("{other:?}"),
    }

    let mut c = small();
    c.initial.k_per.sin = vec![0.1; 16];
    match c.validate() {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "initial.k_per"),
        other => panic!("{other:?}"),
    }

    let mut c = small();
    c.suites = vec![Suite::Lambda, Suite::Lambda];
    assert!(matches!(c.validate(), Err(CliError::Config { field, .. }) if field == "suites"));

    let text = small().to_toml().replace("schema_version = 1", "schema_version = 7");
    assert!(matches!(ScenarioConfig::from_toml(&text), Err(CliError::Config { field, .. }) if field == "schema_version"));
}

#[test]
fn unknown_keys_are_rejected() {
    let text = format!("bogus = 1\n{}", small().to_toml());
    assert!(matches!(ScenarioConfig::from_toml(&text), Err(CliError::Parse(_))));
}

#[test]
fn format_parsing() {
    assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
    assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    assert_eq!("human".parse::<Format>().unwrap(), Format::Human);
    assert!(matches!("yaml".parse::<Format>(), Err(CliError::Usage(_))));
}

#[test]
fn empty_suite_list_gives_valid_json() {
    let mut c = small();
    c.suites.clear();
    let report = run_scenario(&c, &RunOptions::default()).unwrap();
    assert!(report.passed);
    let v: serde_json::Value = serde_json::from_slice(&emit_report(&report, Format::Json)).unwrap();
    assert_eq!(v["suites"].as_array().unwrap().len(), 0);
    assert_eq!(v["flow"]["holonomy_bitwise_constant"], true);
}

#[test]
fn reports_are_deterministic() {
    let mut c = small();
    c.suites.push(Suite::Uniqueness);
    let opts = RunOptions {
        seed: 11,
        ..RunOptions::default()
    };
    let a = emit_report(&run_scenario(&c, &opts).unwrap(), Format::Json);
    let b = emit_report(&run_scenario(&c, &opts).unwrap(), Format::Json);
    assert_eq!(a, b);
}

#[test]
fn small_run_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small();
    c.output.trajectory_csv = Some("traj.csv".into());
    let opts = RunOptions {
        out_dir: Some(dir.path().to_path_buf()),
        ..RunOptions::default()
    };
    let report = run_scenario(&c, &opts).unwrap();
    assert!(report.passed, "{}", String::from_utf8_lossy(&emit_report(&report, Format::Human)));

    let traj = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let mut lines = traj.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 3 * 32);
    assert_eq!(header[0], "t");
    assert_eq!(header[1], "k_per[0]");
    assert_eq!(header[33], "u[0]");
    assert_eq!(header[65], "f[0]");
    assert_eq!(lines.count(), report.flow.as_ref().unwrap().checkpoints);

    let mono = std::fs::read_to_string(dir.path().join("monotonicity.csv")).unwrap();
    assert!(mono.starts_with("t,F,rhs_integral,residual\n"));
    for line in mono.lines().skip(1) {
        assert_eq!(line.split(',').count(), 4);
    }

    let json = std::fs::read(dir.path().join("report.json")).unwrap();
    let back: groupoid_ricci_cli::RunReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(back.suites.len(), 2);
}

#[test]
fn csv_report_has_one_value_per_row() {
    let report = run_scenario(&small(), &RunOptions::default()).unwrap();
    let csv = String::from_utf8(emit_report(&report, Format::Csv)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("suite,t,diagnostic,value"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4, "{line}");
        cols[3].parse::<f64>().unwrap();
    }
}

#[test]
fn failing_suite_reports_margin_and_location() {
    let mut c = small();
    c.suites = vec![Suite::SteadyClassify];
    c.steady.expect_initial = Some(SteadyKind::FlatTorus);
    let report = run_scenario(&c, &RunOptions::default()).unwrap();
    assert!(!report.passed);
    let worst = report.suites[0].worst.as_ref().unwrap();
    assert!(worst.margin > 0.0);
    let human = String::from_utf8(emit_report(&report, Format::Human)).unwrap();
    assert!(human.contains("FAIL"));
    assert!(human.contains("classification"), "{human}");
}

#[test]
fn monotonicity_needs_a_weight() {
    let mut c = small();
    c.flow.weight = WeightSource::Reference;
    let report = run_scenario(&c, &RunOptions::default()).unwrap();
    assert!(!report.suites[0].passed);
}

#[test]
fn tolerance_scale_must_be_positive() {
    let opts = RunOptions {
        tolerance_scale: 0.0,
        ..RunOptions::default()
    };
    assert!(matches!(run_scenario(&small(), &opts), Err(CliError::Usage(_))));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    std::fs::write(&path, small().to_toml()).unwrap();

    let ok = Command::new(BIN).args(["run", "--format", "json"]).arg(&path).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["passed"], true);

    let bad = Command::new(BIN).args(["run", "--format", "yaml"]).arg(&path).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));

    let missing = Command::new(BIN).args(["run", "--preset", "nope"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let check = Command::new(BIN).arg("check").arg(&path).output().unwrap();
    assert_eq!(check.status.code(), Some(0));

    let list = Command::new(BIN).arg("presets").output().unwrap();
    let out = String::from_utf8(list.stdout).unwrap();
    for name in PRESET_NAMES {
        assert!(out.contains(name));
    }
}
