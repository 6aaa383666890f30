use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use geomlab_cli::report::SCHEMA;
use geomlab_cli::{emit_report, parse_formats, run_scenario, Format, RunReport, Scenario, ScenarioConfig};
use serde_json::json;

fn geomlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geomlab"))
}

fn write_config(dir: &Path, value: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path
}

fn small_lorentz_config() -> serde_json::Value {
    json!({
        "scenario": "lorentz-volume",
        "seed": 5,
        "params": {
            "horizon": 0.5,
            "t_nodes": 8,
            "monte_carlo": false,
            "ricci_grid": 3,
            "patch_grid": 3,
            "volume": { "patch_nodes": 4 }
        }
    })
}

#[test]
fn same_config_and_seed_give_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        json!({ "scenario": "cut-locus", "seed": 11, "params": { "samples": 40 } }),
    );
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = geomlab()
            .args(["cut-locus", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--formats", "json", "--quiet"])
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        outputs.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_override_changes_samples_and_is_recorded() {
    let mut cfg = ScenarioConfig::new(Scenario::CutLocus);
    cfg.set_param("samples", json!(20));
    let a = run_scenario(&cfg).unwrap();
    cfg.seed = 99;
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(b.seed, 99);
    assert_eq!(b.config["seed"], json!(99));
    assert_ne!(a.series[0].rows, b.series[0].rows);
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let output = geomlab().arg("volume-of-everything").output().unwrap();
    assert_eq!(output.status.code(), Some(64));
    let stderr = String::from_utf8_lossy(&output.stderr);
    for s in Scenario::ALL {
        assert!(stderr.contains(s.name()), "{stderr}");
    }
    let err = "volume-of-everything".parse::<Scenario>().unwrap_err().to_string();
    assert!(err.contains("table1-audit"));
}

#[test]
fn unknown_parameter_is_rejected() {
    let mut cfg = ScenarioConfig::new(Scenario::Myers);
    cfg.set_param("pairz", json!(3));
    let err = format!("{:#}", run_scenario(&cfg).unwrap_err());
    assert!(err.contains("pairz"), "{err}");
}

#[test]
fn missing_fixture_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        json!({
            "scenario": "myers",
            "fixtures": [{ "document": "no/such/file.json", "kappa": 1.0 }]
        }),
    );
    let output = geomlab().arg("myers").arg("--config").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no/such/file.json"));
}

#[test]
fn scenario_argument_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), json!({ "scenario": "cut-locus" }));
    let output = geomlab().arg("myers").arg("--config").arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(64));
}

#[test]
fn exit_code_counts_failing_checks() {
    let dir = tempfile::tempdir().unwrap();
    // A negative tolerance makes every Table 1 row check fail (9 rows × 2).
    let config = write_config(
        dir.path(),
        json!({ "scenario": "table1-audit", "params": { "tol": -1.0 } }),
    );
    let output = geomlab()
        .arg("table1-audit")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("--quiet")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(18));

    let ok = geomlab()
        .arg("table1-audit")
        .arg("--out")
        .arg(dir.path().join("ok"))
        .arg("--quiet")
        .output()
        .unwrap()
        .status;
    assert_eq!(ok.code(), Some(0));
}

#[test]
fn csv_format_writes_one_file_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_scenario(&ScenarioConfig::new(Scenario::Table1Audit)).unwrap();
    let formats: BTreeSet<Format> = parse_formats("csv").unwrap();
    let files = emit_report(&report, &formats, dir.path()).unwrap();
    assert_eq!(files.len(), report.series.len());
    assert!(files.iter().all(|f| f.extension().unwrap() == "csv"));
    let first = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(first.lines().next().unwrap(), report.series[0].columns.join(","));
    assert_eq!(first.lines().count(), report.series[0].rows.len() + 1);
}

#[test]
fn svg_has_one_polyline_per_ratio_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), small_lorentz_config());
    let cfg = ScenarioConfig::from_file(&config).unwrap();
    let report = run_scenario(&cfg).unwrap();
    let ratios = report
        .series
        .iter()
        .filter(|s| s.kind == geomlab_cli::report::SeriesKind::Ratio)
        .count();
    assert_eq!(ratios, 2);
    let files = emit_report(&report, &parse_formats("svg").unwrap(), dir.path()).unwrap();
    assert_eq!(files.len(), 1);
    let svg = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(svg.matches("<polyline").count(), ratios);
    assert!(svg.contains("nonincreasing"));
}

#[test]
fn verdicts_are_recomputable_from_the_payload() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), small_lorentz_config());
    let cfg = ScenarioConfig::from_file(&config).unwrap();
    let report = run_scenario(&cfg).unwrap();
    emit_report(&report, &parse_formats("json").unwrap(), dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let parsed: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed.schema, SCHEMA);
    assert!(!parsed.checks.is_empty());
    for c in &parsed.checks {
        assert!(c.is_consistent(), "{c}");
    }
    assert_eq!(parsed.pass, parsed.checks.iter().all(|c| c.pass));
    assert!(parsed.notes.iter().any(|n| n.contains("global hyperbolicity")));
    let timing: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("timing.json")).unwrap()).unwrap();
    assert!(timing["wall_time_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = BTreeSet::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ScenarioConfig::from_file(&path).unwrap();
            assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.scenario.name());
            for f in &cfg.fixtures {
                f.load(&cfg.base_dir).unwrap();
            }
            seen.insert(cfg.scenario.name());
        }
    }
    assert_eq!(seen.len(), Scenario::ALL.len());
}
