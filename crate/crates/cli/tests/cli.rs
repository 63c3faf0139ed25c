use std::path::PathBuf;
use std::process::Command;

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_ovm")
}

fn repo_scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn temp_path(label: &str) -> PathBuf {
    std::env::temp_dir().join(format!("ovm-cli-{label}-{}", std::process::id()))
}

fn write_scenario(label: &str, text: &str) -> PathBuf {
    let path = temp_path(&format!("{label}.json"));
    std::fs::write(&path, text).expect("write scenario");
    path
}

#[test]
fn bell_scenario_passes_with_expected_table() {
    let out = temp_path("bell-report.json");
    let status = Command::new(exe())
        .arg("run")
        .arg(repo_scenario("bell_epr.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .expect("run cli");
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    let table = &report["results"][2]["table"]["table"];
    let expected = [[0.5, 0.0], [0.0, 0.5]];
    for n in 0..2 {
        for m in 0..2 {
            let got = table[n][m].as_f64().unwrap();
            assert!(
                (got - expected[n][m]).abs() <= 1e-12,
                "entry ({n},{m}) = {got}"
            );
        }
    }
}

#[test]
fn bundled_scenarios_all_pass() {
    for name in [
        "photon_counter.json",
        "luders_z.json",
        "degenerate_refinement.json",
    ] {
        let status = Command::new(exe())
            .arg("run")
            .arg(repo_scenario(name))
            .arg("--out")
            .arg(temp_path(&format!("{name}.report.json")))
            .status()
            .expect("run cli");
        assert!(status.success(), "scenario {name} failed");
    }
}

#[test]
fn identical_seed_gives_byte_identical_reports() {
    let out1 = temp_path("det1.json");
    let out2 = temp_path("det2.json");
    for out in [&out1, &out2] {
        let status = Command::new(exe())
            .arg("run")
            .arg(repo_scenario("luders_z.json"))
            .args(["--seed", "42", "--out"])
            .arg(out)
            .status()
            .expect("run cli");
        assert!(status.success());
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b, "reports differ between identical runs");
}

#[test]
fn empty_task_list_yields_empty_passing_report() {
    let scenario = write_scenario("empty", r#"{ "name": "empty", "tasks": [] }"#);
    let out = temp_path("empty-report.json");
    let status = Command::new(exe())
        .arg("run")
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .status()
        .expect("run cli");
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], serde_json::Value::Bool(true));
    assert_eq!(report["results"].as_array().unwrap().len(), 0);
}

#[test]
fn undefined_observable_is_a_semantic_error() {
    let scenario = write_scenario(
        "undefined",
        r#"{
            "name": "undefined",
            "definitions": {
                "observables": {
                    "Z": { "dim": 2, "hermitian": [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[-1.0,0.0]]] }
                },
                "instruments": { "LZ": { "luders": "Z" } }
            },
            "tasks": [
                { "task": "disturb", "instrument": "LZ", "observable": "missing" }
            ]
        }"#,
    );
    let output = Command::new(exe())
        .arg("run")
        .arg(&scenario)
        .arg("--out")
        .arg(temp_path("undefined-report.json"))
        .output()
        .expect("run cli");
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("missing"), "stderr was: {stderr}");
}

#[test]
fn failed_expectation_sets_exit_code_and_aborts() {
    let text = r#"{
        "name": "failing",
        "definitions": {
            "observables": {
                "Z": { "dim": 2, "hermitian": [[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[-1.0,0.0]]] },
                "X": { "dim": 2, "hermitian": [[[0.0,0.0],[1.0,0.0]],[[1.0,0.0],[0.0,0.0]]] }
            },
            "instruments": { "LZ": { "luders": "Z" } }
        },
        "tasks": [
            { "task": "disturb", "instrument": "LZ", "observable": "X", "expect": false },
            { "task": "disturb", "instrument": "LZ", "observable": "Z", "expect": false }
        ]
    }"#;
    let scenario = write_scenario("failing", text);

    let out = temp_path("failing-report.json");
    let output = Command::new(exe())
        .arg("run")
        .arg(&scenario)
        .arg("--out")
        .arg(&out)
        .output()
        .expect("run cli");
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    // aborted after the first failing task, but its record was flushed
    assert_eq!(report["results"].as_array().unwrap().len(), 1);
    assert_eq!(report["results"][0]["verdict"], "fail");

    let out_kg = temp_path("failing-kg-report.json");
    let output = Command::new(exe())
        .arg("run")
        .arg(&scenario)
        .arg("--keep-going")
        .arg("--out")
        .arg(&out_kg)
        .output()
        .expect("run cli");
    assert_eq!(output.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&out_kg).unwrap()).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 2);
    assert_eq!(report["results"][1]["verdict"], "pass");
}

#[test]
fn saved_instrument_reloads_and_checks_clean() {
    let saved = temp_path("saved-instrument.json");
    let text = format!(
        r#"{{
            "name": "save",
            "definitions": {{
                "models": {{ "counter": {{ "photon_counter": 3 }} }}
            }},
            "tasks": [
                {{ "task": "build-instrument", "model": "counter", "save": "{}" }}
            ]
        }}"#,
        saved.display()
    );
    let scenario = write_scenario("save", &text);
    let status = Command::new(exe())
        .arg("run")
        .arg(&scenario)
        .arg("--out")
        .arg(temp_path("save-report.json"))
        .status()
        .expect("run cli");
    assert!(status.success());

    let output = Command::new(exe())
        .arg("check")
        .arg(&saved)
        .output()
        .expect("run check");
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("PASS"), "stdout was: {stdout}");
}

#[test]
fn malformed_scenario_is_a_parse_error() {
    let scenario = write_scenario("broken", "{ not json");
    let output = Command::new(exe())
        .arg("run")
        .arg(&scenario)
        .output()
        .expect("run cli");
    assert_eq!(output.status.code(), Some(2));
}
