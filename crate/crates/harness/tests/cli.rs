mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{golden, golden_dir};
use evalkit::commands::read_template;
use evalkit::{simulate_with, ClockMode, Scenario};
use evalkit_core::ids::EvaluationId;
use evalkit_core::model::{EvaluationTemplate, MediaCollection};
use evalkit_core::persistence::FileLog;
use evalkit_server::store::DataDir;
use serde_json::{json, Value};

fn evalkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evalkit"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_dir_with_golden_collection() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let collection: MediaCollection = serde_json::from_value(golden("collection.json")).unwrap();
    DataDir::open(dir.path())
        .unwrap()
        .save_collection(&collection)
        .unwrap();
    dir
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn template_round_trip() {
    let data = data_dir_with_golden_collection();
    let file = golden_dir().join("template.json");
    let out = evalkit(&[
        "template",
        "import",
        path(&file),
        "--data-dir",
        path(data.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "golden");

    let exported = data.path().join("out.json");
    let out = evalkit(&[
        "template",
        "export",
        "golden",
        "--data-dir",
        path(data.path()),
        "--out",
        path(&exported),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let back: EvaluationTemplate =
        serde_json::from_str(&std::fs::read_to_string(&exported).unwrap()).unwrap();
    assert_eq!(back, read_template(&file).unwrap());

    let out = evalkit(&[
        "template",
        "export",
        "nope",
        "--data-dir",
        path(data.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_templates_exit_with_one() {
    let data = data_dir_with_golden_collection();
    let mut tpl = golden("template.json");
    let entries = tpl["taskTemplates"][0]["timeline"]["entries"]
        .as_array_mut()
        .unwrap();
    entries.push(
        json!({"channel": "text", "activeFromMs": 1000, "activeUntilMs": 5000,
        "payload": {"kind": "text", "text": "clash"}}),
    );
    let file = data.path().join("overlap.json");
    std::fs::write(&file, tpl.to_string()).unwrap();
    let out = evalkit(&[
        "template",
        "import",
        path(&file),
        "--data-dir",
        path(data.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("validationFailed"),
        "{}",
        stderr(&out)
    );

    std::fs::write(&file, "{ not json").unwrap();
    let out = evalkit(&[
        "template",
        "import",
        path(&file),
        "--data-dir",
        path(data.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("parseError"), "{}", stderr(&out));
}

#[test]
fn collection_ingest_registers_files() {
    let media = tempfile::tempdir().unwrap();
    std::fs::create_dir(media.path().join("stills")).unwrap();
    std::fs::write(media.path().join("stills/k-00001.png"), b"png").unwrap();
    std::fs::write(media.path().join("notes.txt"), b"ignored").unwrap();
    let data = tempfile::tempdir().unwrap();
    let out = evalkit(&[
        "collection",
        "ingest",
        path(media.path()),
        "--name",
        "stills",
        "--data-dir",
        path(data.path()),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stored = DataDir::open(data.path())
        .unwrap()
        .load_collections()
        .unwrap();
    assert_eq!(stored.len(), 1);
    assert_eq!(stored[0].items.len(), 1);
    assert_eq!(stored[0].items[0].name, "k-00001");

    let out = evalkit(&[
        "collection",
        "ingest",
        "/does/not/exist",
        "--name",
        "x",
        "--data-dir",
        path(data.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_prints_a_transcript() {
    let scenario = golden_dir().join("scenario.json");
    let out = evalkit(&["simulate", path(&scenario)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(t["scoreboard"][0]["teamId"], "team-a");

    let dir = tempfile::tempdir().unwrap();
    let mut bad = golden("scenario.json");
    bad["actions"][0]["actor"] = json!("mallory");
    let file = dir.path().join("bad.json");
    std::fs::write(&file, bad.to_string()).unwrap();
    std::fs::copy(
        golden_dir().join("template.json"),
        dir.path().join("template.json"),
    )
    .unwrap();
    std::fs::copy(
        golden_dir().join("collection.json"),
        dir.path().join("collection.json"),
    )
    .unwrap();
    let out = evalkit(&["simulate", path(&file)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("scenarioInvalid"), "{}", stderr(&out));
}

#[test]
fn export_results_reads_a_stored_log() {
    let data = tempfile::tempdir().unwrap();
    let store = DataDir::open(data.path()).unwrap();
    let eval_dir = store.evaluation_dir(&EvaluationId::from("golden")).unwrap();
    let (scenario, base) = Scenario::load(&golden_dir().join("scenario.json")).unwrap();
    let plan = scenario.plan(&base).unwrap();
    let log = FileLog::create(&eval_dir).unwrap();
    simulate_with(&plan, ClockMode::Virtual, Box::new(log), |_, _| {}).unwrap();

    let out = evalkit(&[
        "export-results",
        "--data-dir",
        path(data.path()),
        "--evaluation",
        "golden",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(
        csv.lines()
            .any(|l| l.starts_with("golden,Alpha,kis,kis-01,97.5")),
        "{csv}"
    );

    let out = evalkit(&[
        "export-results",
        "--data-dir",
        path(data.path()),
        "--evaluation",
        "golden",
    ]);
    assert!(out.status.success());
    let full: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(full["events"].as_array().unwrap().len() > 10);

    let out = evalkit(&[
        "export-results",
        "--data-dir",
        path(data.path()),
        "--evaluation",
        "missing",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_reports_configuration_problems() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("evalkit.toml");
    std::fs::write(&config, "port = 8080\n").unwrap();
    let out = evalkit(&["serve", "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("configInvalid"), "{}", stderr(&out));

    let out = evalkit(&["serve", "--config", path(&dir.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(1));

    let busy = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port();
    std::fs::write(&config, format!("port = {port}\ndata_dir = \"data\"\n")).unwrap();
    let out = evalkit(&["serve", "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("portInUse"), "{}", stderr(&out));
}
