#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/golden")
}

pub fn golden(file: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(golden_dir().join(file)).unwrap()).unwrap()
}

/// The golden scenario with its template and collection inlined and the
/// actions replaced.
pub fn inline_scenario(actions: Value) -> Value {
    let mut s = golden("scenario.json");
    s["template"] = golden("template.json");
    s["collections"] = Value::Array(vec![golden("collection.json")]);
    s["actions"] = actions;
    s
}
