#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn arma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arma"))
        .args(args)
        .env_remove("ARMA_DATA_DIR")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

/// Panics with every violation if `path` does not validate against the named schema.
pub fn assert_schema(schema: &str, path: &Path) {
    let schema_text = std::fs::read_to_string(schema_dir().join(format!("{schema}.schema.json"))).unwrap();
    let schema: serde_json::Value = serde_json::from_str(&schema_text).unwrap();
    let instance: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{} violates {schema}: {errors:#?}", path.display());
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}
