//! JSON artifacts and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use bellfit_core::traintest::SeedRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = concat!("bellfit ", env!("CARGO_PKG_VERSION"));

/// Provenance record written next to every set of outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub input_paths: Vec<String>,
    pub output_paths: Vec<String>,
    pub seed: u64,
    pub tool_version: String,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// A JSON command argument: either inline JSON or a path to a JSON file.
#[derive(Clone, Debug)]
pub struct JsonArg {
    pub text: String,
    pub path: Option<PathBuf>,
}

impl JsonArg {
    pub fn load(arg: &str) -> CliResult<Self> {
        let trimmed = arg.trim_start();
        if trimmed.starts_with('{') || trimmed.starts_with('[') {
            return Ok(JsonArg {
                text: arg.to_owned(),
                path: None,
            });
        }
        let path = PathBuf::from(arg);
        Ok(JsonArg {
            text: read_file(&path)?,
            path: Some(path),
        })
    }

    pub fn parse<T: DeserializeOwned>(&self, what: &str) -> CliResult<T> {
        serde_json::from_str(&self.text).map_err(|e| CliError::config(what, e))
    }
}

pub fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Per-seed, per-model errors as CSV.
pub fn errors_csv(records: &[SeedRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["seed", "model", "train_error", "test_error"])
        .expect("writing to memory cannot fail");
    for r in records {
        for o in &r.outcomes {
            w.serialize((r.seed, o.spec.label(), o.train_error, o.test_error))
                .expect("writing to memory cannot fail");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use bellfit_core::traintest::ModelOutcome;
    use bellfit_core::{ModelClass, ModelSpec};

    #[test]
    fn errors_csv_is_lossless() {
        let o = |class, train: f64, test: f64| ModelOutcome {
            spec: ModelSpec::new(class),
            train_error: train,
            test_error: test,
            fitted_ns_delta: 0.0,
            fitted_chsh_max: 0.0,
            restarts_converged: 1,
            ppt_min_eigenvalue: None,
        };
        let rec = SeedRecord {
            seed: 3,
            outcomes: vec![o(ModelClass::Ccc, 0.1 + 0.2, 1e-17), o(ModelClass::Qcc, 2.0 / 3.0, 0.0)],
            verdicts: vec![],
        };
        let text = errors_csv(&[rec]);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<(u64, String, f64, f64)> = r.deserialize().map(Result::unwrap).collect();
        assert_eq!(rows[0], (3, "cCC".to_owned(), 0.1 + 0.2, 1e-17));
        assert_eq!(rows[1].2, 2.0 / 3.0);
    }

    #[test]
    fn inline_json_arguments() {
        let arg = JsonArg::load(r#"{"class":"qCC"}"#).unwrap();
        assert!(arg.path.is_none());
        let spec: ModelSpec = arg.parse("model").unwrap();
        assert_eq!(spec, ModelSpec::new(ModelClass::Qcc));
        assert!(matches!(JsonArg::load("/no/such/file.json"), Err(CliError::Io { .. })));
    }
}
