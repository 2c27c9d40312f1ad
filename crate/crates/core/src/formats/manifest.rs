//! Run manifest (`sepidx-manifest/1`): one baseline and the candidate
//! extractors to rank.
//!
//! ```json
//! {
//!   "schema": "sepidx-manifest/1",
//!   "baseline": { "path": "raw.sidx" },
//!   "candidates": [
//!     { "name": "VGG16", "path": "vgg16.sidx", "accuracy": 0.853 },
//!     { "name": "Xception", "precomputed_si": 0.94 }
//!   ],
//!   "options": { "metric": "squared_euclidean" }
//! }
//! ```
//!
//! The baseline is either `{"path": …}` or `{"si": …}` (a bare number is
//! accepted too). Paths ending in `.csv` are read as CSV with an optional
//! `label_column` (default `"label"`); anything else is read as SIDX.
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

use super::csv::{read_csv, CsvError};
use super::sidx::{read_sidx_with_header, Dtype, SidxError};
use crate::model::LabeledFeatureSet;
use crate::ranking::{Baseline, CandidateInput, CandidateSource};

pub const MANIFEST_SCHEMA: &str = "sepidx-manifest/1";
pub const DEFAULT_LABEL_COLUMN: &str = "label";
pub const METRIC: &str = "squared_euclidean";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("schema violation at {pointer:?}: {message}")]
    Schema { pointer: String, message: String },
    #[error("duplicate candidate name {0:?}")]
    DuplicateCandidateName(String),
    #[error("candidate list is empty")]
    EmptyCandidateList,
    #[error("{}: {source}", path.display())]
    Sidx { path: PathBuf, source: SidxError },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: CsvError },
}

/// A data file referenced by the manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileRef {
    /// The path as written in the manifest.
    pub declared: String,
    /// `declared` resolved against the manifest directory.
    pub resolved: PathBuf,
    pub label_column: Option<String>,
}

impl FileRef {
    pub fn is_csv(&self) -> bool {
        self.resolved
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    }

    /// Loads the set, naming it `name`. The returned note is set when an
    /// f64 SIDX file was narrowed to f32.
    pub fn load(&self, name: &str) -> Result<(LabeledFeatureSet, Option<String>), ManifestError> {
        if self.is_csv() {
            let column = self.label_column.as_deref().unwrap_or(DEFAULT_LABEL_COLUMN);
            let fs = read_csv(&self.resolved, column).map_err(|source| ManifestError::Csv {
                path: self.resolved.clone(),
                source,
            })?;
            return Ok((fs.renamed(name), None));
        }
        let (fs, header) = read_sidx_with_header(&self.resolved).map_err(|source| ManifestError::Sidx {
            path: self.resolved.clone(),
            source,
        })?;
        let note = (header.dtype == Dtype::F64)
            .then(|| format!("{}: f64 values narrowed to f32 (round to nearest even)", self.declared));
        Ok((fs.renamed(name), note))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineSpec {
    File(FileRef),
    Precomputed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSpecSource {
    File(FileRef),
    Precomputed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSpec {
    pub name: String,
    pub source: CandidateSpecSource,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub baseline: BaselineSpec,
    pub candidates: Vec<CandidateSpec>,
    pub metric: String,
}

/// Inputs materialized from a manifest.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub baseline: Baseline,
    pub candidates: Vec<CandidateInput>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn is_fixture_mode(&self) -> bool {
        self.candidates
            .iter()
            .any(|c| matches!(c.source, CandidateSpecSource::Precomputed(_)))
    }

    /// All referenced files, as `(role, file)` pairs in manifest order.
    pub fn files(&self) -> Vec<(String, &FileRef)> {
        let mut out = Vec::new();
        if let BaselineSpec::File(f) = &self.baseline {
            out.push(("baseline".to_string(), f));
        }
        for c in &self.candidates {
            if let CandidateSpecSource::File(f) = &c.source {
                out.push((format!("candidate:{}", c.name), f));
            }
        }
        out
    }

    /// Reads every referenced file.
    pub fn load_inputs(&self) -> Result<LoadedInputs, ManifestError> {
        let mut notes = Vec::new();
        let baseline = match &self.baseline {
            BaselineSpec::Precomputed(v) => Baseline::Precomputed(*v),
            BaselineSpec::File(f) => {
                let (fs, note) = f.load("baseline")?;
                notes.extend(note);
                Baseline::Embedding(fs)
            }
        };
        let mut candidates = Vec::with_capacity(self.candidates.len());
        for c in &self.candidates {
            let source = match &c.source {
                CandidateSpecSource::Precomputed(v) => CandidateSource::Precomputed(*v),
                CandidateSpecSource::File(f) => {
                    let (fs, note) = f.load(&c.name)?;
                    notes.extend(note);
                    CandidateSource::Embedding(fs)
                }
            };
            candidates.push(CandidateInput {
                name: c.name.clone(),
                source,
                reported_accuracy: c.accuracy,
            });
        }
        Ok(LoadedInputs {
            baseline,
            candidates,
            notes,
        })
    }
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> ManifestError {
    ManifestError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn object<'a>(value: &'a Value, pointer: &str) -> Result<&'a Map<String, Value>, ManifestError> {
    value
        .as_object()
        .ok_or_else(|| violation(pointer, "expected an object"))
}

fn only_keys(map: &Map<String, Value>, allowed: &[&str], pointer: &str) -> Result<(), ManifestError> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(violation(format!("{pointer}/{k}"), "unknown field")),
        None => Ok(()),
    }
}

fn unit_real(value: &Value, pointer: &str) -> Result<f64, ManifestError> {
    match value.as_f64() {
        Some(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(violation(pointer, "expected a number in [0, 1]")),
    }
}

fn string<'a>(value: &'a Value, pointer: &str) -> Result<&'a str, ManifestError> {
    value
        .as_str()
        .ok_or_else(|| violation(pointer, "expected a string"))
}

fn file_ref(map: &Map<String, Value>, pointer: &str, base: &Path) -> Result<Option<FileRef>, ManifestError> {
    let Some(path) = map.get("path") else {
        if map.contains_key("label_column") {
            return Err(violation(format!("{pointer}/label_column"), "only allowed together with \"path\""));
        }
        return Ok(None);
    };
    let declared = string(path, &format!("{pointer}/path"))?;
    if declared.is_empty() {
        return Err(violation(format!("{pointer}/path"), "path is empty"));
    }
    let label_column = map
        .get("label_column")
        .map(|v| string(v, &format!("{pointer}/label_column")).map(str::to_string))
        .transpose()?;
    let resolved = base.join(declared);
    if !resolved.is_file() {
        return Err(violation(
            format!("{pointer}/path"),
            format!("no such file: {}", resolved.display()),
        ));
    }
    Ok(Some(FileRef {
        declared: declared.to_string(),
        resolved,
        label_column,
    }))
}

/// Validates manifest JSON; relative paths resolve against `base_dir`.
pub fn parse_manifest(bytes: &[u8], base_dir: &Path) -> Result<RunManifest, ManifestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ManifestError::Json(e.to_string()))?;
    let top = object(&root, "")?;
    only_keys(top, &["schema", "baseline", "candidates", "options"], "")?;
    match top.get("schema") {
        Some(Value::String(s)) if s == MANIFEST_SCHEMA => {}
        Some(_) => return Err(violation("/schema", format!("expected {MANIFEST_SCHEMA:?}"))),
        None => return Err(violation("/schema", "missing required field")),
    }

    let baseline = match top.get("baseline") {
        None => return Err(violation("/baseline", "missing required field")),
        Some(v @ Value::Number(_)) => BaselineSpec::Precomputed(unit_real(v, "/baseline")?),
        Some(v) => {
            let map = object(v, "/baseline")?;
            only_keys(map, &["path", "si", "label_column"], "/baseline")?;
            match (file_ref(map, "/baseline", base_dir)?, map.get("si")) {
                (Some(f), None) => BaselineSpec::File(f),
                (None, Some(si)) => BaselineSpec::Precomputed(unit_real(si, "/baseline/si")?),
                (Some(_), Some(_)) => return Err(violation("/baseline", "give exactly one of \"path\" and \"si\"")),
                (None, None) => return Err(violation("/baseline", "one of \"path\" and \"si\" is required")),
            }
        }
    };

    let list = match top.get("candidates") {
        None => return Err(violation("/candidates", "missing required field")),
        Some(Value::Array(items)) => items,
        Some(_) => return Err(violation("/candidates", "expected an array")),
    };
    if list.is_empty() {
        return Err(ManifestError::EmptyCandidateList);
    }
    let mut seen = BTreeSet::new();
    let mut candidates = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let pointer = format!("/candidates/{i}");
        let map = object(item, &pointer)?;
        only_keys(map, &["name", "path", "precomputed_si", "accuracy", "label_column"], &pointer)?;
        let name = match map.get("name") {
            Some(v) => string(v, &format!("{pointer}/name"))?,
            None => return Err(violation(format!("{pointer}/name"), "missing required field")),
        };
        if name.is_empty() {
            return Err(violation(format!("{pointer}/name"), "name is empty"));
        }
        if !seen.insert(name.to_string()) {
            return Err(ManifestError::DuplicateCandidateName(name.to_string()));
        }
        let source = match (file_ref(map, &pointer, base_dir)?, map.get("precomputed_si")) {
            (Some(f), None) => CandidateSpecSource::File(f),
            (None, Some(si)) => CandidateSpecSource::Precomputed(unit_real(si, &format!("{pointer}/precomputed_si"))?),
            (Some(_), Some(_)) => {
                return Err(violation(pointer, "give exactly one of \"path\" and \"precomputed_si\""))
            }
            (None, None) => {
                return Err(violation(pointer, "one of \"path\" and \"precomputed_si\" is required"))
            }
        };
        let accuracy = map
            .get("accuracy")
            .map(|v| unit_real(v, &format!("{pointer}/accuracy")))
            .transpose()?;
        candidates.push(CandidateSpec {
            name: name.to_string(),
            source,
            accuracy,
        });
    }

    let mut metric = METRIC.to_string();
    if let Some(options) = top.get("options") {
        let map = object(options, "/options")?;
        only_keys(map, &["metric"], "/options")?;
        if let Some(m) = map.get("metric") {
            let m = string(m, "/options/metric")?;
            if m != METRIC {
                return Err(violation("/options/metric", format!("unsupported metric {m:?}; only {METRIC:?}")));
            }
            metric = m.to_string();
        }
    }

    Ok(RunManifest {
        baseline,
        candidates,
        metric,
    })
}

/// Reads and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<RunManifest, ManifestError> {
    let bytes = fs::read(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&bytes, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunManifest, ManifestError> {
        parse_manifest(text.as_bytes(), Path::new("."))
    }

    fn pointer_of(err: ManifestError) -> String {
        match err {
            ManifestError::Schema { pointer, .. } => pointer,
            other => panic!("expected a schema violation, got {other:?}"),
        }
    }

    #[test]
    fn fixture_manifest() {
        let m = parse(
            r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.335},
                "candidates":[{"name":"A","precomputed_si":0.9,"accuracy":0.5},{"name":"B","precomputed_si":0.1}]}"#,
        )
        .unwrap();
        assert_eq!(m.baseline, BaselineSpec::Precomputed(0.335));
        assert_eq!(m.candidates.len(), 2);
        assert_eq!(m.candidates[0].accuracy, Some(0.5));
        assert!(m.is_fixture_mode());
        let bare = parse(r#"{"schema":"sepidx-manifest/1","baseline":0.5,"candidates":[{"name":"A","precomputed_si":0.9}]}"#)
            .unwrap();
        assert_eq!(bare.baseline, BaselineSpec::Precomputed(0.5));
    }

    #[test]
    fn path_and_precomputed_together() {
        let err = parse(
            r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},
                "candidates":[{"name":"A","precomputed_si":0.9},{"name":"B","path":"Cargo.toml","precomputed_si":0.2}]}"#,
        )
        .unwrap_err();
        assert_eq!(pointer_of(err), "/candidates/1");
    }

    #[test]
    fn empty_and_duplicate_candidates() {
        assert!(matches!(
            parse(r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[]}"#),
            Err(ManifestError::EmptyCandidateList)
        ));
        assert!(matches!(
            parse(r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[{"name":"A","precomputed_si":0.9},{"name":"A","precomputed_si":0.2}]}"#),
            Err(ManifestError::DuplicateCandidateName(n)) if n == "A"
        ));
    }

    #[test]
    fn schema_pointers() {
        let cases = [
            (r#"{"baseline":{"si":0.3},"candidates":[]}"#, "/schema"),
            (r#"{"schema":"other","baseline":{"si":0.3},"candidates":[]}"#, "/schema"),
            (r#"{"schema":"sepidx-manifest/1","candidates":[]}"#, "/baseline"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":1.3},"candidates":[]}"#, "/baseline/si"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":{}}"#, "/candidates"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[{"precomputed_si":0.9}]}"#, "/candidates/0/name"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[{"name":"A","precomputed_si":"x"}]}"#, "/candidates/0/precomputed_si"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[{"name":"A","path":"no/such/file.sidx"}]}"#, "/candidates/0/path"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[{"name":"A","precomputed_si":0.5,"extra":1}]}"#, "/candidates/0/extra"),
            (r#"{"schema":"sepidx-manifest/1","baseline":{"si":0.3},"candidates":[{"name":"A","precomputed_si":0.5}],"options":{"metric":"cosine"}}"#, "/options/metric"),
        ];
        for (text, pointer) in cases {
            assert_eq!(pointer_of(parse(text).unwrap_err()), pointer, "{text}");
        }
    }

    #[test]
    fn garbage_is_a_json_error() {
        assert!(matches!(parse("{not json"), Err(ManifestError::Json(_))));
        assert!(matches!(parse("[]"), Err(ManifestError::Schema { .. })));
    }
}
