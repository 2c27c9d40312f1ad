//! CSV interchange: comma separated, header row required, `.` decimal
//! point. One named column holds integer labels; every other column is a
//! feature, in header order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{validate_feature_set, LabeledFeatureSet, RawFeatureSet, ValidationError};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("missing label column {0:?} in header")]
    MissingLabelColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRows { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column:?}: cannot parse {cell:?} as a number")]
    NonNumericCell { line: u64, column: String, cell: String },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

fn line_of(pos: Option<&::csv::Position>) -> u64 {
    pos.map_or(0, ::csv::Position::line)
}

/// Parses CSV bytes into a validated set named `name`.
pub fn read_csv_bytes(bytes: &[u8], label_column: &str, name: &str) -> Result<LabeledFeatureSet, CsvError> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .byte_headers()
        .map_err(|e| CsvError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let columns: Vec<String> = header
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim().to_string())
        .collect();
    let label_idx = columns
        .iter()
        .position(|c| c == label_column)
        .ok_or_else(|| CsvError::MissingLabelColumn(label_column.to_string()))?;

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut record = ::csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                return Err(CsvError::Malformed {
                    line: line_of(e.position()),
                    message: e.to_string(),
                })
            }
        }
        let line = line_of(record.position());
        if record.len() != columns.len() {
            return Err(CsvError::RaggedRows {
                line,
                expected: columns.len(),
                found: record.len(),
            });
        }
        for (i, field) in record.iter().enumerate() {
            let text = std::str::from_utf8(field).map(str::trim);
            let bad = || CsvError::NonNumericCell {
                line,
                column: columns[i].clone(),
                cell: String::from_utf8_lossy(field).into_owned(),
            };
            let text = text.map_err(|_| bad())?;
            if i == label_idx {
                labels.push(text.parse::<u32>().map_err(|_| bad())?);
            } else {
                points.push(text.parse::<f32>().map_err(|_| bad())?);
            }
        }
    }
    Ok(validate_feature_set(RawFeatureSet {
        name: name.to_string(),
        dim: columns.len() - 1,
        points,
        labels,
    })?)
}

/// Reads a CSV file; the set is named after the file stem.
pub fn read_csv(path: &Path, label_column: &str) -> Result<LabeledFeatureSet, CsvError> {
    let bytes = fs::read(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    read_csv_bytes(&bytes, label_column, &name)
}

/// Writes features as `x0..x{D-1}` followed by the label column. Values use
/// the shortest representation that parses back to the same `f32`.
pub fn write_csv(fs: &LabeledFeatureSet, path: &Path, label_column: &str) -> Result<(), CsvError> {
    let io = |source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    let header: Vec<String> = (0..fs.dim())
        .map(|d| format!("x{d}"))
        .chain(std::iter::once(label_column.to_string()))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (i, &label) in fs.labels().iter().enumerate() {
        let row: Vec<String> = fs.row(i).iter().map(f32::to_string).collect();
        writeln!(out, "{},{label}", row.join(",")).map_err(io)?;
    }
    fs::write(path, out).map_err(io)
}
