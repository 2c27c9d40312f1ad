//! Shared domain types: labeled feature sets, candidate scores and the
//! report structures produced by ranking and stability runs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when a decoded feature set violates its invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("feature set has {q} point(s); at least 2 are required")]
    TooFewPoints { q: usize },
    #[error("dimension mismatch: {detail}")]
    DimensionMismatch { detail: String },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
}

/// Unvalidated feature-set parts as decoded from a file or built in memory.
///
/// `points` is row-major with `dim` columns; the row count is implied by
/// `points.len() / dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatureSet {
    pub name: String,
    pub dim: usize,
    pub points: Vec<f32>,
    pub labels: Vec<u32>,
}

/// A validated, immutable set of `Q` labeled feature vectors of width `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet {
    name: String,
    dim: usize,
    points: Vec<f32>,
    labels: Vec<u32>,
}

impl LabeledFeatureSet {
    /// Builds and validates a set from a row-major point buffer.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        points: Vec<f32>,
        labels: Vec<u32>,
    ) -> Result<Self, ValidationError> {
        validate_feature_set(RawFeatureSet {
            name: name.into(),
            dim,
            points,
            labels,
        })
    }

    /// Builds a set from one row per point.
    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f32>],
        labels: Vec<u32>,
    ) -> Result<Self, ValidationError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(ValidationError::DimensionMismatch {
                detail: format!("row {i} has {} values, expected {dim}", row.len()),
            });
        }
        Self::new(name, dim, rows.concat(), labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of points (`Q`).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false: a validated set has at least two points.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature width (`D`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[f32] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Returns a copy under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    /// Selects rows by index, keeping the given order. Indices must be in range.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self, ValidationError> {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(self.name.clone(), self.dim, points, labels)
    }

    pub fn into_raw(self) -> RawFeatureSet {
        RawFeatureSet {
            name: self.name,
            dim: self.dim,
            points: self.points,
            labels: self.labels,
        }
    }
}

/// Checks every feature-set invariant and returns the validated set.
///
/// Validation never panics; a validated set passed back through
/// [`LabeledFeatureSet::into_raw`] validates to an identical value.
pub fn validate_feature_set(raw: RawFeatureSet) -> Result<LabeledFeatureSet, ValidationError> {
    let RawFeatureSet {
        name,
        dim,
        points,
        labels,
    } = raw;
    if dim == 0 {
        return Err(ValidationError::DimensionMismatch {
            detail: "feature width must be at least 1".into(),
        });
    }
    if points.len() % dim != 0 {
        return Err(ValidationError::DimensionMismatch {
            detail: format!(
                "{} values do not divide into rows of width {dim}",
                points.len()
            ),
        });
    }
    let q = points.len() / dim;
    if q < 2 {
        return Err(ValidationError::TooFewPoints { q });
    }
    if labels.len() != q {
        return Err(ValidationError::DimensionMismatch {
            detail: format!("{} labels for {q} points", labels.len()),
        });
    }
    if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
        return Err(ValidationError::NonFiniteValue {
            row: pos / dim,
            col: pos % dim,
        });
    }
    Ok(LabeledFeatureSet {
        name,
        dim,
        points,
        labels,
    })
}

/// One candidate's Separation Index.
///
/// `match_count` and `q` are absent for scores replayed from published
/// values (fixture mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate_name: String,
    pub si_value: f64,
    pub match_count: Option<u64>,
    pub q: Option<u64>,
}

impl CandidateScore {
    pub fn from_counts(name: impl Into<String>, match_count: u64, q: u64) -> Self {
        debug_assert!(q > 0 && match_count <= q);
        Self {
            candidate_name: name.into(),
            si_value: match_count as f64 / q as f64,
            match_count: Some(match_count),
            q: Some(q),
        }
    }

    pub fn precomputed(name: impl Into<String>, si_value: f64) -> Self {
        Self {
            candidate_name: name.into(),
            si_value,
            match_count: None,
            q: None,
        }
    }

    pub fn is_precomputed(&self) -> bool {
        self.match_count.is_none()
    }
}

/// Digest of one input file that contributed to a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Provenance carried by every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    /// Seconds since the Unix epoch; zero in canonical mode.
    pub generated_unix: u64,
    pub fixture_mode: bool,
    pub inputs: Vec<InputDigest>,
    pub reported_accuracies: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Default for RunMetadata {
    fn default() -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_unix: 0,
            fixture_mode: false,
            inputs: Vec::new(),
            reported_accuracies: BTreeMap::new(),
            notes: Vec::new(),
        }
    }
}

/// Outcome of a ranking run: accepted candidates (`T`) and rejected
/// candidates (`N`), each sorted by descending SI with ties by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub baseline_si: f64,
    pub accepted: Vec<CandidateScore>,
    pub rejected: Vec<CandidateScore>,
    pub total_candidates: u64,
    pub metadata: RunMetadata,
}

impl RankingReport {
    /// All candidates in report order, accepted first.
    pub fn all_scores(&self) -> impl Iterator<Item = &CandidateScore> {
        self.accepted.iter().chain(self.rejected.iter())
    }

    pub fn accepted_names(&self) -> Vec<&str> {
        self.accepted.iter().map(|s| s.candidate_name.as_str()).collect()
    }

    pub fn rejected_names(&self) -> Vec<&str> {
        self.rejected.iter().map(|s| s.candidate_name.as_str()).collect()
    }
}

/// A correlation coefficient, or an explicit marker when it is undefined
/// (constant input or fewer than two pairs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Correlation {
    Defined { value: f64 },
    NotDefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined { value } => Some(value),
            Correlation::NotDefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Defined { value } => write!(f, "{value:.6}"),
            Correlation::NotDefined => f.write_str("not defined"),
        }
    }
}

/// Per-candidate scores of a stability study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStability {
    pub candidate_name: String,
    pub full_si: f64,
    /// `scores[f][t]` is the SI on trial `t` of fraction `f`.
    pub scores: Vec<Vec<f64>>,
    /// Trial mean per fraction.
    pub mean_si: Vec<f64>,
}

/// Result of re-scoring candidates on random subsamples of the target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub fractions: Vec<f64>,
    pub trials: u32,
    pub seed: u64,
    pub stratified: bool,
    pub baseline_si: Option<f64>,
    /// Baseline SI per fraction and trial, when the baseline has points.
    pub baseline_scores: Option<Vec<Vec<f64>>>,
    pub candidates: Vec<CandidateStability>,
    /// Spearman agreement between full-data SIs and trial-mean SIs, per fraction.
    pub rank_agreement: Vec<Correlation>,
    pub metadata: RunMetadata,
}
