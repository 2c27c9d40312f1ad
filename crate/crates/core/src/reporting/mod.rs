//! Rank correlation between SI and downstream accuracy, and the report
//! JSON schema.

mod json;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Correlation, RankingReport, RunMetadata};

pub use json::{
    canonical_bytes, emit_json, format_real, parse_report, to_canonical_json, ReportDocument,
    REPORT_SCHEMA,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportingError {
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },
    #[error("only {shared} candidate(s) have an accuracy; at least 2 are required")]
    InsufficientOverlap { shared: usize },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

/// Average ("fractional") ranks, 1-based; tied values share the mean of
/// the ranks they span.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), ReportingError> {
    if x.len() != y.len() {
        return Err(ReportingError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if let Some(index) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(ReportingError::NonFiniteValue {
            index: index % x.len().max(1),
        });
    }
    Ok(())
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Correlation {
    let n = x.len();
    if n < 2 {
        return Correlation::NotDefined;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Correlation::NotDefined;
    }
    Correlation::Defined {
        value: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, ReportingError> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(x, y))
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
///
/// Constant input (or fewer than two pairs) yields
/// [`Correlation::NotDefined`].
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, ReportingError> {
    check_pair(x, y)?;
    Ok(pearson_unchecked(&fractional_ranks(x), &fractional_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub candidate_name: String,
    pub si_value: f64,
    pub accuracy: f64,
}

/// A pair ordered one way by SI and the opposite way by accuracy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcordanceViolation {
    pub higher_si: String,
    pub lower_si: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub baseline_si: f64,
    /// Candidates with both an SI and an accuracy, in report order.
    pub points: Vec<CorrelationPoint>,
    pub spearman: Correlation,
    pub pearson: Correlation,
    pub violations: Vec<ConcordanceViolation>,
    /// Report candidates without an accuracy.
    pub missing_accuracy: Vec<String>,
    /// Accuracy entries naming no report candidate.
    pub unknown_names: Vec<String>,
    pub metadata: RunMetadata,
}

/// Pairs a ranking report with externally measured accuracies.
pub fn correlation_report(
    report: &RankingReport,
    accuracies: &BTreeMap<String, f64>,
) -> Result<CorrelationSummary, ReportingError> {
    let mut points = Vec::new();
    let mut missing_accuracy = Vec::new();
    for score in report.all_scores() {
        match accuracies.get(&score.candidate_name) {
            Some(&accuracy) => points.push(CorrelationPoint {
                candidate_name: score.candidate_name.clone(),
                si_value: score.si_value,
                accuracy,
            }),
            None => missing_accuracy.push(score.candidate_name.clone()),
        }
    }
    if points.len() < 2 {
        return Err(ReportingError::InsufficientOverlap {
            shared: points.len(),
        });
    }
    let unknown_names = accuracies
        .keys()
        .filter(|k| !report.all_scores().any(|s| &s.candidate_name == *k))
        .cloned()
        .collect();

    let si: Vec<f64> = points.iter().map(|p| p.si_value).collect();
    let acc: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
    let spearman = spearman(&si, &acc)?;
    let pearson = pearson(&si, &acc)?;

    let mut violations = Vec::new();
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let (hi, lo) = if a.si_value > b.si_value {
                (a, b)
            } else if b.si_value > a.si_value {
                (b, a)
            } else {
                continue;
            };
            if hi.accuracy < lo.accuracy {
                violations.push(ConcordanceViolation {
                    higher_si: hi.candidate_name.clone(),
                    lower_si: lo.candidate_name.clone(),
                });
            }
        }
    }

    Ok(CorrelationSummary {
        baseline_si: report.baseline_si,
        points,
        spearman,
        pearson,
        violations,
        missing_accuracy,
        unknown_names,
        metadata: RunMetadata {
            fixture_mode: report.metadata.fixture_mode,
            ..RunMetadata::default()
        },
    })
}
