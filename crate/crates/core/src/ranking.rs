//! Ranking and rejection of candidate feature extractors.
//!
//! Every candidate is scored on the same target set. Candidates whose SI
//! reaches the baseline SI are accepted, the rest rejected; both lists are
//! sorted by descending SI with ties broken by ascending name.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine;
use crate::model::{CandidateScore, LabeledFeatureSet, RankingReport, RunMetadata};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankingError {
    #[error("candidate list is empty")]
    EmptyCandidateList,
    #[error("duplicate candidate name {0:?}")]
    DuplicateCandidateName(String),
    #[error("labels of candidate {candidate:?} differ from the baseline labels{detail}")]
    LabelSequenceMismatch { candidate: String, detail: String },
    #[error("precomputed SI of {name:?} must be a finite value in [0, 1], got {value}")]
    InvalidScore { name: String, value: f64 },
    #[error("reported accuracy of {name:?} must be finite, got {value}")]
    InvalidAccuracy { name: String, value: f64 },
}

/// The reference against which candidates are accepted or rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// Raw target points; the baseline SI is computed from them.
    Embedding(LabeledFeatureSet),
    /// A published or previously computed baseline SI.
    Precomputed(f64),
}

impl Baseline {
    pub fn labels(&self) -> Option<&[u32]> {
        match self {
            Baseline::Embedding(fs) => Some(fs.labels()),
            Baseline::Precomputed(_) => None,
        }
    }

    /// Baseline SI, computing it if necessary.
    pub fn score(&self) -> Result<f64, RankingError> {
        match self {
            Baseline::Embedding(fs) => Ok(engine::separation_index(fs).si_value),
            Baseline::Precomputed(v) => {
                check_unit(v, "baseline")?;
                Ok(*v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateSource {
    /// Final-layer embeddings of the target set.
    Embedding(LabeledFeatureSet),
    /// Fixture mode: a published SI value.
    Precomputed(f64),
}

/// One candidate extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInput {
    pub name: String,
    pub source: CandidateSource,
    /// Downstream accuracy, carried for correlation reports only.
    pub reported_accuracy: Option<f64>,
}

impl CandidateInput {
    pub fn embedding(name: impl Into<String>, fs: LabeledFeatureSet) -> Self {
        Self {
            name: name.into(),
            source: CandidateSource::Embedding(fs),
            reported_accuracy: None,
        }
    }

    pub fn precomputed(name: impl Into<String>, si: f64) -> Self {
        Self {
            name: name.into(),
            source: CandidateSource::Precomputed(si),
            reported_accuracy: None,
        }
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.reported_accuracy = Some(accuracy);
        self
    }

    pub fn is_precomputed(&self) -> bool {
        matches!(self.source, CandidateSource::Precomputed(_))
    }
}

fn check_unit(value: &f64, name: &str) -> Result<(), RankingError> {
    if value.is_finite() && (0.0..=1.0).contains(value) {
        Ok(())
    } else {
        Err(RankingError::InvalidScore {
            name: name.to_string(),
            value: *value,
        })
    }
}

/// Scores a single candidate, delegating to the SI engine for embeddings.
pub fn score_candidate(candidate: &CandidateInput) -> Result<CandidateScore, RankingError> {
    match &candidate.source {
        CandidateSource::Embedding(fs) => {
            let mut score = engine::separation_index(fs);
            score.candidate_name.clone_from(&candidate.name);
            Ok(score)
        }
        CandidateSource::Precomputed(si) => {
            check_unit(si, &candidate.name)?;
            Ok(CandidateScore::precomputed(&candidate.name, *si))
        }
    }
}

/// Checks names, labels and accuracies of a candidate list against a baseline.
pub fn check_candidates(
    baseline_labels: Option<&[u32]>,
    candidates: &[CandidateInput],
) -> Result<(), RankingError> {
    if candidates.is_empty() {
        return Err(RankingError::EmptyCandidateList);
    }
    let mut seen = BTreeSet::new();
    for c in candidates {
        if !seen.insert(c.name.as_str()) {
            return Err(RankingError::DuplicateCandidateName(c.name.clone()));
        }
        if let Some(acc) = c.reported_accuracy {
            if !acc.is_finite() {
                return Err(RankingError::InvalidAccuracy {
                    name: c.name.clone(),
                    value: acc,
                });
            }
        }
        if let (Some(expected), CandidateSource::Embedding(fs)) = (baseline_labels, &c.source) {
            check_labels(expected, fs.labels(), &c.name)?;
        }
    }
    Ok(())
}

pub(crate) fn check_labels(
    expected: &[u32],
    actual: &[u32],
    candidate: &str,
) -> Result<(), RankingError> {
    let detail = if expected.len() != actual.len() {
        format!(": {} labels, baseline has {}", actual.len(), expected.len())
    } else if let Some(i) = expected.iter().zip(actual).position(|(a, b)| a != b) {
        format!(": first difference at row {i}")
    } else {
        return Ok(());
    };
    Err(RankingError::LabelSequenceMismatch {
        candidate: candidate.to_string(),
        detail,
    })
}

/// Descending SI, then ascending name.
pub fn rank_order(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    b.si_value
        .total_cmp(&a.si_value)
        .then_with(|| a.candidate_name.cmp(&b.candidate_name))
}

/// Scores all candidates and partitions them against the baseline SI.
///
/// A candidate whose SI equals the baseline is accepted.
pub fn rank_candidates(
    baseline: &Baseline,
    candidates: &[CandidateInput],
) -> Result<RankingReport, RankingError> {
    check_candidates(baseline.labels(), candidates)?;
    let baseline_si = baseline.score()?;
    let scores = candidates
        .par_iter()
        .map(score_candidate)
        .collect::<Result<Vec<_>, _>>()?;
    let (mut accepted, mut rejected): (Vec<_>, Vec<_>) =
        scores.into_iter().partition(|s| s.si_value >= baseline_si);
    accepted.sort_by(rank_order);
    rejected.sort_by(rank_order);

    let mut metadata = RunMetadata {
        fixture_mode: candidates.iter().any(CandidateInput::is_precomputed),
        ..RunMetadata::default()
    };
    for c in candidates {
        if let Some(acc) = c.reported_accuracy {
            metadata.reported_accuracies.insert(c.name.clone(), acc);
        }
    }
    if matches!(baseline, Baseline::Precomputed(_)) {
        metadata.notes.push("baseline SI supplied as a precomputed value".into());
    }
    Ok(RankingReport {
        baseline_si,
        accepted,
        rejected,
        total_candidates: candidates.len() as u64,
        metadata,
    })
}
