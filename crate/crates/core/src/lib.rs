//! Separation Index toolkit.
//!
//! Scores labeled feature sets by nearest-neighbor label agreement, ranks
//! candidate feature extractors against a raw-input baseline and measures
//! how stable that ranking is under subsampling.

pub mod engine;
pub mod formats;
pub mod model;
pub mod ranking;
pub mod reporting;
pub mod stability;

pub use engine::{
    naive_nearest_neighbors, naive_separation_index, nearest_neighbors, separation_index,
    separation_index_with_labels, NearestNeighborAssignment,
};
pub use model::{
    validate_feature_set, CandidateScore, Correlation, LabeledFeatureSet, RankingReport,
    RawFeatureSet, StabilityReport, ValidationError,
};
pub use ranking::{rank_candidates, score_candidate, Baseline, CandidateInput, CandidateSource};
pub use stability::{stability_study, subsample, StabilityOptions};
