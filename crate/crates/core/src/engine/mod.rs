//! Exact nearest-neighbor search and the Separation Index.
//!
//! The SI of a labeled set is the fraction of points whose nearest neighbor
//! (squared Euclidean distance, self excluded, smallest index on ties)
//! carries the same label.

mod kernel;

use thiserror::Error;

use crate::model::{CandidateScore, LabeledFeatureSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("neighbor assignment has {actual} entries for a set of {expected} points")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("neighbor index {index} for point {point} is out of range or refers to itself")]
    InvalidNeighbor { point: usize, index: usize },
}

/// Nearest neighbor of every point of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestNeighborAssignment {
    pub neighbor_index: Vec<usize>,
    pub neighbor_sq_distance: Vec<f64>,
}

impl NearestNeighborAssignment {
    pub fn len(&self) -> usize {
        self.neighbor_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbor_index.is_empty()
    }
}

/// Squared Euclidean distance, accumulated in `f64` in dimension order.
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (&x, &y)| {
        let diff = f64::from(x) - f64::from(y);
        acc + diff * diff
    })
}

/// Exact nearest neighbors using the blocked parallel kernel.
///
/// Runs on the current rayon thread pool. The assignment is bit-identical
/// for every pool size.
pub fn nearest_neighbors(fs: &LabeledFeatureSet) -> NearestNeighborAssignment {
    let best = kernel::nearest(fs.points(), fs.dim());
    NearestNeighborAssignment {
        neighbor_index: best.iter().map(|b| b.idx).collect(),
        neighbor_sq_distance: best.iter().map(|b| b.dist).collect(),
    }
}

/// Reference nearest neighbors: a plain double loop, no blocking, no threads.
pub fn naive_nearest_neighbors(fs: &LabeledFeatureSet) -> NearestNeighborAssignment {
    let q = fs.len();
    let mut neighbor_index = Vec::with_capacity(q);
    let mut neighbor_sq_distance = Vec::with_capacity(q);
    for i in 0..q {
        let mut best = (f64::INFINITY, usize::MAX);
        for h in (0..q).filter(|&h| h != i) {
            let d = squared_distance(fs.row(i), fs.row(h));
            if d < best.0 {
                best = (d, h);
            }
        }
        neighbor_index.push(best.1);
        neighbor_sq_distance.push(best.0);
    }
    NearestNeighborAssignment {
        neighbor_index,
        neighbor_sq_distance,
    }
}

/// SI of a feature set, named after the set.
pub fn separation_index(fs: &LabeledFeatureSet) -> CandidateScore {
    let nn = nearest_neighbors(fs);
    score_assignment(fs, &nn)
}

/// SI from a previously computed assignment for the same set.
pub fn separation_index_with_labels(
    fs: &LabeledFeatureSet,
    nn: &NearestNeighborAssignment,
) -> Result<CandidateScore, EngineError> {
    let q = fs.len();
    for actual in [nn.neighbor_index.len(), nn.neighbor_sq_distance.len()] {
        if actual != q {
            return Err(EngineError::LengthMismatch { expected: q, actual });
        }
    }
    if let Some((point, &index)) = nn
        .neighbor_index
        .iter()
        .enumerate()
        .find(|&(p, &h)| h >= q || h == p)
    {
        return Err(EngineError::InvalidNeighbor { point, index });
    }
    Ok(score_assignment(fs, nn))
}

/// SI computed entirely by the reference double loop.
pub fn naive_separation_index(fs: &LabeledFeatureSet) -> CandidateScore {
    let nn = naive_nearest_neighbors(fs);
    score_assignment(fs, &nn)
}

fn score_assignment(fs: &LabeledFeatureSet, nn: &NearestNeighborAssignment) -> CandidateScore {
    let labels = fs.labels();
    let matches = nn
        .neighbor_index
        .iter()
        .enumerate()
        .filter(|&(q, &h)| labels[q] == labels[h])
        .count();
    CandidateScore::from_counts(fs.name(), matches as u64, labels.len() as u64)
}

/// Runs `f` on a dedicated rayon pool of `threads` workers.
pub fn with_threads<R: Send>(
    threads: usize,
    f: impl FnOnce() -> R + Send,
) -> Result<R, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}
