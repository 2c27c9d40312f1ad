//! Ranking stability under random reduction of the target set.
//!
//! For every `(fraction, trial)` one row subset is drawn and applied to all
//! candidates alike, so candidates are always compared on the same points.
//! Draws come from a ChaCha stream keyed on `(seed, fraction, trial)`,
//! which makes each subset a pure function of those three values.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::engine;
use crate::model::{CandidateStability, LabeledFeatureSet, RunMetadata, StabilityReport, ValidationError};
use crate::ranking::{self, Baseline, CandidateInput, CandidateSource, RankingError};
use crate::reporting::{self, ReportingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("fraction {0} is outside (0, 1]")]
    InvalidFraction(f64),
    #[error("subsample of {size} row(s) from {q} at fraction {fraction} is too small; at least 2 are required")]
    SubsampleTooSmall { q: usize, fraction: f64, size: usize },
    #[error("candidate {0:?} has no embedding; subsampling needs points")]
    FixtureModeUnsupported(String),
    #[error("at least one fraction and one trial are required")]
    EmptyDesign,
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Reporting(#[from] ReportingError),
}

type TrialScores = (Option<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOptions {
    pub fractions: Vec<f64>,
    pub trials: u32,
    pub seed: u64,
    /// Draw per class in proportion to class sizes instead of uniformly.
    pub stratified: bool,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            fractions: vec![1.0, 0.75, 0.5],
            trials: 1,
            seed: 0,
            stratified: false,
        }
    }
}

/// The random stream for one `(seed, fraction, trial)` draw.
pub fn subsample_rng(seed: u64, fraction: f64, trial: u32) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fraction.to_bits().to_le_bytes());
    key[16..20].copy_from_slice(&trial.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// Number of rows kept: `floor(fraction * q)`.
pub fn subsample_size(q: usize, fraction: f64) -> Result<usize, StabilityError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(StabilityError::InvalidFraction(fraction));
    }
    let size = (fraction * q as f64).floor() as usize;
    if size < 2 {
        return Err(StabilityError::SubsampleTooSmall { q, fraction, size });
    }
    Ok(size)
}

/// Moves a uniform `k`-subset of `pool` to its front (partial Fisher-Yates).
fn draw(pool: &mut [usize], k: usize, rng: &mut ChaCha20Rng) {
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
}

/// Row indices of one subsample, ascending.
pub fn subsample_indices(
    labels: &[u32],
    fraction: f64,
    seed: u64,
    trial: u32,
    stratified: bool,
) -> Result<Vec<usize>, StabilityError> {
    let q = labels.len();
    let size = subsample_size(q, fraction)?;
    if size == q {
        return Ok((0..q).collect());
    }
    let mut rng = subsample_rng(seed, fraction, trial);
    let mut picked = if stratified {
        stratified_draw(labels, fraction, size, &mut rng)
    } else {
        let mut pool: Vec<usize> = (0..q).collect();
        draw(&mut pool, size, &mut rng);
        pool.truncate(size);
        pool
    };
    picked.sort_unstable();
    Ok(picked)
}

/// Per-class quotas `floor(fraction * n_c)`, topped up to `size` by largest
/// remainder (ties to the smaller label), then drawn class by class in
/// ascending label order from a single stream.
fn stratified_draw(labels: &[u32], fraction: f64, size: usize, rng: &mut ChaCha20Rng) -> Vec<usize> {
    let mut classes: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let mut quotas: Vec<(u32, usize, f64)> = classes
        .iter()
        .map(|(&l, rows)| {
            let exact = fraction * rows.len() as f64;
            let base = exact.floor() as usize;
            (l, base, exact - base as f64)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for &i in by_remainder.iter().take(size.saturating_sub(assigned)) {
        quotas[i].1 += 1;
    }
    let mut picked = Vec::with_capacity(size);
    for (label, quota, _) in quotas {
        let pool = classes.get_mut(&label).expect("quota labels come from the class map");
        let quota = quota.min(pool.len());
        draw(pool, quota, rng);
        picked.extend_from_slice(&pool[..quota]);
    }
    picked
}

/// Uniform random subsample of `floor(fraction * Q)` rows, kept in their
/// original order.
pub fn subsample(
    fs: &LabeledFeatureSet,
    fraction: f64,
    seed: u64,
    trial: u32,
) -> Result<LabeledFeatureSet, StabilityError> {
    let rows = subsample_indices(fs.labels(), fraction, seed, trial, false)?;
    Ok(fs.select_rows(&rows)?)
}

fn embeddings(candidates: &[CandidateInput]) -> Result<Vec<&LabeledFeatureSet>, StabilityError> {
    candidates
        .iter()
        .map(|c| match &c.source {
            CandidateSource::Embedding(fs) => Ok(fs),
            CandidateSource::Precomputed(_) => Err(StabilityError::FixtureModeUnsupported(c.name.clone())),
        })
        .collect()
}

/// Re-scores every candidate on paired random subsamples and measures how
/// well trial-mean SIs preserve the full-data candidate order.
pub fn stability_study(
    baseline: &Baseline,
    candidates: &[CandidateInput],
    options: &StabilityOptions,
) -> Result<StabilityReport, StabilityError> {
    if options.fractions.is_empty() || options.trials == 0 {
        return Err(StabilityError::EmptyDesign);
    }
    ranking::check_candidates(baseline.labels(), candidates)?;
    let sets = embeddings(candidates)?;
    let labels = baseline.labels().unwrap_or_else(|| sets[0].labels());
    for (c, fs) in candidates.iter().zip(&sets) {
        ranking::check_labels(labels, fs.labels(), &c.name)?;
    }
    for &f in &options.fractions {
        subsample_size(labels.len(), f)?;
    }
    let baseline_set = match baseline {
        Baseline::Embedding(fs) => Some(fs),
        Baseline::Precomputed(_) => None,
    };

    let score = |fs: &LabeledFeatureSet, rows: &[usize]| -> Result<f64, StabilityError> {
        if rows.len() == fs.len() {
            return Ok(engine::separation_index(fs).si_value);
        }
        Ok(engine::separation_index(&fs.select_rows(rows)?).si_value)
    };

    let jobs: Vec<(usize, u32)> = (0..options.fractions.len())
        .flat_map(|f| (0..options.trials).map(move |t| (f, t)))
        .collect();
    // For each job: baseline score (if any) followed by candidate scores.
    let results = jobs
        .par_iter()
        .map(|&(f, t)| {
            let rows = subsample_indices(labels, options.fractions[f], options.seed, t, options.stratified)?;
            let base = baseline_set.map(|fs| score(fs, &rows)).transpose()?;
            let cands = sets
                .par_iter()
                .map(|fs| score(fs, &rows))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((base, cands))
        })
        .collect::<Result<Vec<_>, StabilityError>>()?;

    let trials = options.trials as usize;
    let grid = |pick: &dyn Fn(&TrialScores) -> f64| -> Vec<Vec<f64>> {
        results.chunks(trials).map(|per_fraction| per_fraction.iter().map(pick).collect()).collect()
    };

    let full: Vec<f64> = sets.par_iter().map(|fs| engine::separation_index(fs).si_value).collect();
    let mut out = Vec::with_capacity(candidates.len());
    for (j, c) in candidates.iter().enumerate() {
        let scores = grid(&|r| r.1[j]);
        let mean_si = scores.iter().map(|row| row.iter().sum::<f64>() / trials as f64).collect();
        out.push(CandidateStability {
            candidate_name: c.name.clone(),
            full_si: full[j],
            scores,
            mean_si,
        });
    }
    let rank_agreement = (0..options.fractions.len())
        .map(|f| {
            let means: Vec<f64> = out.iter().map(|c| c.mean_si[f]).collect();
            reporting::spearman(&full, &means)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let baseline_si = match baseline {
        Baseline::Embedding(fs) => Some(engine::separation_index(fs).si_value),
        Baseline::Precomputed(v) => Some(*v),
    };
    Ok(StabilityReport {
        fractions: options.fractions.clone(),
        trials: options.trials,
        seed: options.seed,
        stratified: options.stratified,
        baseline_si,
        baseline_scores: baseline_set.map(|_| grid(&|r| r.0.unwrap_or(f64::NAN))),
        candidates: out,
        rank_agreement,
        metadata: RunMetadata::default(),
    })
}
