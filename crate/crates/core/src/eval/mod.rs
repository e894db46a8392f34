//! Simulated reviews against oracle labels, the X95 / WSS@95 metrics, and
//! aggregation across seeded repeats.

mod cost;
pub mod plot;
mod rank;
pub mod runlog;
mod scott_knott;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::active::{ActiveError, Learner, Phase, ReviewState, TreatmentCode, TreatmentConfig};
use crate::corpus::{Corpus, Relevance};
use crate::features::{FeatureError, FeatureMatrix, TfidfVectorizer};
use crate::svm::SvmParams;

pub use cost::{cost_saving, CostModel, ReviewEffort};
pub use rank::{rank_results, RankEntry, RankReport};
pub use scott_knott::{cliffs_delta, scott_knott, ScottKnottConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("study {0} has no oracle label")]
    Unlabeled(usize),
    #[error("corpus has no relevant studies")]
    NoRelevant,
    #[error("pool size must be positive")]
    ZeroPool,
    #[error("x95 = {x95} is outside 1..={pool}")]
    InvalidX95 { x95: usize, pool: usize },
    #[error("no values to summarize")]
    EmptySample,
    #[error("at least one treatment is required")]
    NoTreatments,
    #[error("repeat count must be at least 1")]
    ZeroRepeats,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("results come from different corpora: {0} vs {1}")]
    MixedCorpora(String, String),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Features(#[from] FeatureError),
}

/// Oracle labels and features for one corpus, shared by every run on it.
#[derive(Debug, Clone)]
pub struct SimulationData {
    pub name: String,
    pub labels: Vec<Relevance>,
    pub features: FeatureMatrix,
    pub n_relevant: usize,
}

impl SimulationData {
    pub fn new(name: impl Into<String>, labels: Vec<Relevance>, features: FeatureMatrix) -> Result<Self, EvalError> {
        let n_relevant = labels.iter().filter(|l| l.is_relevant()).count();
        if n_relevant == 0 {
            return Err(EvalError::NoRelevant);
        }
        if features.len() != labels.len() {
            return Err(ActiveError::SizeMismatch {
                rows: features.len(),
                studies: labels.len(),
            }
            .into());
        }
        Ok(SimulationData {
            name: name.into(),
            labels,
            features,
            n_relevant,
        })
    }

    /// Featurizes a fully labeled corpus.
    pub fn from_corpus(corpus: &Corpus, vectorizer: &TfidfVectorizer) -> Result<Self, EvalError> {
        let labels = oracle_labels(corpus)?;
        let (_, features) = vectorizer.fit_transform(corpus)?;
        Self::new(corpus.name.clone(), labels, features)
    }

    /// Oracle labels only, with an empty feature space. Enough for linear
    /// review, which never consults features.
    pub fn labels_only(corpus: &Corpus) -> Result<Self, EvalError> {
        let labels = oracle_labels(corpus)?;
        let n = labels.len();
        Self::new(corpus.name.clone(), labels, FeatureMatrix::new(vec![Default::default(); n], 0))
    }

    pub fn pool(&self) -> usize {
        self.labels.len()
    }
}

fn oracle_labels(corpus: &Corpus) -> Result<Vec<Relevance>, EvalError> {
    corpus
        .studies
        .iter()
        .map(|s| s.oracle_label.ok_or(EvalError::Unlabeled(s.id)))
        .collect()
}

/// Smallest count reaching `recall · n_relevant`.
pub fn recall_target(recall: f64, n_relevant: usize) -> usize {
    let exact = recall * n_relevant as f64;
    // guard against 0.95 * 20 = 19.000000000000004
    ((exact - 1e-9).ceil().max(1.0) as usize).min(n_relevant)
}

/// Work saved over sampling at the given recall: `recall − x / pool`.
pub fn wss_at(recall: f64, x: usize, pool: usize) -> Result<f64, EvalError> {
    if pool == 0 {
        return Err(EvalError::ZeroPool);
    }
    if x == 0 || x > pool {
        return Err(EvalError::InvalidX95 { x95: x, pool });
    }
    Ok(recall - x as f64 / pool as f64)
}

pub fn wss_at_95(x95: usize, pool: usize) -> Result<f64, EvalError> {
    wss_at(0.95, x95, pool)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub treatment: TreatmentCode,
    pub seed: u64,
    pub corpus: String,
    pub candidates: usize,
    pub relevant: usize,
    pub x95: usize,
    pub wss95: f64,
    /// `(|L|, |L_R|)` after every label.
    pub trajectory: Vec<(usize, usize)>,
    /// Relevant studies not found at termination.
    pub missed: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Labels gathered between refits.
    pub batch: usize,
    pub svm: SvmParams,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            batch: 1,
            svm: SvmParams::default(),
        }
    }
}

/// One round of a traced simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub found_before: usize,
    pub labeled_before: usize,
    pub phase: Phase,
    pub queried: Vec<usize>,
    pub trained: Option<usize>,
    pub undersampled: bool,
}

pub fn simulate(
    data: &SimulationData,
    code: TreatmentCode,
    config: &TreatmentConfig,
    seed: u64,
) -> Result<SimulationResult, EvalError> {
    simulate_with(data, code, config, seed, &SimOptions::default(), None)
}

pub fn simulate_traced(
    data: &SimulationData,
    code: TreatmentCode,
    config: &TreatmentConfig,
    seed: u64,
    options: &SimOptions,
) -> Result<(SimulationResult, Vec<RoundTrace>), EvalError> {
    let mut trace = Vec::new();
    let res = simulate_with(data, code, config, seed, options, Some(&mut trace))?;
    Ok((res, trace))
}

pub fn simulate_with(
    data: &SimulationData,
    code: TreatmentCode,
    config: &TreatmentConfig,
    seed: u64,
    options: &SimOptions,
    mut trace: Option<&mut Vec<RoundTrace>>,
) -> Result<SimulationResult, EvalError> {
    config.validate()?;
    if options.batch == 0 {
        return Err(EvalError::ZeroBatch);
    }
    let pool = data.pool();
    let target = recall_target(config.target_recall, data.n_relevant);
    let mut learner = Learner::new(code, *config);
    learner.svm.params = options.svm;
    let mut state = ReviewState::new(pool, seed);
    let mut trajectory = Vec::new();

    'review: while state.n_relevant() < target {
        let found_before = state.n_relevant();
        let labeled_before = state.n_labeled();
        let step = learner.step(&mut state, &data.features, options.batch)?;
        if let Some(t) = trace.as_deref_mut() {
            t.push(RoundTrace {
                found_before,
                labeled_before,
                phase: step.query.phase,
                queried: step.query.ids.clone(),
                trained: step.trained,
                undersampled: step.undersampled,
            });
        }
        for id in step.query.ids {
            state.record_label(id, data.labels[id])?;
            trajectory.push((state.n_labeled(), state.n_relevant()));
            if state.n_relevant() >= target {
                break 'review;
            }
        }
    }

    let x95 = state.n_labeled();
    let missed = (0..pool)
        .filter(|&i| data.labels[i].is_relevant() && state.label_of(i).is_none())
        .collect();
    Ok(SimulationResult {
        treatment: code,
        seed,
        corpus: data.name.clone(),
        candidates: pool,
        relevant: data.n_relevant,
        x95,
        wss95: wss_at(config.target_recall, x95, pool)?,
        trajectory,
        missed,
    })
}

/// `n` runs with seeds `base_seed..base_seed + n`, ordered by seed.
pub fn repeat(
    data: &SimulationData,
    code: TreatmentCode,
    config: &TreatmentConfig,
    n: usize,
    base_seed: u64,
) -> Result<Vec<SimulationResult>, EvalError> {
    repeat_with(data, code, config, n, base_seed, &SimOptions::default())
}

pub fn repeat_with(
    data: &SimulationData,
    code: TreatmentCode,
    config: &TreatmentConfig,
    n: usize,
    base_seed: u64,
    options: &SimOptions,
) -> Result<Vec<SimulationResult>, EvalError> {
    if n == 0 {
        return Err(EvalError::ZeroRepeats);
    }
    (0..n as u64)
        .into_par_iter()
        .map(|k| simulate_with(data, code, config, base_seed + k, options, None))
        .collect()
}

/// Nearest-rank percentile of ascending `sorted`, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Median and inter-quartile range (75th − 25th percentile), nearest rank.
pub fn median_iqr(values: &[f64]) -> Result<(f64, f64), EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((percentile(&v, 50.0), percentile(&v, 75.0) - percentile(&v, 25.0)))
}
