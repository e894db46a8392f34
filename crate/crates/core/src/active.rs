//! Treatment codes and the active-learning review loop.
//!
//! A treatment is four choices: when to start training (Patient after `t1`
//! relevant finds, Hasty after one), how to query (Uncertainty or Certainty),
//! whether to stop retraining once stable (Stop) or keep going (Train), and
//! how to balance classes (None, Aggressive undersampling, Weighting, or
//! Mixed: weighting before stability and undersampling after). FASTREAD is
//! `HUTM`. The sentinel `linear` reviews in random order with no learner.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Relevance;
use crate::features::FeatureMatrix;
use crate::svm::{balanced_weights, LinearModel, SvmError, SvmTrainer};

#[derive(Debug, Error, PartialEq)]
pub enum ActiveError {
    #[error("study {0} is already labeled")]
    AlreadyLabeled(usize),
    #[error("study {0} does not exist")]
    UnknownStudy(usize),
    #[error("no unlabeled studies remain")]
    Exhausted,
    #[error("invalid treatment code {0:?}")]
    InvalidCode(String),
    #[error("invalid treatment config: {0}")]
    InvalidConfig(String),
    #[error("feature matrix has {rows} rows, review has {studies} studies")]
    SizeMismatch { rows: usize, studies: usize },
    #[error(transparent)]
    Svm(#[from] SvmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Start {
    Patient,
    Hasty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryRule {
    Uncertainty,
    Certainty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StopRule {
    StopWhenStable,
    KeepTraining,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Balance {
    None,
    Aggressive,
    Weighting,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Treatment {
    pub start: Start,
    pub query: QueryRule,
    pub stop: StopRule,
    pub balance: Balance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreatmentCode {
    Active(Treatment),
    Linear,
}

impl TreatmentCode {
    pub const FASTREAD: TreatmentCode = TreatmentCode::Active(Treatment {
        start: Start::Hasty,
        query: QueryRule::Uncertainty,
        stop: StopRule::KeepTraining,
        balance: Balance::Mixed,
    });

    /// The 32 learner codes followed by `linear`.
    pub fn all() -> Vec<TreatmentCode> {
        let mut out = Vec::with_capacity(33);
        for start in [Start::Patient, Start::Hasty] {
            for query in [QueryRule::Uncertainty, QueryRule::Certainty] {
                for stop in [StopRule::StopWhenStable, StopRule::KeepTraining] {
                    for balance in [Balance::None, Balance::Aggressive, Balance::Weighting, Balance::Mixed] {
                        out.push(TreatmentCode::Active(Treatment { start, query, stop, balance }));
                    }
                }
            }
        }
        out.push(TreatmentCode::Linear);
        out
    }

    pub fn treatment(&self) -> Option<&Treatment> {
        match self {
            TreatmentCode::Active(t) => Some(t),
            TreatmentCode::Linear => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, TreatmentCode::Linear)
    }

    /// Parses a comma-separated list; `all` expands to the 33 codes.
    pub fn parse_list(spec: &str) -> Result<Vec<TreatmentCode>, ActiveError> {
        let mut out: Vec<TreatmentCode> = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                for c in Self::all() {
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            } else {
                let c = part.parse()?;
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        if out.is_empty() {
            return Err(ActiveError::InvalidCode(spec.to_string()));
        }
        Ok(out)
    }
}

impl fmt::Display for TreatmentCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self {
            TreatmentCode::Linear => return f.write_str("linear"),
            TreatmentCode::Active(t) => t,
        };
        let s = match t.start {
            Start::Patient => 'P',
            Start::Hasty => 'H',
        };
        let q = match t.query {
            QueryRule::Uncertainty => 'U',
            QueryRule::Certainty => 'C',
        };
        let st = match t.stop {
            StopRule::StopWhenStable => 'S',
            StopRule::KeepTraining => 'T',
        };
        let b = match t.balance {
            Balance::None => 'N',
            Balance::Aggressive => 'A',
            Balance::Weighting => 'W',
            Balance::Mixed => 'M',
        };
        write!(f, "{s}{q}{st}{b}")
    }
}

impl FromStr for TreatmentCode {
    type Err = ActiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.eq_ignore_ascii_case("linear") {
            return Ok(TreatmentCode::Linear);
        }
        let bad = || ActiveError::InvalidCode(s.to_string());
        let chars: Vec<char> = trimmed.chars().map(|c| c.to_ascii_uppercase()).collect();
        let [s0, q0, t0, b0] = chars[..] else {
            return Err(bad());
        };
        let start = match s0 {
            'P' => Start::Patient,
            'H' => Start::Hasty,
            _ => return Err(bad()),
        };
        let query = match q0 {
            'U' => QueryRule::Uncertainty,
            'C' => QueryRule::Certainty,
            _ => return Err(bad()),
        };
        let stop = match t0 {
            'S' => StopRule::StopWhenStable,
            'T' => StopRule::KeepTraining,
            _ => return Err(bad()),
        };
        let balance = match b0 {
            'N' => Balance::None,
            'A' => Balance::Aggressive,
            'W' => Balance::Weighting,
            'M' => Balance::Mixed,
            _ => return Err(bad()),
        };
        Ok(TreatmentCode::Active(Treatment { start, query, stop, balance }))
    }
}

impl Serialize for TreatmentCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TreatmentCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreatmentConfig {
    /// Relevant finds needed before a Patient learner starts training.
    pub t1: usize,
    /// Relevant finds after which the learner counts as stable.
    pub t2: usize,
    pub target_recall: f64,
}

impl Default for TreatmentConfig {
    fn default() -> Self {
        TreatmentConfig {
            t1: 5,
            t2: 30,
            target_recall: 0.95,
        }
    }
}

impl TreatmentConfig {
    pub fn validate(&self) -> Result<(), ActiveError> {
        if !(1 <= self.t1 && self.t1 <= self.t2) {
            return Err(ActiveError::InvalidConfig(format!(
                "need 1 <= t1 <= t2, got t1={} t2={}",
                self.t1, self.t2
            )));
        }
        if !(self.target_recall > 0.0 && self.target_recall <= 1.0) {
            return Err(ActiveError::InvalidConfig(format!(
                "target recall must be in (0, 1], got {}",
                self.target_recall
            )));
        }
        Ok(())
    }
}

/// Which selection rule produced a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Random,
    Uncertainty,
    Certainty,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Random => "random",
            Phase::Uncertainty => "uncertainty",
            Phase::Certainty => "certainty",
        })
    }
}

/// Labels gathered so far: the partition of all studies into L (split into
/// L_R and L_I) and ¬L, plus the current model and the sampling generator.
#[derive(Debug, Clone)]
pub struct ReviewState {
    labels: Vec<Option<Relevance>>,
    /// Labeling order.
    history: Vec<usize>,
    unlabeled: Vec<usize>,
    relevant: Vec<usize>,
    irrelevant: Vec<usize>,
    pub model: Option<LinearModel>,
    seed: u64,
    rng: ChaCha8Rng,
}

fn insert_sorted(v: &mut Vec<usize>, id: usize) {
    if let Err(pos) = v.binary_search(&id) {
        v.insert(pos, id);
    }
}

fn remove_sorted(v: &mut Vec<usize>, id: usize) -> bool {
    match v.binary_search(&id) {
        Ok(pos) => {
            v.remove(pos);
            true
        }
        Err(_) => false,
    }
}

impl ReviewState {
    pub fn new(n_studies: usize, seed: u64) -> Self {
        ReviewState {
            labels: vec![None; n_studies],
            history: Vec::new(),
            unlabeled: (0..n_studies).collect(),
            relevant: Vec::new(),
            irrelevant: Vec::new(),
            model: None,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn n_studies(&self) -> usize {
        self.labels.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label_of(&self, id: usize) -> Option<Relevance> {
        self.labels.get(id).copied().flatten()
    }

    /// L, in labeling order.
    pub fn labeled(&self) -> &[usize] {
        &self.history
    }

    /// ¬L, ascending.
    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// L_R, ascending.
    pub fn relevant(&self) -> &[usize] {
        &self.relevant
    }

    /// L_I, ascending.
    pub fn irrelevant(&self) -> &[usize] {
        &self.irrelevant
    }

    pub fn n_labeled(&self) -> usize {
        self.history.len()
    }

    pub fn n_relevant(&self) -> usize {
        self.relevant.len()
    }

    pub fn n_irrelevant(&self) -> usize {
        self.irrelevant.len()
    }

    pub fn record_label(&mut self, id: usize, label: Relevance) -> Result<(), ActiveError> {
        match self.labels.get(id) {
            None => return Err(ActiveError::UnknownStudy(id)),
            Some(Some(_)) => return Err(ActiveError::AlreadyLabeled(id)),
            Some(None) => {}
        }
        remove_sorted(&mut self.unlabeled, id);
        self.labels[id] = Some(label);
        self.history.push(id);
        match label {
            Relevance::Relevant => insert_sorted(&mut self.relevant, id),
            Relevance::Irrelevant => insert_sorted(&mut self.irrelevant, id),
        }
        Ok(())
    }

    /// Labels an unlabeled study or overwrites an existing label.
    pub fn set_label(&mut self, id: usize, label: Relevance) -> Result<(), ActiveError> {
        match self.labels.get(id) {
            None => Err(ActiveError::UnknownStudy(id)),
            Some(None) => self.record_label(id, label),
            Some(Some(old)) if *old == label => Ok(()),
            Some(Some(_)) => {
                self.labels[id] = Some(label);
                match label {
                    Relevance::Relevant => {
                        remove_sorted(&mut self.irrelevant, id);
                        insert_sorted(&mut self.relevant, id);
                    }
                    Relevance::Irrelevant => {
                        remove_sorted(&mut self.relevant, id);
                        insert_sorted(&mut self.irrelevant, id);
                    }
                }
                Ok(())
            }
        }
    }

    /// Seed for the next SVM fit, derived from the review seed and |L|.
    pub fn train_seed(&self) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(self.history.len() as u64)
    }

    fn sample_random(&mut self, k: usize) -> Vec<usize> {
        let k = k.min(self.unlabeled.len());
        rand::seq::index::sample(&mut self.rng, self.unlabeled.len(), k)
            .into_iter()
            .map(|i| self.unlabeled[i])
            .collect()
    }

    /// Replaces the sampling generator; used when selection must be a pure
    /// function of the labels gathered so far.
    pub fn reseed_sampler(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

/// Relevant finds needed before training starts; `None` means never.
pub fn enough(code: TreatmentCode, config: &TreatmentConfig) -> Option<usize> {
    match code {
        TreatmentCode::Linear => None,
        TreatmentCode::Active(t) => match t.start {
            Start::Patient => Some(config.t1),
            Start::Hasty => Some(1),
        },
    }
}

pub fn not_stable(state: &ReviewState, config: &TreatmentConfig) -> bool {
    state.n_relevant() < config.t2
}

fn learner_started(code: TreatmentCode, state: &ReviewState, config: &TreatmentConfig) -> bool {
    enough(code, config).is_some_and(|e| state.n_relevant() >= e)
}

/// Whether the model should be refit before the next query.
pub fn should_retrain(code: TreatmentCode, state: &ReviewState, config: &TreatmentConfig) -> bool {
    match code.treatment() {
        None => false,
        Some(t) => t.stop == StopRule::KeepTraining || not_stable(state, config),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Number of examples in the final fit.
    pub training_size: usize,
    pub undersampled: bool,
}

/// Fits the model for `code` on the current labels.
pub fn train_step(
    code: TreatmentCode,
    state: &ReviewState,
    features: &FeatureMatrix,
    config: &TreatmentConfig,
    svm: &SvmTrainer,
    seed: u64,
) -> Result<TrainOutcome, ActiveError> {
    let Some(t) = code.treatment() else {
        return Err(ActiveError::InvalidCode("linear has no learner".into()));
    };
    if features.len() != state.n_studies() {
        return Err(ActiveError::SizeMismatch {
            rows: features.len(),
            studies: state.n_studies(),
        });
    }
    let n_r = state.n_relevant();
    let n_i = state.n_irrelevant();
    if n_r == 0 || n_i == 0 {
        return Err(SvmError::SingleClass.into());
    }

    let mut ids: Vec<usize> = Vec::with_capacity(n_r + n_i);
    ids.extend_from_slice(&state.relevant);
    ids.extend_from_slice(&state.irrelevant);
    let mut labels = vec![Relevance::Relevant; n_r];
    labels.resize(n_r + n_i, Relevance::Irrelevant);

    let weighted = matches!(t.balance, Balance::Weighting | Balance::Mixed);
    let weights = if weighted {
        Some(balanced_weights(n_r, n_i)?)
    } else {
        None
    };
    let model = svm.train_on(features, &ids, &labels, weights, seed)?;

    let undersample = matches!(t.balance, Balance::Aggressive | Balance::Mixed) && !not_stable(state, config);
    if !undersample {
        return Ok(TrainOutcome {
            model,
            training_size: ids.len(),
            undersampled: false,
        });
    }

    // keep the irrelevant examples furthest on the irrelevant side
    let scores = model.decision_for(features, &state.irrelevant)?;
    let mut order: Vec<usize> = (0..n_i).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then(state.irrelevant[a].cmp(&state.irrelevant[b]))
    });
    let keep = n_r.min(n_i);
    let mut kept: Vec<usize> = order[..keep].iter().map(|&k| state.irrelevant[k]).collect();
    kept.sort_unstable();

    let mut ids: Vec<usize> = state.relevant.clone();
    ids.extend_from_slice(&kept);
    let mut labels = vec![Relevance::Relevant; n_r];
    labels.resize(n_r + keep, Relevance::Irrelevant);
    let model = svm.train_on(features, &ids, &labels, None, seed)?;
    Ok(TrainOutcome {
        model,
        training_size: ids.len(),
        undersampled: true,
    })
}

/// Phase the next query will use, given the current state and model.
pub fn query_phase(code: TreatmentCode, state: &ReviewState, config: &TreatmentConfig) -> Phase {
    let Some(t) = code.treatment() else {
        return Phase::Random;
    };
    if !learner_started(code, state, config) || state.model.is_none() {
        return Phase::Random;
    }
    if t.query == QueryRule::Uncertainty && not_stable(state, config) {
        Phase::Uncertainty
    } else {
        Phase::Certainty
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub ids: Vec<usize>,
    pub phase: Phase,
}

/// Picks up to `batch` unlabeled studies with the current model.
pub fn query_next(
    code: TreatmentCode,
    state: &mut ReviewState,
    features: &FeatureMatrix,
    config: &TreatmentConfig,
    batch: usize,
) -> Result<Query, ActiveError> {
    if state.unlabeled.is_empty() {
        return Err(ActiveError::Exhausted);
    }
    let phase = query_phase(code, state, config);
    let model = match (phase, &state.model) {
        (Phase::Random, _) | (_, None) => {
            return Ok(Query {
                ids: state.sample_random(batch),
                phase: Phase::Random,
            })
        }
        (_, Some(m)) => m,
    };
    if features.len() != state.n_studies() {
        return Err(ActiveError::SizeMismatch {
            rows: features.len(),
            studies: state.n_studies(),
        });
    }
    let scores = model.decision_for(features, &state.unlabeled)?;
    let ids = rank_by_scores(&state.unlabeled, &scores, phase, batch);
    Ok(Query { ids, phase })
}

/// Orders `ids` (ascending) by the rule for `phase` and keeps the first
/// `batch`. Equal keys keep ascending id order.
pub fn rank_by_scores(ids: &[usize], scores: &[f64], phase: Phase, batch: usize) -> Vec<usize> {
    let key = |s: f64| match phase {
        Phase::Uncertainty => s.abs(),
        _ => -s,
    };
    let batch = batch.min(ids.len());
    if batch == 1 {
        let mut best = 0;
        for k in 1..ids.len() {
            if key(scores[k]) < key(scores[best]) {
                best = k;
            }
        }
        return vec![ids[best]];
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| key(scores[a]).total_cmp(&key(scores[b])).then(ids[a].cmp(&ids[b])));
    order.truncate(batch);
    order.into_iter().map(|k| ids[k]).collect()
}

/// What happened in one learner step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub query: Query,
    /// Size of the final training set when the model was refit.
    pub trained: Option<usize>,
    pub undersampled: bool,
}

/// Runs the learner side of one review round: refit if the treatment calls
/// for it, then query.
#[derive(Debug, Clone, Copy)]
pub struct Learner {
    pub code: TreatmentCode,
    pub config: TreatmentConfig,
    pub svm: SvmTrainer,
}

impl Learner {
    pub fn new(code: TreatmentCode, config: TreatmentConfig) -> Self {
        Learner {
            code,
            config,
            svm: SvmTrainer::default(),
        }
    }

    pub fn step(
        &self,
        state: &mut ReviewState,
        features: &FeatureMatrix,
        batch: usize,
    ) -> Result<StepReport, ActiveError> {
        let mut trained = None;
        let mut undersampled = false;
        if learner_started(self.code, state, &self.config) && should_retrain(self.code, state, &self.config) {
            match train_step(self.code, state, features, &self.config, &self.svm, state.train_seed()) {
                Ok(out) => {
                    trained = Some(out.training_size);
                    undersampled = out.undersampled;
                    state.model = Some(out.model);
                }
                // no irrelevant examples yet: keep sampling at random
                Err(ActiveError::Svm(SvmError::SingleClass)) => {}
                Err(e) => return Err(e),
            }
        }
        let query = query_next(self.code, state, features, &self.config, batch)?;
        Ok(StepReport {
            query,
            trained,
            undersampled,
        })
    }
}
