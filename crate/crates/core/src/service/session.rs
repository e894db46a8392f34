//! One live review: a corpus snapshot, its journal, and the learner state
//! rebuilt from that journal.
//!
//! Everything a client can observe is a function of the journal: the
//! sampler is reseeded from the session seed and the number of submits
//! before each selection, and the model is refit from the labels at that
//! point. Recovery is therefore plain replay.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::journal::{now_millis, Entry, Journal, LabelEvent};
use super::ServiceError;
use crate::active::{
    enough, not_stable, should_retrain, train_step, ActiveError, Learner, Phase, ReviewState, TreatmentCode,
    TreatmentConfig,
};
use crate::corpus::{Code, Corpus, Relevance};
use crate::features::{FeatureError, FeatureMatrix, TfidfVectorizer};
use crate::svm::SvmError;

/// Studies served per batch.
pub const BATCH_SIZE: usize = 10;

const CORPUS_FILE: &str = "corpus.csv";
const META_FILE: &str = "meta.json";
const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub name: String,
    pub treatment: TreatmentCode,
    pub seed: u64,
    pub created_ms: u64,
}

/// Relevant found, studies coded, candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub found: usize,
    pub coded: usize,
    pub total: usize,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Documents Coded: {} / {} ({})", self.found, self.coded, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub phase: Phase,
    pub ids: Vec<usize>,
}

#[derive(Debug)]
pub struct Session {
    id: String,
    dir: PathBuf,
    meta: SessionMeta,
    corpus: Corpus,
    features: FeatureMatrix,
    learner: Learner,
    state: ReviewState,
    journal: Journal,
    entries: Vec<Entry>,
    curve: Vec<(usize, usize)>,
    served: Option<Batch>,
    /// Entries applied when the state was last not stable.
    last_unstable: usize,
    /// Entry count the current model was fit at.
    model_prefix: Option<usize>,
}

fn sampler_seed(seed: u64, submits: usize) -> u64 {
    seed ^ (submits as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn relevance(code: Code) -> Option<Relevance> {
    match code {
        Code::Yes => Some(Relevance::Relevant),
        Code::No => Some(Relevance::Irrelevant),
        Code::Undetermined => None,
    }
}

fn featurize(corpus: &Corpus) -> Result<FeatureMatrix, ServiceError> {
    match TfidfVectorizer::default().fit_transform(corpus) {
        Ok((_, m)) => Ok(m),
        Err(FeatureError::EmptyVocabulary) => {
            tracing::warn!("corpus {:?} has no usable terms; ranking will fall back to id order", corpus.name);
            Ok(FeatureMatrix::new(vec![Default::default(); corpus.len()], 0))
        }
        Err(e) => Err(e.into()),
    }
}

impl Session {
    /// Writes a new session directory under `sessions_dir` and opens it.
    pub fn create(
        sessions_dir: &Path,
        id: &str,
        mut corpus: Corpus,
        treatment: TreatmentCode,
        seed: u64,
        config: TreatmentConfig,
    ) -> Result<Session, ServiceError> {
        corpus.reset_codes();
        let dir = sessions_dir.join(id);
        std::fs::create_dir_all(&dir)?;
        corpus.export_csv(dir.join(CORPUS_FILE))?;
        let meta = SessionMeta {
            name: corpus.name.clone(),
            treatment,
            seed,
            created_ms: now_millis(),
        };
        let meta_json = serde_json::to_vec_pretty(&meta).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(META_FILE), meta_json)?;
        Self::open(&dir, config)
    }

    /// Loads a session directory and replays its journal.
    pub fn open(dir: &Path, config: TreatmentConfig) -> Result<Session, ServiceError> {
        let id = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let meta: SessionMeta = serde_json::from_slice(&std::fs::read(dir.join(META_FILE))?)
            .map_err(|e| ServiceError::Corrupt(format!("{}: {e}", dir.join(META_FILE).display())))?;
        let mut corpus = Corpus::load_csv(dir.join(CORPUS_FILE))?;
        corpus.name = meta.name.clone();
        corpus.reset_codes();
        let features = featurize(&corpus)?;
        let (journal, entries) = Journal::open(dir.join(JOURNAL_FILE))?;

        let mut session = Session {
            id,
            dir: dir.to_path_buf(),
            state: ReviewState::new(corpus.len(), meta.seed),
            learner: Learner::new(meta.treatment, config),
            meta,
            corpus,
            features,
            journal,
            entries: Vec::with_capacity(entries.len()),
            curve: Vec::new(),
            served: None,
            last_unstable: 0,
            model_prefix: None,
        };
        for entry in entries {
            session.validate(&entry.labels, false).map_err(|e| {
                ServiceError::Corrupt(format!("journal entry {} of session {}: {e}", entry.seq, session.id))
            })?;
            session.apply(entry);
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn state(&self) -> &ReviewState {
        &self.state
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn status(&self) -> Status {
        Status {
            found: self.state.n_relevant(),
            coded: self.state.n_labeled(),
            total: self.corpus.len(),
        }
    }

    /// `(coded, found)` after every submitted batch.
    pub fn curve(&self) -> &[(usize, usize)] {
        &self.curve
    }

    /// The batch to review next. Repeated calls without a submit in
    /// between return the same batch.
    pub fn next_batch(&mut self) -> Result<Batch, ServiceError> {
        if let Some(b) = &self.served {
            return Ok(b.clone());
        }
        if self.state.unlabeled().is_empty() {
            return Err(ServiceError::Exhausted);
        }
        let code = self.meta.treatment;
        let config = self.learner.config;
        let refit = code.treatment().is_some() && should_retrain(code, &self.state, &config);
        if refit {
            self.state.model = None;
        } else if code.treatment().is_some() {
            self.ensure_frozen_model()?;
        }
        self.state.reseed_sampler(sampler_seed(self.meta.seed, self.entries.len()));
        let step = self.learner.step(&mut self.state, &self.features, BATCH_SIZE)?;
        if refit {
            self.model_prefix = Some(self.entries.len());
        }
        let batch = Batch {
            phase: step.query.phase,
            ids: step.query.ids,
        };
        self.served = Some(batch.clone());
        Ok(batch)
    }

    /// A learner that stopped retraining keeps the model fit at the last
    /// point the review was not yet stable.
    fn ensure_frozen_model(&mut self) -> Result<(), ServiceError> {
        let k = self.last_unstable;
        if self.model_prefix == Some(k) {
            return Ok(());
        }
        let mut past = ReviewState::new(self.corpus.len(), self.meta.seed);
        for entry in &self.entries[..k] {
            for l in &entry.labels {
                past.set_label(l.id, relevance(l.code).expect("validated code"))?;
            }
        }
        let code = self.meta.treatment;
        let config = self.learner.config;
        let started = enough(code, &config).is_some_and(|e| past.n_relevant() >= e);
        self.state.model = None;
        if started {
            match train_step(code, &past, &self.features, &config, &self.learner.svm, past.train_seed()) {
                Ok(out) => self.state.model = Some(out.model),
                Err(ActiveError::Svm(SvmError::SingleClass)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.model_prefix = Some(k);
        Ok(())
    }

    fn validate(&self, labels: &[LabelEvent], require_served: bool) -> Result<(), ServiceError> {
        let served: HashSet<usize> = self.served.iter().flat_map(|b| b.ids.iter().copied()).collect();
        let mut seen = HashSet::new();
        for l in labels {
            if l.id >= self.corpus.len() {
                return Err(ServiceError::UnknownStudy(l.id));
            }
            if relevance(l.code).is_none() {
                return Err(ServiceError::InvalidCode { id: l.id, code: l.code.to_string() });
            }
            if !seen.insert(l.id) {
                return Err(ServiceError::DuplicateStudy(l.id));
            }
            if require_served && self.state.label_of(l.id).is_none() && !served.contains(&l.id) {
                return Err(ServiceError::NotServed(l.id));
            }
        }
        Ok(())
    }

    fn apply(&mut self, entry: Entry) {
        for l in &entry.labels {
            let r = relevance(l.code).expect("validated code");
            self.state.set_label(l.id, r).expect("validated id");
            self.corpus.studies[l.id].code = l.code;
        }
        self.entries.push(entry);
        self.curve.push((self.state.n_labeled(), self.state.n_relevant()));
        if not_stable(&self.state, &self.learner.config) {
            self.last_unstable = self.entries.len();
        }
        self.served = None;
    }

    /// Records codes for served (or previously coded) studies. The journal
    /// entry is on disk before the state changes; an empty submit is a
    /// no-op.
    pub fn submit(&mut self, labels: Vec<LabelEvent>) -> Result<Status, ServiceError> {
        if labels.is_empty() {
            return Ok(self.status());
        }
        let needs_batch = labels.iter().any(|l| l.id < self.corpus.len() && self.state.label_of(l.id).is_none());
        if needs_batch && self.served.is_none() && !self.state.unlabeled().is_empty() {
            // e.g. first submit after recovery: the batch is reproducible
            self.next_batch()?;
        }
        self.validate(&labels, true)?;
        let entry = Entry {
            seq: self.entries.len() as u64 + 1,
            labels,
            ts: now_millis(),
        };
        self.journal.append(&entry)?;
        self.apply(entry);
        Ok(self.status())
    }

    /// Discards every code.
    pub fn restart(&mut self) -> Result<Status, ServiceError> {
        self.journal.truncate()?;
        self.entries.clear();
        self.curve.clear();
        self.corpus.reset_codes();
        self.state = ReviewState::new(self.corpus.len(), self.meta.seed);
        self.served = None;
        self.last_unstable = 0;
        self.model_prefix = None;
        Ok(self.status())
    }

    pub fn export_csv(&self) -> Result<String, ServiceError> {
        Ok(self.corpus.to_csv_string()?)
    }

    /// Scores from the model behind the last served batch, if it used one.
    pub fn decision_scores(&self, ids: &[usize]) -> Option<Vec<f64>> {
        let model = self.state.model.as_ref()?;
        model.decision_for(&self.features, ids).ok()
    }
}
