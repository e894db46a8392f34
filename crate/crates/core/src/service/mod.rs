//! Live review sessions persisted under a workspace directory, and the HTTP
//! API over them.
//!
//! Layout: `<workspace>/sessions/<id>/{corpus.csv, meta.json, journal.jsonl}`.
//! Named input corpora are read from `<workspace>/data/`.

mod http;
pub mod journal;
mod session;

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::Serialize;
use thiserror::Error;

use crate::active::{ActiveError, TreatmentCode, TreatmentConfig};
use crate::corpus::{Corpus, CorpusError};
use crate::features::FeatureError;

pub use http::{router, serve, ErrorBody};
pub use journal::{Entry, LabelEvent};
pub use session::{Batch, Session, SessionMeta, Status, BATCH_SIZE};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no session {0:?}")]
    SessionNotFound(String),
    #[error("study {0} does not exist")]
    UnknownStudy(usize),
    #[error("study {0} was not served and is not coded")]
    NotServed(usize),
    #[error("study {0} appears more than once")]
    DuplicateStudy(usize),
    #[error("study {id}: code must be yes or no, got {code:?}")]
    InvalidCode { id: usize, code: String },
    #[error("every study has been coded")]
    Exhausted,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("corrupt session data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub name: String,
    pub treatment: TreatmentCode,
    pub status: Status,
}

/// All sessions of one workspace. Each session has its own lock, so work on
/// one never waits for another.
#[derive(Debug)]
pub struct SessionStore {
    workspace: PathBuf,
    config: TreatmentConfig,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

pub fn lock(session: &Mutex<Session>) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|e| e.into_inner())
}

impl SessionStore {
    /// Opens the workspace, recovering every session found on disk.
    /// Sessions that fail to load are skipped with an error log.
    pub fn open(workspace: impl Into<PathBuf>, config: TreatmentConfig) -> Result<SessionStore, ServiceError> {
        let workspace = workspace.into();
        let sessions_dir = workspace.join("sessions");
        std::fs::create_dir_all(&sessions_dir)?;
        let mut sessions = BTreeMap::new();
        for entry in std::fs::read_dir(&sessions_dir)? {
            let path = entry?.path();
            if !path.is_dir() {
                continue;
            }
            match Session::open(&path, config) {
                Ok(s) => {
                    tracing::info!(id = s.id(), coded = s.status().coded, "recovered session");
                    sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
                }
                Err(e) => tracing::error!("skipping session at {}: {e}", path.display()),
            }
        }
        Ok(SessionStore {
            workspace,
            config,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn workspace(&self) -> &Path {
        &self.workspace
    }

    pub fn create(
        &self,
        corpus: Corpus,
        treatment: TreatmentCode,
        seed: Option<u64>,
    ) -> Result<Arc<Mutex<Session>>, ServiceError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = seed.unwrap_or_else(rand::random);
        let session = Session::create(&self.workspace.join("sessions"), &id, corpus, treatment, seed, self.config)?;
        let handle = Arc::new(Mutex::new(session));
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id, handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::SessionNotFound(id.to_string()))
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let handles: Vec<_> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        handles
            .iter()
            .map(|h| {
                let s = lock(h);
                SessionSummary {
                    id: s.id().to_string(),
                    name: s.meta().name.clone(),
                    treatment: s.meta().treatment,
                    status: s.status(),
                }
            })
            .collect()
    }

    /// Loads `<workspace>/data/<name>` (`.csv` optional).
    pub fn load_named_corpus(&self, name: &str) -> Result<Corpus, ServiceError> {
        let plain = !name.is_empty()
            && !name.starts_with('.')
            && name.chars().all(|c| c.is_alphanumeric() || "._- ".contains(c));
        if !plain {
            return Err(ServiceError::BadRequest(format!("invalid corpus name {name:?}")));
        }
        let dir = self.workspace.join("data");
        let mut path = dir.join(name);
        if !path.exists() && !name.ends_with(".csv") {
            path = dir.join(format!("{name}.csv"));
        }
        if !path.exists() {
            return Err(ServiceError::BadRequest(format!("no corpus named {name:?} in {}", dir.display())));
        }
        Ok(Corpus::load_csv(path)?)
    }
}
