use std::collections::BTreeMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::{lock, LabelEvent, ServiceError, Session, SessionStore, Status};
use crate::active::{Phase, TreatmentCode};
use crate::corpus::{Code, Corpus, CorpusError};

const MAX_UPLOAD: usize = 256 * 1024 * 1024;

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ServiceError::SessionNotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::UnknownStudy(_) => (StatusCode::BAD_REQUEST, "unknown_study"),
            ServiceError::NotServed(_) => (StatusCode::BAD_REQUEST, "not_served"),
            ServiceError::DuplicateStudy(_) => (StatusCode::BAD_REQUEST, "duplicate_study"),
            ServiceError::InvalidCode { .. } => (StatusCode::BAD_REQUEST, "invalid_code"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::Corpus(CorpusError::Io(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
            ServiceError::Corpus(_) => (StatusCode::BAD_REQUEST, "invalid_corpus"),
            ServiceError::Exhausted => (StatusCode::CONFLICT, "exhausted"),
            ServiceError::Active(_) | ServiceError::Features(_) => (StatusCode::UNPROCESSABLE_ENTITY, "review_error"),
            ServiceError::Corrupt(_) => (StatusCode::INTERNAL_SERVER_ERROR, "corrupt"),
            ServiceError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        if status.is_server_error() {
            tracing::error!("{self}");
        }
        let body = ErrorBody {
            error: kind.to_string(),
            detail: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize)]
struct StatusView {
    found: usize,
    coded: usize,
    total: usize,
    text: String,
}

impl From<Status> for StatusView {
    fn from(s: Status) -> Self {
        StatusView {
            found: s.found,
            coded: s.coded,
            total: s.total,
            text: s.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SessionView {
    id: String,
    name: String,
    treatment: TreatmentCode,
    status: StatusView,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            id: s.id().to_string(),
            name: s.meta().name.clone(),
            treatment: s.meta().treatment,
            status: s.status().into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct StudyView {
    id: usize,
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: String,
    year: Option<i32>,
    pdf_link: String,
    code: Code,
}

#[derive(Debug, Serialize)]
struct BatchView {
    phase: Phase,
    studies: Vec<StudyView>,
    status: StatusView,
}

#[derive(Debug, Default, Deserialize)]
struct CreateParams {
    csv: Option<String>,
    workspace: Option<String>,
    name: Option<String>,
    treatment: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LabelsField {
    Map(BTreeMap<String, String>),
    List(Vec<LabelItem>),
}

#[derive(Debug, Deserialize)]
struct LabelItem {
    id: usize,
    code: String,
}

#[derive(Debug, Deserialize)]
struct LabelsBody {
    labels: LabelsField,
}

type Store = Arc<SessionStore>;

/// Runs blocking session work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
}

async fn with_session<T, F>(store: Store, id: String, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ServiceError> + Send + 'static,
{
    blocking(move || {
        let handle = store.get(&id)?;
        let mut session = lock(&handle);
        f(&mut session)
    })
    .await
}

fn parse_code(id: usize, raw: &str) -> Result<Code, ServiceError> {
    let code = match raw.trim().to_ascii_lowercase().as_str() {
        "relevant" => Code::Yes,
        "irrelevant" => Code::No,
        other => other.parse().map_err(|_| ServiceError::InvalidCode {
            id,
            code: raw.to_string(),
        })?,
    };
    if !code.is_coded() {
        return Err(ServiceError::InvalidCode {
            id,
            code: raw.to_string(),
        });
    }
    Ok(code)
}

async fn create_session(
    State(store): State<Store>,
    Query(query): Query<CreateParams>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<impl IntoResponse, ServiceError> {
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv"));
    let params = if is_csv {
        CreateParams {
            csv: Some(String::from_utf8(body.to_vec()).map_err(|_| ServiceError::BadRequest("upload is not UTF-8".into()))?),
            ..query
        }
    } else if body.is_empty() {
        query
    } else {
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(e.to_string()))?
    };
    let treatment = match params.treatment.as_deref() {
        None | Some("") => TreatmentCode::FASTREAD,
        Some(t) => t
            .parse()
            .map_err(|e: crate::active::ActiveError| ServiceError::BadRequest(e.to_string()))?,
    };
    let view = blocking(move || {
        let mut corpus = match (params.csv, params.workspace) {
            (Some(csv), None) => Corpus::from_reader(params.name.clone().unwrap_or_else(|| "upload".into()), csv.as_bytes())?,
            (None, Some(name)) => store.load_named_corpus(&name)?,
            _ => {
                return Err(ServiceError::BadRequest(
                    "provide exactly one of \"csv\" or \"workspace\"".into(),
                ))
            }
        };
        if let Some(name) = params.name {
            corpus.name = name;
        }
        let handle = store.create(corpus, treatment, params.seed)?;
        let session = lock(&handle);
        tracing::info!(id = session.id(), name = %session.meta().name, "created session");
        Ok(SessionView::from(&*session))
    })
    .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn list_sessions(State(store): State<Store>) -> Result<impl IntoResponse, ServiceError> {
    let list = blocking(move || Ok(store.list())).await?;
    Ok(Json(list))
}

async fn get_session(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    with_session(store, id, |s| Ok(Json(SessionView::from(&*s)))).await
}

async fn next_batch(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    with_session(store, id, |s| {
        let batch = s.next_batch()?;
        let studies = batch
            .ids
            .iter()
            .map(|&i| {
                let st = &s.corpus().studies[i];
                StudyView {
                    id: st.id,
                    title: st.title.clone(),
                    abstract_text: st.abstract_text.clone(),
                    year: st.year,
                    pdf_link: st.pdf_link.clone(),
                    code: st.code,
                }
            })
            .collect();
        Ok(Json(BatchView {
            phase: batch.phase,
            studies,
            status: s.status().into(),
        }))
    })
    .await
}

async fn submit_labels(
    State(store): State<Store>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ServiceError> {
    let body: LabelsBody = serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let labels = match body.labels {
        LabelsField::Map(m) => m
            .into_iter()
            .map(|(k, v)| {
                let id: usize = k
                    .trim()
                    .parse()
                    .map_err(|_| ServiceError::BadRequest(format!("study id {k:?} is not a number")))?;
                Ok(LabelEvent { id, code: parse_code(id, &v)? })
            })
            .collect::<Result<Vec<_>, ServiceError>>()?,
        LabelsField::List(items) => items
            .into_iter()
            .map(|it| Ok(LabelEvent { id: it.id, code: parse_code(it.id, &it.code)? }))
            .collect::<Result<Vec<_>, ServiceError>>()?,
    };
    with_session(store, id, move |s| Ok(Json(StatusView::from(s.submit(labels)?)))).await
}

async fn status(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    with_session(store, id, |s| Ok(Json(StatusView::from(s.status())))).await
}

async fn curve(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    with_session(store, id, |s| Ok(Json(s.curve().to_vec()))).await
}

async fn export(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let (name, csv) = with_session(store, id, |s| Ok((s.meta().name.clone(), s.export_csv()?))).await?;
    let file: String = name
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{file}_coded.csv\"")),
        ],
        csv,
    ))
}

async fn restart(State(store): State<Store>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    with_session(store, id, |s| Ok(Json(StatusView::from(s.restart()?)))).await
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({ "ok": true }))
}

/// The REST API, with `static_dir` (if any) served for every other path.
pub fn router(store: Arc<SessionStore>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/batch", get(next_batch))
        .route("/sessions/{id}/labels", post(submit_labels))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/curve", get(curve))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/restart", post(restart))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(store);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir).append_index_html_on_directories(true)),
        None => api,
    }
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    store: Arc<SessionStore>,
    static_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(store, static_dir))
        .with_graceful_shutdown(shutdown)
        .await
}
