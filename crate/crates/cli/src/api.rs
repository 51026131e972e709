//! HTTP JSON API over problems, analyses and negotiation sessions.
//!
//! Problems and reports are immutable once stored and are shared through
//! `Arc`. Each session sits behind its own mutex, so mutations of one session
//! are applied one at a time while other sessions proceed independently.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use reqsel_core::clustering::{Algorithm, Linkage};
use reqsel_core::session::SessionView;
use reqsel_core::{
    load_problem, run_pipeline, Change, Error, Format, NegotiationSession, PipelineOptions, PipelineReport,
    ProblemInstance, Warning,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    problems: RwLock<HashMap<String, Arc<StoredProblem>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<StoredSession>>>>,
    next_problem: AtomicU64,
    next_session: AtomicU64,
    defaults: PipelineOptions,
    snapshot_dir: Option<PathBuf>,
}

struct StoredProblem {
    problem: Arc<ProblemInstance>,
    warnings: Vec<Warning>,
    report: RwLock<Option<Arc<PipelineReport>>>,
}

struct StoredSession {
    problem_id: String,
    session: NegotiationSession,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SessionSnapshot {
    problem_id: String,
    session: SessionView,
}

impl AppState {
    pub fn new(defaults: PipelineOptions, snapshot_dir: Option<PathBuf>) -> Self {
        AppState {
            inner: Arc::new(Inner {
                problems: RwLock::default(),
                sessions: RwLock::default(),
                next_problem: AtomicU64::new(1),
                next_session: AtomicU64::new(1),
                defaults,
                snapshot_dir,
            }),
        }
    }

    /// Registers an already-loaded problem and returns its id.
    pub fn add_problem(&self, problem: ProblemInstance, warnings: Vec<Warning>) -> String {
        let id = format!("p{}", self.inner.next_problem.fetch_add(1, Ordering::SeqCst));
        self.insert_problem(id.clone(), problem, warnings);
        id
    }

    fn insert_problem(&self, id: String, problem: ProblemInstance, warnings: Vec<Warning>) {
        if let Some(dir) = &self.inner.snapshot_dir {
            if let Err(e) = write_snapshot(&dir.join("problems").join(format!("{id}.json")), &problem.to_json()) {
                eprintln!("warning: could not snapshot problem {id}: {e}");
            }
        }
        let stored = StoredProblem {
            problem: Arc::new(problem),
            warnings,
            report: RwLock::new(None),
        };
        self.inner.problems.write().expect("lock").insert(id, Arc::new(stored));
    }

    /// Reloads problems and sessions written by an earlier run. Returns the
    /// number of each restored.
    pub fn restore_snapshots(&self) -> Result<(usize, usize), Error> {
        let Some(dir) = self.inner.snapshot_dir.clone() else {
            return Ok((0, 0));
        };
        let mut problems = 0;
        for (id, bytes) in read_snapshots(&dir.join("problems"))? {
            let loaded = load_problem(&bytes, Format::Json)?;
            bump(&self.inner.next_problem, &id, 'p');
            self.inner.problems.write().expect("lock").insert(
                id,
                Arc::new(StoredProblem {
                    problem: Arc::new(loaded.problem),
                    warnings: loaded.warnings,
                    report: RwLock::new(None),
                }),
            );
            problems += 1;
        }
        let mut sessions = 0;
        for (id, bytes) in read_snapshots(&dir.join("sessions"))? {
            let snap: SessionSnapshot =
                serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("session {id}: {e}")))?;
            let Some(problem) = self.problem(&snap.problem_id) else {
                eprintln!(
                    "warning: session {id} refers to unknown problem {}; skipped",
                    snap.problem_id
                );
                continue;
            };
            let session = NegotiationSession::restore(problem.problem.clone(), snap.session)?;
            bump(&self.inner.next_session, &id, 's');
            self.inner.sessions.write().expect("lock").insert(
                id,
                Arc::new(Mutex::new(StoredSession {
                    problem_id: snap.problem_id,
                    session,
                })),
            );
            sessions += 1;
        }
        Ok((problems, sessions))
    }

    fn problem(&self, id: &str) -> Option<Arc<StoredProblem>> {
        self.inner.problems.read().expect("lock").get(id).cloned()
    }

    fn session(&self, id: &str) -> Option<Arc<Mutex<StoredSession>>> {
        self.inner.sessions.read().expect("lock").get(id).cloned()
    }

    fn snapshot_session(&self, id: &str, stored: &StoredSession) {
        let Some(dir) = &self.inner.snapshot_dir else { return };
        let snap = SessionSnapshot {
            problem_id: stored.problem_id.clone(),
            session: stored.session.view(),
        };
        let body = serde_json::to_string_pretty(&snap).expect("session view serializes");
        if let Err(e) = write_snapshot(&dir.join("sessions").join(format!("{id}.json")), &body) {
            eprintln!("warning: could not snapshot session {id}: {e}");
        }
    }
}

fn bump(counter: &AtomicU64, id: &str, prefix: char) {
    if let Some(n) = id.strip_prefix(prefix).and_then(|s| s.parse::<u64>().ok()) {
        counter.fetch_max(n + 1, Ordering::SeqCst);
    }
}

fn write_snapshot(path: &Path, body: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    // write then rename so a crash never leaves half a snapshot
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, body)?;
    std::fs::rename(tmp, path)
}

fn read_snapshots(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, Error> {
    let io = |e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            let bytes = std::fs::read(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            out.push((id, bytes));
        }
    }
    out.sort();
    Ok(out)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/problems", post(create_problem))
        .route("/problems/{id}", get(get_problem))
        .route("/problems/{id}/analyze", post(analyze))
        .route("/problems/{id}/report", get(get_report))
        .route("/problems/{id}/sessions", post(create_session))
        .route("/sessions/{sid}", get(get_session).patch(patch_session))
        .route("/sessions/{sid}/plan", get(get_plan))
        .with_state(state)
}

/// A 4xx/5xx response with body `{"error": {"kind", "message", ...}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    extra: serde_json::Map<String, serde_json::Value>,
}

impl ApiError {
    fn not_found(what: &str, id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            kind: "not_found",
            message: format!("no {what} with id `{id}`"),
            extra: Default::default(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let mut extra = serde_json::Map::new();
        let (status, kind) = match e.root() {
            Error::Parse(_) => (StatusCode::BAD_REQUEST, "parse"),
            Error::Validation { subject, .. } => {
                extra.insert("subject".into(), json!(subject));
                (StatusCode::UNPROCESSABLE_ENTITY, "validation")
            }
            Error::DegenerateInput(_) => (StatusCode::UNPROCESSABLE_ENTITY, "degenerate_input"),
            Error::InvalidArgument(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_argument"),
            Error::UnknownId(id) => {
                extra.insert("id".into(), json!(id));
                (StatusCode::UNPROCESSABLE_ENTITY, "unknown_id")
            }
            Error::StaleRevision { expected, actual } => {
                extra.insert("expectedRevision".into(), json!(expected));
                extra.insert("revision".into(), json!(actual));
                (StatusCode::CONFLICT, "stale_revision")
            }
            Error::Io { .. } | Error::Stage { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            kind,
            message: e.to_string(),
            extra,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = self.extra;
        body.insert("kind".into(), json!(self.kind));
        body.insert("message".into(), json!(self.message));
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: serde::de::DeserializeOwned + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| Error::Parse(e.to_string()).into())
}

async fn create_problem(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let loaded = load_problem(&body, Format::Json)?;
    let n = loaded.problem.len();
    let warnings = loaded.warnings.clone();
    let id = state.add_problem(loaded.problem, loaded.warnings);
    let location = format!("/problems/{id}");
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, location)],
        Json(json!({ "id": id, "requirements": n, "warnings": warnings })),
    )
        .into_response())
}

async fn get_problem(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let stored = state.problem(&id).ok_or_else(|| ApiError::not_found("problem", &id))?;
    let mut body = serde_json::to_value(stored.problem.to_file()).expect("problem file serializes");
    body["id"] = json!(id);
    body["warnings"] = json!(stored.warnings);
    Ok(Json(body).into_response())
}

/// Overrides accepted by `POST /problems/{id}/analyze`; omitted fields keep
/// the server defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub k: Option<KChoiceBody>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub linkage: Option<Linkage>,
    #[serde(rename = "connectivityL")]
    pub connectivity_l: Option<usize>,
    #[serde(rename = "gapB")]
    pub gap_b: Option<usize>,
    pub seed: Option<u64>,
}

/// `"auto"` or an integer.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum KChoiceBody {
    Fixed(usize),
    Named(String),
}

impl AnalyzeRequest {
    fn options(self, defaults: &PipelineOptions) -> Result<PipelineOptions, Error> {
        let mut o = defaults.clone();
        if let Some(k) = self.k {
            o.k = match k {
                KChoiceBody::Fixed(k) => k.to_string().parse()?,
                KChoiceBody::Named(s) => s.parse()?,
            };
        }
        if let Some(a) = self.algorithms {
            o.algorithms = a;
        }
        if let Some(l) = self.linkage {
            o.linkage = l;
        }
        if let Some(l) = self.connectivity_l {
            o.connectivity_l = l;
        }
        if let Some(b) = self.gap_b {
            o.gap_b = b;
        }
        if let Some(s) = self.seed {
            o.seed = s;
        }
        Ok(o)
    }
}

async fn run_analysis(stored: Arc<StoredProblem>, options: PipelineOptions) -> ApiResult<Arc<PipelineReport>> {
    let problem = stored.problem.clone();
    let report = tokio::task::spawn_blocking(move || run_pipeline(&problem, &options))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            kind: "internal",
            message: format!("analysis task failed: {e}"),
            extra: Default::default(),
        })??;
    let report = Arc::new(report);
    *stored.report.write().expect("lock") = Some(report.clone());
    Ok(report)
}

async fn analyze(State(state): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult<Response> {
    let stored = state.problem(&id).ok_or_else(|| ApiError::not_found("problem", &id))?;
    let request: AnalyzeRequest = parse_body(&body)?;
    let options = request.options(&state.inner.defaults)?;
    let report = run_analysis(stored, options).await?;
    Ok(Json(&*report).into_response())
}

async fn get_report(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let stored = state.problem(&id).ok_or_else(|| ApiError::not_found("problem", &id))?;
    let report = stored.report.read().expect("lock").clone();
    match report {
        Some(r) => Ok(Json(&*r).into_response()),
        None => Err(ApiError::not_found("report for problem", &id)),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SessionRequest {
    /// Which analysed k provides the base plan; the MoSCoW k by default.
    k: Option<usize>,
}

fn session_body(id: &str, problem_id: &str, session: &NegotiationSession) -> serde_json::Value {
    let mut body = serde_json::to_value(session.view()).expect("session view serializes");
    body["sessionId"] = json!(id);
    body["problemId"] = json!(problem_id);
    body
}

async fn create_session(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let stored = state.problem(&id).ok_or_else(|| ApiError::not_found("problem", &id))?;
    let request: SessionRequest = parse_body(&body)?;
    let existing = stored.report.read().expect("lock").clone();
    let report = match existing {
        Some(r) => r,
        None => run_analysis(stored.clone(), state.inner.defaults.clone()).await?,
    };
    let analysis = match request.k {
        Some(k) => report
            .analysis(k)
            .ok_or_else(|| Error::InvalidArgument(format!("k = {k} was not analysed")))?,
        None => report.moscow(),
    };
    let session = NegotiationSession::new(stored.problem.clone(), analysis.plan.clone())?;
    let sid = format!("s{}", state.inner.next_session.fetch_add(1, Ordering::SeqCst));
    let body = session_body(&sid, &id, &session);
    let entry = StoredSession {
        problem_id: id,
        session,
    };
    state.snapshot_session(&sid, &entry);
    state
        .inner
        .sessions
        .write()
        .expect("lock")
        .insert(sid.clone(), Arc::new(Mutex::new(entry)));
    Ok((
        StatusCode::CREATED,
        [(header::LOCATION, format!("/sessions/{sid}"))],
        Json(body),
    )
        .into_response())
}

async fn get_session(State(state): State<AppState>, UrlPath(sid): UrlPath<String>) -> ApiResult<Response> {
    let s = state
        .session(&sid)
        .ok_or_else(|| ApiError::not_found("session", &sid))?;
    let s = s.lock().await;
    Ok(Json(session_body(&sid, &s.problem_id, &s.session)).into_response())
}

async fn patch_session(
    State(state): State<AppState>,
    UrlPath(sid): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let s = state
        .session(&sid)
        .ok_or_else(|| ApiError::not_found("session", &sid))?;
    let change: Change = serde_json::from_slice(&body)
        .map_err(|e| Error::Parse(format!("expected {{toggle, expectedRevision}} or {{budget}}: {e}")))?;
    let mut s = s.lock().await;
    s.session.apply(&change)?;
    state.snapshot_session(&sid, &s);
    Ok(Json(session_body(&sid, &s.problem_id, &s.session)).into_response())
}

async fn get_plan(State(state): State<AppState>, UrlPath(sid): UrlPath<String>) -> ApiResult<Response> {
    let s = state
        .session(&sid)
        .ok_or_else(|| ApiError::not_found("session", &sid))?;
    let s = s.lock().await;
    Ok(Json(s.session.plan()).into_response())
}
