//! HTTP API over adaptation sessions, reference pools, tailoring, tasks,
//! validation and audits.

mod error;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qm_adapt::audit::{audit, diff_models, AdaptationDelta, AuditResult};
use qm_adapt::canonical::{content_hash, to_canonical_string};
use qm_adapt::engine::{Command, LogHeader, LogRecord, Operation, Session, Task};
use qm_adapt::goal::{goal_from_value, Ranking};
use qm_adapt::model::{validate, Purpose, Violation};
use qm_adapt::rational::{self, Rational};
use qm_adapt::store::{self, ModelPool};
use qm_adapt::tailor::{apply_tailoring, plan_tailoring, TailoringOptions, TailoringReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

pub use error::ApiError;

/// Where the service finds reference models and keeps session directories.
#[derive(Debug, Clone)]
pub struct Config {
    pub pool_dir: PathBuf,
    /// Sessions are persisted here after every accepted write; in memory
    /// only when absent.
    pub session_root: Option<PathBuf>,
}

const SESSION_INFO: &str = "session.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SessionInfo {
    reference_model_id: String,
}

struct Entry {
    session: Session,
    plan: TailoringReport,
    info: SessionInfo,
}

impl Entry {
    fn tailored(&self) -> bool {
        self.session.log().iter().any(|r| matches!(r.command, Command::Tailor { .. }))
    }
}

pub struct AppState {
    config: Config,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Entry>>>>,
    next_id: AtomicU64,
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionHandle {
    pub session_id: String,
    pub model_hash: String,
    pub revision: u64,
}

fn handle(id: &str, s: &Session) -> SessionHandle {
    SessionHandle { session_id: id.to_string(), model_hash: content_hash(s.model()), revision: s.revision() }
}

impl AppState {
    /// Opens the state, restoring every session found under the session root.
    pub fn open(config: Config) -> Result<Shared, ApiError> {
        let mut sessions = BTreeMap::new();
        let mut max_seq = 0;
        if let Some(root) = &config.session_root {
            fs::create_dir_all(root).map_err(|e| storage(root, e))?;
            for dir in fs::read_dir(root).map_err(|e| storage(root, e))? {
                let dir = dir.map_err(|e| storage(root, e))?.path();
                let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else { continue };
                if !dir.join(SESSION_INFO).exists() {
                    continue;
                }
                match restore(&dir) {
                    Ok(entry) => {
                        max_seq = max_seq.max(id.strip_prefix("s-").and_then(|n| n.parse().ok()).unwrap_or(0));
                        sessions.insert(id, Arc::new(Mutex::new(entry)));
                    }
                    Err(e) => log::warn!("cannot restore session {}: {}", dir.display(), e.message),
                }
            }
        }
        Ok(Arc::new(AppState { config, sessions: RwLock::new(sessions), next_id: AtomicU64::new(max_seq + 1) }))
    }

    fn pool(&self) -> ApiResult<ModelPool> {
        Ok(store::load_pool(&self.config.pool_dir)?)
    }

    fn entry(&self, id: &str) -> ApiResult<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session-not-found", id))
    }

    fn persist(&self, id: &str, entry: &Entry) -> ApiResult<()> {
        let Some(root) = &self.config.session_root else { return Ok(()) };
        let dir = root.join(id);
        store::persist_session(&entry.session, &dir)?;
        store::save_report(&entry.plan, dir.join(store::REPORT_FILE))?;
        let info = to_canonical_string(&entry.info);
        fs::write(dir.join(SESSION_INFO), info).map_err(|e| storage(&dir, e))
    }
}

fn storage(path: &Path, e: std::io::Error) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage", format!("{}: {e}", path.display()))
}

fn restore(dir: &Path) -> ApiResult<Entry> {
    let info_path = dir.join(SESSION_INFO);
    let text = fs::read_to_string(&info_path).map_err(|e| storage(&info_path, e))?;
    let info: SessionInfo = serde_json::from_str(&text).map_err(ApiError::malformed)?;
    let session = store::restore_session(dir)?;
    let plan = store::load_report(dir.join(store::REPORT_FILE))?;
    Ok(Entry { session, plan, info })
}

/// Parses a JSON body; an empty body reads as `null`.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"null" } else { bytes };
    serde_json::from_slice(bytes).map_err(ApiError::malformed)
}

fn check_revision(sent: Option<u64>, s: &Session) -> ApiResult<()> {
    match sent {
        Some(r) if r != s.revision() => Err(ApiError::stale(r, s.revision())),
        _ => Ok(()),
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/pool", get(get_pool))
        .route("/rank", post(post_rank))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/:id", get(get_session))
        .route("/sessions/:id/tailor", post(tailor))
        .route("/sessions/:id/model", get(get_model))
        .route("/sessions/:id/tasks", get(get_tasks))
        .route("/sessions/:id/validate", get(get_validate))
        .route("/sessions/:id/log", get(get_log))
        .route("/sessions/:id/operations", post(post_operations))
        .route("/sessions/:id/tasks/:tid/complete", post(complete_task))
        .route("/sessions/:id/tasks/:tid/waive", post(waive_task))
        .route("/sessions/:id/audit", post(post_audit))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "no-route", "no such endpoint") })
        .with_state(state)
}

/// Serves the API on `addr` until interrupted.
pub async fn serve(config: Config, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::open(config).map_err(|e| std::io::Error::other(e.message))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn get_pool(State(st): State<Shared>) -> ApiResult<Json<ModelPool>> {
    Ok(Json(st.pool()?))
}

async fn post_rank(State(st): State<Shared>, bytes: Bytes) -> ApiResult<Json<Ranking>> {
    let goal = goal_from_value(body(&bytes)?)?;
    Ok(Json(st.pool()?.rank(&goal)?))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CreateSession {
    goal: Value,
    reference_model_id: String,
    #[serde(default = "yes")]
    tr10: bool,
}

fn yes() -> bool {
    true
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Created {
    session: SessionHandle,
    report: TailoringReport,
}

async fn create_session(State(st): State<Shared>, bytes: Bytes) -> ApiResult<Response> {
    let req: CreateSession = body(&bytes)?;
    let ga = goal_from_value(req.goal)?;
    let pool = st.pool()?;
    let model = pool
        .load(&req.reference_model_id)
        .ok_or_else(|| ApiError::not_found("model-not-found", &req.reference_model_id))??;
    let gr = model.meta.goal.clone().ok_or_else(|| {
        ApiError::unprocessable("no-reference-goal", format!("`{}` has no embedded goal", req.reference_model_id))
    })?;
    let plan = plan_tailoring(&model, &ga, &gr, TailoringOptions { tr10: req.tr10 });
    let session = Session::new(model, ga);
    let id = format!("s-{}", st.next_id.fetch_add(1, Ordering::SeqCst));
    let entry = Entry { session, plan, info: SessionInfo { reference_model_id: req.reference_model_id } };
    st.persist(&id, &entry)?;
    let out = Created { session: handle(&id, &entry.session), report: entry.plan.clone() };
    st.sessions.write().expect("session map lock").insert(id, Arc::new(Mutex::new(entry)));
    Ok((StatusCode::CREATED, Json(out)).into_response())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionInfoOut {
    #[serde(flatten)]
    handle: SessionHandle,
    reference_model_id: String,
    tailored: bool,
    open_tasks: usize,
}

async fn describe(id: &str, entry: &Mutex<Entry>) -> SessionInfoOut {
    let e = entry.lock().await;
    SessionInfoOut {
        handle: handle(id, &e.session),
        reference_model_id: e.info.reference_model_id.clone(),
        tailored: e.tailored(),
        open_tasks: e.session.open_tasks().len(),
    }
}

async fn list_sessions(State(st): State<Shared>) -> Json<Vec<SessionInfoOut>> {
    let all: Vec<_> = st.sessions.read().expect("session map lock").iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    let mut out = Vec::with_capacity(all.len());
    for (id, e) in all {
        out.push(describe(&id, &e).await);
    }
    Json(out)
}

async fn get_session(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionInfoOut>> {
    let entry = st.entry(&id)?;
    Ok(Json(describe(&id, &entry).await))
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TailorRequest {
    revision: Option<u64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Tailored {
    session: SessionHandle,
    report: TailoringReport,
    spawned_tasks: Vec<Task>,
}

async fn tailor(State(st): State<Shared>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> ApiResult<Json<Tailored>> {
    let req: Option<TailorRequest> = body(&bytes)?;
    let entry = st.entry(&id)?;
    let mut e = entry.lock().await;
    check_revision(req.unwrap_or_default().revision, &e.session)?;
    if e.tailored() {
        return Err(ApiError::new(StatusCode::CONFLICT, "already-tailored", "the tailoring plan was already applied"));
    }
    let plan = e.plan.clone();
    let applied = apply_tailoring(&mut e.session, &plan)?;
    e.plan = applied.clone();
    st.persist(&id, &e)?;
    let spawned = applied.seeded_tasks.iter().filter_map(|t| e.session.task(t).cloned()).collect();
    Ok(Json(Tailored { session: handle(&id, &e.session), report: applied, spawned_tasks: spawned }))
}

async fn get_model(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let entry = st.entry(&id)?;
    let text = to_canonical_string(entry.lock().await.session.model());
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TaskList {
    revision: u64,
    tasks: Vec<Task>,
}

async fn get_tasks(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<TaskList>> {
    let entry = st.entry(&id)?;
    let e = entry.lock().await;
    Ok(Json(TaskList { revision: e.session.revision(), tasks: e.session.tasks().to_vec() }))
}

#[derive(Deserialize)]
struct PurposeQuery {
    purpose: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Validation {
    revision: u64,
    purpose: Purpose,
    violations: Vec<Violation>,
}

async fn get_validate(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PurposeQuery>,
) -> ApiResult<Json<Validation>> {
    let entry = st.entry(&id)?;
    let e = entry.lock().await;
    let purpose = match q.purpose {
        Some(p) => p
            .parse::<Purpose>()
            .map_err(|m| ApiError::new(StatusCode::BAD_REQUEST, "malformed", m))?,
        None => e.session.goal().purpose,
    };
    let violations = validate(e.session.model(), purpose);
    Ok(Json(Validation { revision: e.session.revision(), purpose, violations }))
}

#[derive(Serialize)]
struct Log {
    header: LogHeader,
    records: Vec<LogRecord>,
}

async fn get_log(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Log>> {
    let entry = st.entry(&id)?;
    let e = entry.lock().await;
    Ok(Json(Log { header: LogHeader::for_session(&e.session), records: e.session.log().to_vec() }))
}

#[derive(Serialize)]
struct Written {
    session: SessionHandle,
    record: LogRecord,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpsRequest {
    revision: u64,
    #[serde(default)]
    ops: Vec<Operation>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WaiveRequest {
    revision: u64,
    note: String,
}

async fn write(st: &AppState, id: &str, revision: u64, command: Command) -> ApiResult<Json<Written>> {
    let entry = st.entry(id)?;
    let mut e = entry.lock().await;
    check_revision(Some(revision), &e.session)?;
    let record = e.session.execute(command)?.clone();
    st.persist(id, &e)?;
    Ok(Json(Written { session: handle(id, &e.session), record }))
}

async fn post_operations(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> ApiResult<Json<Written>> {
    let req: OpsRequest = body(&bytes)?;
    write(&st, &id, req.revision, Command::Apply { ops: req.ops }).await
}

async fn complete_task(
    State(st): State<Shared>,
    UrlPath((id, tid)): UrlPath<(String, String)>,
    bytes: Bytes,
) -> ApiResult<Json<Written>> {
    let req: OpsRequest = body(&bytes)?;
    write(&st, &id, req.revision, Command::Complete { task_id: tid, ops: req.ops }).await
}

async fn waive_task(
    State(st): State<Shared>,
    UrlPath((id, tid)): UrlPath<(String, String)>,
    bytes: Bytes,
) -> ApiResult<Json<Written>> {
    let req: WaiveRequest = body(&bytes)?;
    write(&st, &id, req.revision, Command::Waive { task_id: tid, note: req.note }).await
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AuditRequest {
    gold_delta: AdaptationDelta,
    minutes: Value,
}

/// Minutes as a JSON number, a decimal string or a fraction such as "45/2".
fn minutes(v: &Value) -> ApiResult<Rational> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => String::new(),
    };
    rational::parse_decimal(&text)
        .or_else(|| rational::parse_fraction(&text))
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "malformed", "minutes must be a number").with_details(json!({"minutes": v})))
}

async fn post_audit(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    bytes: Bytes,
) -> ApiResult<Json<AuditResult>> {
    let req: AuditRequest = body(&bytes)?;
    let minutes = minutes(&req.minutes)?;
    let entry = st.entry(&id)?;
    let e = entry.lock().await;
    let performed = diff_models(e.session.initial_model(), e.session.model());
    Ok(Json(audit(&performed, &req.gold_delta, minutes)?))
}
