//! Files on disk: models, goals, reference pools, gold deltas and session
//! directories.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::audit::AdaptationDelta;
use crate::canonical::{content_hash, to_canonical_string};
use crate::engine::{read_log, replay, write_log, EngineError, LogHeader, Session};
use crate::goal::{goal_from_value, rank_reference_models, AdaptationGoal, GoalError, Ranking};
use crate::tailor::TailoringReport;
use crate::model::{validate, Purpose, QualityModel, Severity, Violation, SCHEMA};

pub const MODEL_EXT: &str = ".qm.json";
pub const GOAL_EXT: &str = ".goal.json";
pub const LOG_EXT: &str = ".session.jsonl";
pub const GOLD_EXT: &str = ".gold.json";

/// Files inside a session directory.
pub const INITIAL_MODEL: &str = "initial.qm.json";
pub const CURRENT_MODEL: &str = "current.qm.json";
pub const SESSION_LOG: &str = "session.session.jsonl";
pub const TASKS_FILE: &str = "tasks.json";
pub const REPORT_FILE: &str = "tailoring.report.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}: unsupported schema `{found}` (expected `{SCHEMA}`)")]
    Schema { path: PathBuf, found: String },
    #[error("{path}: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Structural { path: PathBuf, violations: Vec<Violation> },
    #[error("{path}: {source}")]
    Goal { path: PathBuf, source: GoalError },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("session log was written for initial model {logged}, found {actual}")]
    InitialMismatch { logged: String, actual: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn read_json(path: &Path) -> Result<Value, StoreError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Writes through a temporary file in the same directory so readers never
/// see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
    f.write_all(bytes).map_err(io(&tmp))?;
    f.sync_all().map_err(io(&tmp))?;
    fs::rename(&tmp, path).map_err(io(path))
}

/// Parses a model document and checks its schema and structure. Operational
/// violations are accepted.
pub fn model_from_value(value: Value, path: &Path) -> Result<QualityModel, StoreError> {
    let found = value
        .pointer("/meta/schema")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    if found != SCHEMA {
        return Err(StoreError::Schema { path: path.to_path_buf(), found });
    }
    let model: QualityModel = serde_json::from_value(value)
        .map_err(|e| StoreError::Invalid { path: path.to_path_buf(), message: e.to_string() })?;
    let violations: Vec<_> = validate(&model, Purpose::Specification)
        .into_iter()
        .filter(|v| v.severity == Severity::Structural)
        .collect();
    if !violations.is_empty() {
        return Err(StoreError::Structural { path: path.to_path_buf(), violations });
    }
    Ok(model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<QualityModel, StoreError> {
    let path = path.as_ref();
    model_from_value(read_json(path)?, path)
}

/// Saves the canonical form of `model`.
pub fn save_model(model: &QualityModel, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), to_canonical_string(model).as_bytes())
}

pub fn load_goal(path: impl AsRef<Path>) -> Result<AdaptationGoal, StoreError> {
    let path = path.as_ref();
    goal_from_value(read_json(path)?).map_err(|source| StoreError::Goal { path: path.to_path_buf(), source })
}

pub fn save_goal(goal: &AdaptationGoal, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), to_canonical_string(goal).as_bytes())
}

pub fn load_delta(path: impl AsRef<Path>) -> Result<AdaptationDelta, StoreError> {
    let path = path.as_ref();
    serde_json::from_value(read_json(path)?)
        .map_err(|e| StoreError::Invalid { path: path.to_path_buf(), message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoolEntry {
    pub model_id: String,
    pub path: PathBuf,
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<AdaptationGoal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoolWarning {
    pub path: PathBuf,
    pub message: String,
}

/// Reference models available for selection, sorted by model id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelPool {
    pub entries: Vec<PoolEntry>,
    pub warnings: Vec<PoolWarning>,
}

impl ModelPool {
    pub fn get(&self, model_id: &str) -> Option<&PoolEntry> {
        self.entries.iter().find(|e| e.model_id == model_id)
    }

    pub fn load(&self, model_id: &str) -> Option<Result<QualityModel, StoreError>> {
        self.get(model_id).map(|e| load_model(&e.path))
    }

    pub fn rank(&self, ga: &AdaptationGoal) -> Result<Ranking, GoalError> {
        let pool: Vec<_> = self.entries.iter().map(|e| (e.model_id.clone(), e.goal.clone())).collect();
        rank_reference_models(ga, &pool)
    }
}

/// Indexes every `*.qm.json` file in `dir`. Files that fail to load are left
/// out and reported as warnings; models without an embedded goal are kept
/// with `goal: None`.
pub fn load_pool(dir: impl AsRef<Path>) -> Result<ModelPool, StoreError> {
    let dir = dir.as_ref();
    let mut pool = ModelPool::default();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(model_id) = name.strip_suffix(MODEL_EXT) else { continue };
        match load_model(&path) {
            Ok(model) => {
                if model.meta.goal.is_none() {
                    log::warn!("{}: no embedded goal", path.display());
                    pool.warnings.push(PoolWarning { path: path.clone(), message: "no embedded goal".into() });
                }
                pool.entries.push(PoolEntry {
                    model_id: model_id.to_string(),
                    schema: model.meta.schema.clone(),
                    goal: model.meta.goal.clone(),
                    path,
                });
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                pool.warnings.push(PoolWarning { path, message: e.to_string() });
            }
        }
    }
    pool.entries.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    pool.warnings.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(pool)
}

pub fn save_report(report: &TailoringReport, path: impl AsRef<Path>) -> Result<(), StoreError> {
    write_atomic(path.as_ref(), to_canonical_string(report).as_bytes())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<TailoringReport, StoreError> {
    let path = path.as_ref();
    serde_json::from_value(read_json(path)?)
        .map_err(|e| StoreError::Invalid { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes a session directory: the initial model, the log, a snapshot of
/// the current model and the task list.
pub fn persist_session(session: &Session, dir: impl AsRef<Path>) -> Result<(), StoreError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io(dir))?;
    save_model(session.initial_model(), dir.join(INITIAL_MODEL))?;
    let mut log = Vec::new();
    write_log(&mut log, &LogHeader::for_session(session), session.log()).map_err(io(dir))?;
    write_atomic(&dir.join(SESSION_LOG), &log)?;
    save_model(session.model(), dir.join(CURRENT_MODEL))?;
    write_atomic(&dir.join(TASKS_FILE), to_canonical_string(session.tasks()).as_bytes())
}

/// Rebuilds a session from its directory by replaying the log on the initial
/// model. A torn last log line is ignored.
pub fn restore_session(dir: impl AsRef<Path>) -> Result<Session, StoreError> {
    let dir = dir.as_ref();
    let initial = load_model(dir.join(INITIAL_MODEL))?;
    let log_path = dir.join(SESSION_LOG);
    let file = fs::File::open(&log_path).map_err(io(&log_path))?;
    let (header, records) = read_log(BufReader::new(file))?;
    let actual = content_hash(&initial);
    if header.initial_model_hash != actual {
        return Err(StoreError::InitialMismatch { logged: header.initial_model_hash, actual });
    }
    Ok(replay(initial, header.goal, &records)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ElementKind;
    use serde_json::json;

    #[test]
    fn save_is_canonical_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = QualityModel::create("m").unwrap();
        m.insert_element(ElementKind::Property, json!({"name": "p"}).as_object().unwrap()).unwrap();
        let path = dir.path().join("m.qm.json");
        save_model(&m, &path).unwrap();
        let first = fs::read(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, m);
        save_model(&loaded, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.qm.json");
        fs::write(&bad, "{\n  \"meta\": ").unwrap();
        assert!(matches!(load_model(&bad), Err(StoreError::Parse { line: 2, .. })));
        fs::write(&bad, r#"{"meta": {"schema": "qm-adapt/99", "name": "x"}}"#).unwrap();
        assert!(matches!(load_model(&bad), Err(StoreError::Schema { .. })));
        fs::write(
            &bad,
            r#"{"meta": {"schema": "qm-adapt/1", "name": "x", "nextId": 5},
                "factors": [{"id": "f-1", "name": "f", "entityType": "et-9", "property": "p-9"}]}"#,
        )
        .unwrap();
        match load_model(&bad) {
            Err(StoreError::Structural { violations, .. }) => {
                assert!(violations.iter().any(|v| v.rule.as_str() == "V1"))
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_model(dir.path().join("missing.qm.json")), Err(StoreError::Io { .. })));
    }

    #[test]
    fn pool_skips_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b", "a"] {
            save_model(&QualityModel::create(name).unwrap(), dir.path().join(format!("{name}.qm.json"))).unwrap();
        }
        fs::write(dir.path().join("c.qm.json"), "not json").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let pool = load_pool(dir.path()).unwrap();
        let ids: Vec<_> = pool.entries.iter().map(|e| e.model_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(pool.warnings.iter().any(|w| w.path.ends_with("c.qm.json")));
        assert!(load_pool(dir.path().join("nope")).is_err());
    }
}
