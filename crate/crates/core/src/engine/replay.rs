use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::canonical::{content_hash, to_canonical_line};
use crate::goal::AdaptationGoal;
use crate::model::QualityModel;

use super::session::{LogRecord, Session};
use super::EngineError;

pub const LOG_SCHEMA: &str = "qm-adapt/session-log@1";

/// First line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogHeader {
    pub schema: String,
    pub hash_algorithm: String,
    pub initial_model_hash: String,
    pub goal: AdaptationGoal,
}

impl LogHeader {
    pub fn for_session(session: &Session) -> Self {
        LogHeader {
            schema: LOG_SCHEMA.into(),
            hash_algorithm: "sha256".into(),
            initial_model_hash: content_hash(session.initial_model()),
            goal: session.goal().clone(),
        }
    }
}

/// Writes the header and every record as JSON lines.
pub fn write_log<W: Write>(out: &mut W, header: &LogHeader, records: &[LogRecord]) -> std::io::Result<()> {
    let value = serde_json::to_value(header).map_err(std::io::Error::other)?;
    writeln!(out, "{}", to_canonical_line(&value))?;
    for r in records {
        let value = serde_json::to_value(r).map_err(std::io::Error::other)?;
        writeln!(out, "{}", to_canonical_line(&value))?;
    }
    out.flush()
}

/// Reads a log. A final line that does not parse is treated as an
/// interrupted write and dropped.
pub fn read_log<R: BufRead>(input: R) -> Result<(LogHeader, Vec<LogRecord>), EngineError> {
    let lines: Vec<String> = input
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| EngineError::Log(e.to_string()))?;
    let lines: Vec<&str> = lines.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).collect();
    let Some((first, rest)) = lines.split_first() else {
        return Err(EngineError::Log("empty log".into()));
    };
    let header: LogHeader =
        serde_json::from_str(first).map_err(|e| EngineError::Log(format!("header: {e}")))?;
    if header.schema != LOG_SCHEMA {
        return Err(EngineError::Log(format!("unsupported schema `{}`", header.schema)));
    }
    let mut records = Vec::with_capacity(rest.len());
    for (i, line) in rest.iter().enumerate() {
        match serde_json::from_str::<LogRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == rest.len() => {
                log::warn!("dropping truncated last log line");
            }
            Err(e) => return Err(EngineError::Log(format!("line {}: {e}", i + 2))),
        }
    }
    Ok((header, records))
}

/// Re-executes the logged commands from `initial` and checks that every step
/// reproduces its record exactly.
pub fn replay(
    initial: QualityModel,
    goal: AdaptationGoal,
    records: &[LogRecord],
) -> Result<Session, EngineError> {
    let mut session = Session::new(initial, goal);
    for (i, expected) in records.iter().enumerate() {
        let step = i + 1;
        let got = session
            .execute(expected.command.clone())
            .map_err(|e| EngineError::Replay { step, reason: e.to_string() })?;
        if got != expected {
            let reason = if got.model_hash_after != expected.model_hash_after {
                format!("model hash {} != logged {}", got.model_hash_after, expected.model_hash_after)
            } else {
                "task effects differ from the log".to_string()
            };
            return Err(EngineError::Replay { step, reason });
        }
    }
    Ok(session)
}
