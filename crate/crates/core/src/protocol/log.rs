//! Session logs: every decoded client message of a connection with the
//! server wall clock at which it was handled. Replaying a log through a fresh
//! [`Connection`] reproduces the original server output exactly.
//!
//! Line 1 is a header; each following line is
//! `{"wall_clock":<seconds>,"message":<client message>}`. Trainer tracks
//! loaded by path are stored inline so a log is self-contained.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::persistence::{InlineTrack, PersistError, ScoreReportRow};
use crate::track::Track;

use super::connection::{CompletedTrial, Connection};
use super::message::{ClientMessage, ServerMessage, PROTOCOL_VERSION};

pub const SESSION_LOG_VERSION: u32 = 1;
const SESSION_LOG_KIND: &str = "session_log";

#[derive(Debug, Serialize, Deserialize)]
struct LogHeader {
    format_version: u32,
    kind: String,
    protocol_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trainer: Option<InlineTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub wall_clock: f64,
    pub message: ClientMessage,
}

#[derive(Debug, Clone)]
pub struct SessionLog {
    pub preloaded_trainer: Option<Track>,
    pub entries: Vec<LogEntry>,
}

pub struct SessionLogWriter<W: Write> {
    out: W,
}

impl<W: Write> SessionLogWriter<W> {
    pub fn new(mut out: W, preloaded_trainer: Option<&Track>) -> Result<Self, PersistError> {
        let header = LogHeader {
            format_version: SESSION_LOG_VERSION,
            kind: SESSION_LOG_KIND.to_owned(),
            protocol_version: PROTOCOL_VERSION,
            trainer: preloaded_trainer.map(InlineTrack::from),
        };
        serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(Self { out })
    }

    /// Appends one handled message. Messages that load a trainer by path
    /// should be passed through [`inline_trainer`] first.
    pub fn append(&mut self, wall_clock: f64, message: &ClientMessage) -> Result<(), PersistError> {
        let entry = LogEntry {
            wall_clock,
            message: message.clone(),
        };
        serde_json::to_writer(&mut self.out, &entry).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Rewrites a successful `load_trainer{path}` as `load_trainer{track}` using
/// the trainer the connection now holds.
pub fn inline_trainer(message: &ClientMessage, conn: &Connection) -> ClientMessage {
    match (message, conn.session()) {
        (
            ClientMessage::LoadTrainer {
                path: Some(_),
                track: None,
            },
            Some(session),
        ) => ClientMessage::LoadTrainer {
            track: Some(Box::new(InlineTrack::from(session.trainer()))),
            path: None,
        },
        _ => message.clone(),
    }
}

pub fn read_session_log<R: BufRead>(input: R) -> Result<SessionLog, PersistError> {
    let mut lines = input.lines();
    let first = lines.next().ok_or(PersistError::Empty)??;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| PersistError::Malformed {
        line: 1,
        detail: e.to_string(),
    })?;
    if header.kind != SESSION_LOG_KIND {
        return Err(PersistError::Schema {
            line: 1,
            detail: format!("expected kind `{SESSION_LOG_KIND}`, got `{}`", header.kind),
        });
    }
    if header.format_version != SESSION_LOG_VERSION || header.protocol_version != PROTOCOL_VERSION {
        return Err(PersistError::UnsupportedVersion {
            line: 1,
            version: format!("{}/{}", header.format_version, header.protocol_version),
        });
    }
    let preloaded_trainer = header
        .trainer
        .map(InlineTrack::into_track)
        .transpose()
        .map_err(|e| PersistError::Schema {
            line: 1,
            detail: format!("preloaded trainer: {e}"),
        })?;

    let mut entries = Vec::new();
    let mut prev_clock = f64::NEG_INFINITY;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let entry: LogEntry =
            serde_json::from_str(&line?).map_err(|e| PersistError::Malformed {
                line: lineno,
                detail: e.to_string(),
            })?;
        if !entry.wall_clock.is_finite() {
            return Err(PersistError::Schema {
                line: lineno,
                detail: "wall_clock must be finite".into(),
            });
        }
        if entry.wall_clock < prev_clock {
            return Err(PersistError::NonMonotonic {
                line: lineno,
                t: entry.wall_clock,
                prev: prev_clock,
            });
        }
        prev_clock = entry.wall_clock;
        entries.push(entry);
    }
    Ok(SessionLog {
        preloaded_trainer,
        entries,
    })
}

pub fn read_session_log_file(path: &Path) -> Result<SessionLog, PersistError> {
    read_session_log(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    /// Server responses in order, grouped per log entry.
    pub responses: Vec<Vec<ServerMessage>>,
    pub trials: Vec<CompletedTrial>,
}

impl ReplayOutput {
    pub fn report_rows(&self) -> Vec<ScoreReportRow> {
        self.trials.iter().map(CompletedTrial::report_row).collect()
    }
}

/// Feeds a log through a fresh connection at the recorded wall clocks.
pub fn replay(log: &SessionLog) -> ReplayOutput {
    let mut conn = match &log.preloaded_trainer {
        Some(t) => Connection::with_trainer(t.clone()),
        None => Connection::new(),
    };
    let responses = log
        .entries
        .iter()
        .map(|e| conn.handle(&e.message, e.wall_clock))
        .collect();
    ReplayOutput {
        responses,
        trials: conn.completed_trials().to_vec(),
    }
}
