//! File-backed session persistence.
//!
//! Layout under the data directory:
//!
//! ```text
//! sessions/<id>.jsonl       append-only event log, one JSON object per line
//! sessions/<id>.agent.json  optional agent binding used to drive turns
//! index.json            SessionSummary rows, rewritten after each change
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::agent::AgentBinding;
use crate::parser::ResponseParser;
use crate::session::{parse_event_log, Clock, ReplayError, Session, SessionEvent, SessionSummary};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("session {0} already exists")]
    Exists(String),
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Replay {
        path: PathBuf,
        #[source]
        source: ReplayError,
    },
    #[error("index: {0}")]
    Index(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn is_valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug, Clone)]
pub struct FileStore {
    root: PathBuf,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        Ok(self.root.join("sessions").join(format!("{id}.jsonl")))
    }

    fn agent_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        let log = self.log_path(id)?;
        Ok(log.with_extension("agent.json"))
    }

    pub fn bind_agent(&self, id: &str, binding: &AgentBinding) -> Result<(), StoreError> {
        let path = self.agent_path(id)?;
        let mut body = serde_json::to_string_pretty(binding)?;
        body.push('\n');
        fs::write(&path, body).map_err(io_err(&path))
    }

    /// The stored binding, or `None` for sessions answered by hand.
    pub fn agent_binding(&self, id: &str) -> Result<Option<AgentBinding>, StoreError> {
        let path = self.agent_path(id)?;
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    pub fn exists(&self, id: &str) -> bool {
        self.log_path(id).map(|p| p.exists()).unwrap_or(false)
    }

    /// Writes a new log holding all of the session's events.
    pub fn create(&self, session: &Session) -> Result<(), StoreError> {
        let path = self.log_path(session.id())?;
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == io::ErrorKind::AlreadyExists {
                    StoreError::Exists(session.id().to_string())
                } else {
                    StoreError::Io {
                        path: path.clone(),
                        source: e,
                    }
                }
            })?;
        write_events(&mut file, session.events()).map_err(io_err(&path))?;
        self.upsert_summary(session.state().summary())
    }

    pub fn append(&self, id: &str, events: &[SessionEvent]) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        let path = self.log_path(id)?;
        if !path.exists() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let mut file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        write_events(&mut file, events).map_err(io_err(&path))
    }

    /// Appends the session's events past `persisted` and refreshes the index.
    pub fn save(&self, session: &Session, persisted: u64) -> Result<(), StoreError> {
        self.append(session.id(), session.events_after(persisted))?;
        self.upsert_summary(session.state().summary())
    }

    pub fn load_events(&self, id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        let path = self.log_path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_string()))
            }
            Err(e) => return Err(StoreError::Io { path, source: e }),
        };
        parse_event_log(&text).map_err(|source| StoreError::Replay { path, source })
    }

    pub fn load(
        &self,
        id: &str,
        parser: ResponseParser,
        clock: Arc<dyn Clock>,
    ) -> Result<Session, StoreError> {
        let events = self.load_events(id)?;
        Session::restore(events, parser, clock).map_err(|source| StoreError::Replay {
            path: self.log_path(id).expect("validated above"),
            source,
        })
    }

    pub fn list(&self) -> Result<Vec<SessionSummary>, StoreError> {
        let path = self.index_path();
        match fs::read_to_string(&path) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(StoreError::Io { path, source: e }),
        }
    }

    fn upsert_summary(&self, summary: SessionSummary) -> Result<(), StoreError> {
        let mut rows = self.list()?;
        match rows.iter_mut().find(|r| r.id == summary.id) {
            Some(row) => *row = summary,
            None => rows.push(summary),
        }
        rows.sort_by(|a, b| a.id.cmp(&b.id));
        let path = self.index_path();
        let tmp = path.with_extension("json.tmp");
        let mut body = serde_json::to_string_pretty(&rows)?;
        body.push('\n');
        fs::write(&tmp, body).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}

fn write_events(file: &mut File, events: &[SessionEvent]) -> io::Result<()> {
    let mut buf = String::new();
    for event in events {
        buf.push_str(&event.to_json_line());
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    file.sync_data()
}
