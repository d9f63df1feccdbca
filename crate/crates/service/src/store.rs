//! Append-only JSON-Lines event log, one file per session.
//!
//! Layout under the data directory:
//!
//! ```text
//! instance.json            {"mode": ...}, written once
//! sessions/<id>.jsonl      session events
//! audio/<id>/<n>.wav       synthesized audio of turn n
//! trace.jsonl              per-stage timing records
//! ```
//!
//! A turn's audio is written (temp file, fsync, rename) before its event is
//! appended, so a turn is either fully persisted or absent. A torn final line
//! left by a crash is dropped on replay.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use emonews_core::evalkit::{QuestionnaireResponse, SessionSummary};
use emonews_core::pipeline::{DialogueSession, StageRecord, SystemMode, Turn};

const INSTANCE_FILE: &str = "instance.json";
const SESSIONS_DIR: &str = "sessions";
const AUDIO_DIR: &str = "audio";
const TRACE_FILE: &str = "trace.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("data directory {path} belongs to a {found} instance, not {expected}")]
    ModeMismatch { path: String, found: SystemMode, expected: SystemMode },
    #[error("invalid session id {0:?}")]
    BadSessionId(String),
    #[error("session {0} already exists")]
    Exists(String),
    #[error("{0} is not a data directory")]
    NotADataDir(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionCreated {
        session_id: String,
        mode: SystemMode,
        created_at: String,
    },
    TurnCompleted {
        turn: Box<Turn>,
    },
    QuestionnaireSubmitted {
        response: QuestionnaireResponse,
        mode: SystemMode,
        submitted_at: String,
        /// Set when an earlier submission for the session is superseded.
        replaces_previous: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceInfo {
    mode: SystemMode,
}

/// A session rebuilt from its log.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredSession {
    pub session: DialogueSession,
    /// Latest submission, if any.
    pub questionnaire: Option<QuestionnaireResponse>,
    pub submissions: usize,
}

/// Ids become file names, so only `[A-Za-z0-9_-]` is accepted.
pub fn validate_session_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadSessionId(id.to_string()))
    }
}

fn fsync_dir(dir: &Path) -> Result<(), StoreError> {
    File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))
}

fn append_line(path: &Path, line: &str) -> Result<(), StoreError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    let mut buf = String::with_capacity(line.len() + 1);
    buf.push_str(line);
    buf.push('\n');
    f.write_all(buf.as_bytes()).and_then(|_| f.sync_data()).map_err(io_err(path))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("path has a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    fsync_dir(dir)
}

/// Parses a JSONL file. A final line without a newline that fails to parse
/// is a torn write: it is reported as `torn_at` (byte offset) and skipped.
fn read_events(path: &Path) -> Result<(Vec<SessionEvent>, Option<u64>), StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut events = Vec::new();
    let mut offset = 0u64;
    let n_lines = text.split_inclusive('\n').count();
    for (i, line) in text.split_inclusive('\n').enumerate() {
        let complete = line.ends_with('\n');
        let body = line.trim();
        if !body.is_empty() {
            match serde_json::from_str(body) {
                Ok(ev) => events.push(ev),
                Err(_) if !complete && i + 1 == n_lines => return Ok((events, Some(offset))),
                Err(e) => {
                    return Err(StoreError::Corrupt { path: path.display().to_string(), line: i + 1, message: e.to_string() })
                }
            }
        }
        offset += line.len() as u64;
    }
    Ok((events, None))
}

fn rebuild(path: &Path, events: Vec<SessionEvent>) -> Result<StoredSession, StoreError> {
    let corrupt = |line: usize, message: String| StoreError::Corrupt { path: path.display().to_string(), line, message };
    let mut iter = events.into_iter().enumerate();
    let mut stored = match iter.next() {
        Some((_, SessionEvent::SessionCreated { session_id, mode, created_at })) => StoredSession {
            session: DialogueSession::with_created_at(session_id, mode, created_at),
            questionnaire: None,
            submissions: 0,
        },
        _ => return Err(corrupt(1, "log does not start with session_created".into())),
    };
    for (i, ev) in iter {
        match ev {
            SessionEvent::SessionCreated { .. } => return Err(corrupt(i + 1, "duplicate session_created".into())),
            SessionEvent::TurnCompleted { turn } => {
                stored.session.push_turn(*turn).map_err(|e| corrupt(i + 1, e.to_string()))?;
            }
            SessionEvent::QuestionnaireSubmitted { response, .. } => {
                stored.questionnaire = Some(response);
                stored.submissions += 1;
            }
        }
    }
    Ok(stored)
}

/// Event log rooted at one instance's data directory.
#[derive(Debug)]
pub struct EventStore {
    root: PathBuf,
    mode: SystemMode,
    trace_lock: Mutex<()>,
}

impl EventStore {
    /// Opens or initializes `root` for `mode`. An existing directory created
    /// for the other mode is refused.
    pub fn open(root: &Path, mode: SystemMode) -> Result<Self, StoreError> {
        for dir in [root.to_path_buf(), root.join(SESSIONS_DIR), root.join(AUDIO_DIR)] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let info_path = root.join(INSTANCE_FILE);
        if info_path.exists() {
            let found = read_instance(root)?;
            if found != mode {
                return Err(StoreError::ModeMismatch { path: root.display().to_string(), found, expected: mode });
            }
        } else {
            let json = serde_json::to_vec(&InstanceInfo { mode }).expect("instance info serializes");
            write_atomic(&info_path, &json)?;
        }
        Ok(Self { root: root.to_path_buf(), mode, trace_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn mode(&self) -> SystemMode {
        self.mode
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join(SESSIONS_DIR).join(format!("{id}.jsonl"))
    }

    fn append(&self, id: &str, event: &SessionEvent) -> Result<(), StoreError> {
        validate_session_id(id)?;
        let line = serde_json::to_string(event).expect("events serialize");
        append_line(&self.session_path(id), &line)
    }

    pub fn create_session(&self, session: &DialogueSession) -> Result<(), StoreError> {
        validate_session_id(session.id())?;
        let path = self.session_path(session.id());
        let event = SessionEvent::SessionCreated {
            session_id: session.id().to_string(),
            mode: session.mode(),
            created_at: session.created_at().to_string(),
        };
        let mut line = serde_json::to_string(&event).expect("events serialize");
        line.push('\n');
        let mut f = match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(StoreError::Exists(session.id().into())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        f.write_all(line.as_bytes()).and_then(|_| f.sync_all()).map_err(io_err(&path))?;
        fsync_dir(&self.root.join(SESSIONS_DIR))
    }

    /// Relative path under which turn `index` of `session_id` stores audio.
    pub fn audio_ref(session_id: &str, index: usize) -> String {
        format!("{AUDIO_DIR}/{session_id}/{index}.wav")
    }

    /// Writes the audio, then the turn event with `audio_ref` set.
    pub fn persist_turn(&self, session_id: &str, turn: &mut Turn, audio: &[u8]) -> Result<(), StoreError> {
        validate_session_id(session_id)?;
        let rel = Self::audio_ref(session_id, turn.index);
        write_atomic(&self.root.join(&rel), audio)?;
        turn.audio_ref = Some(rel);
        self.append(session_id, &SessionEvent::TurnCompleted { turn: Box::new(turn.clone()) })
    }

    pub fn persist_questionnaire(&self, response: &QuestionnaireResponse, replaces_previous: bool) -> Result<(), StoreError> {
        let event = SessionEvent::QuestionnaireSubmitted {
            response: response.clone(),
            mode: self.mode,
            submitted_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            replaces_previous,
        };
        self.append(&response.session_id, &event)
    }

    pub fn append_trace(&self, records: &[StageRecord]) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).expect("records serialize"));
            text.push('\n');
        }
        let path = self.root.join(TRACE_FILE);
        let _guard = self.trace_lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        f.write_all(text.as_bytes()).map_err(io_err(&path))
    }

    /// Raw events of one session, for auditing.
    pub fn events(&self, session_id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        validate_session_id(session_id)?;
        Ok(read_events(&self.session_path(session_id))?.0)
    }

    /// Rebuilds every session. Torn trailing lines are truncated away so
    /// later appends start on a clean line.
    pub fn replay(&self) -> Result<BTreeMap<String, StoredSession>, StoreError> {
        let out = replay_dir(&self.root)?;
        for (id, torn) in &out.1 {
            let path = self.session_path(id);
            tracing::warn!(session = %id, offset = torn, "dropping torn trailing event");
            let f = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
            f.set_len(*torn).and_then(|_| f.sync_all()).map_err(io_err(&path))?;
        }
        Ok(out.0)
    }
}

type Replayed = (BTreeMap<String, StoredSession>, Vec<(String, u64)>);

fn replay_dir(root: &Path) -> Result<Replayed, StoreError> {
    let dir = root.join(SESSIONS_DIR);
    let mut sessions = BTreeMap::new();
    let mut torn = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    for path in paths {
        let (events, torn_at) = read_events(&path)?;
        if events.is_empty() {
            continue;
        }
        let stored = rebuild(&path, events)?;
        let id = stored.session.id().to_string();
        if let Some(offset) = torn_at {
            torn.push((id.clone(), offset));
        }
        sessions.insert(id, stored);
    }
    Ok((sessions, torn))
}

fn read_instance(root: &Path) -> Result<SystemMode, StoreError> {
    let path = root.join(INSTANCE_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let info: InstanceInfo = serde_json::from_str(&text)
        .map_err(|e| StoreError::Corrupt { path: path.display().to_string(), line: 1, message: e.to_string() })?;
    Ok(info.mode)
}

/// True when `dir` looks like an instance data directory.
pub fn is_data_dir(dir: &Path) -> bool {
    dir.join(INSTANCE_FILE).is_file() && dir.join(SESSIONS_DIR).is_dir()
}

/// Evaluation inputs read from a data directory without modifying it:
/// the latest questionnaire per session plus one summary per session.
pub fn load_study(root: &Path) -> Result<(Vec<QuestionnaireResponse>, Vec<SessionSummary>), StoreError> {
    if !is_data_dir(root) {
        return Err(StoreError::NotADataDir(root.display().to_string()));
    }
    let mode = read_instance(root)?;
    let (sessions, _) = replay_dir(root)?;
    let mut responses = Vec::new();
    let mut summaries = Vec::new();
    for stored in sessions.into_values() {
        summaries.push(SessionSummary {
            session_id: stored.session.id().to_string(),
            mode: Some(mode),
            n_turn: stored.session.turns().len(),
        });
        responses.extend(stored.questionnaire);
    }
    Ok((responses, summaries))
}
