//! Session lifecycle, turn handling, questionnaire intake and blinding.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use emonews_core::evalkit::{compare_systems, LikertItems, QuestionnaireResponse};
use emonews_core::pipeline::{DialogueSession, InputKind, Pipeline, SystemMode, TurnErrorKind, TurnInput};
use emonews_core::sentiment::EmotionTag;
use emonews_core::Report;

use crate::store::{is_data_dir, load_study, validate_session_id, EventStore, StoreError};

/// Suggested wait before retrying a turn rejected as in flight.
pub const RETRY_AFTER_SECS: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session")]
    NotFound,
    #[error("a turn is already in flight for this session; retry after {RETRY_AFTER_SECS}s")]
    Busy,
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Unprocessable(String),
    /// Message is client-safe: it names the stage and nothing else.
    #[error("{message}")]
    Stage { stage: String, message: String },
    #[error("storage failure")]
    Storage(#[source] StoreError),
    #[error("internal error")]
    Internal(String),
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        ServiceError::Storage(e)
    }
}

/// Exactly one of `text` or `audio_b64`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_b64: Option<String>,
}

impl TurnRequest {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: Some(text.into()), audio_b64: None }
    }

    pub fn audio(wav: &[u8]) -> Self {
        Self { text: None, audio_b64: Some(B64.encode(wav)) }
    }

    fn into_input(self) -> Result<TurnInput, ServiceError> {
        match (self.text, self.audio_b64) {
            (Some(t), None) => Ok(TurnInput::Text(t)),
            (None, Some(a)) => B64
                .decode(a.trim())
                .map(TurnInput::Audio)
                .map_err(|_| ServiceError::BadRequest("audio_b64 is not valid base64".into())),
            _ => Err(ServiceError::BadRequest("provide exactly one of text or audio_b64".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResponsePayload {
    pub turn_index: usize,
    pub system_text: String,
    pub audio_b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<EmotionTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub turn_index: usize,
    pub input_kind: InputKind,
    pub user_text: String,
    pub system_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<EmotionTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptPayload {
    pub session_id: String,
    pub turns: Vec<TranscriptTurn>,
    pub questionnaire_submitted: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireRequest {
    pub items: LikertItems,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireAck {
    pub ok: bool,
    pub replaced_previous: bool,
}

struct SlotState {
    session: DialogueSession,
    questionnaire: Option<QuestionnaireResponse>,
}

struct SessionSlot {
    in_flight: AtomicBool,
    state: Mutex<SlotState>,
}

impl SessionSlot {
    fn new(session: DialogueSession, questionnaire: Option<QuestionnaireResponse>) -> Self {
        Self { in_flight: AtomicBool::new(false), state: Mutex::new(SlotState { session, questionnaire }) }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, SlotState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// Clears the in-flight flag when the turn finishes, however it finishes.
struct InFlight<'a>(&'a AtomicBool);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

/// Keeps only the `fmt ` and `data` chunks of a RIFF/WAVE file, so no
/// metadata written by the synthesizer reaches the client. Bytes that do not
/// parse as RIFF are returned unchanged.
pub fn strip_wav_metadata(wav: &[u8]) -> Vec<u8> {
    if wav.len() < 12 || &wav[0..4] != b"RIFF" || &wav[8..12] != b"WAVE" {
        return wav.to_vec();
    }
    let mut body = Vec::with_capacity(wav.len());
    body.extend_from_slice(b"WAVE");
    let mut pos = 12;
    while pos + 8 <= wav.len() {
        let id = &wav[pos..pos + 4];
        let len = u32::from_le_bytes(wav[pos + 4..pos + 8].try_into().expect("4 bytes")) as usize;
        let end = (pos + 8).saturating_add(len).min(wav.len());
        if id == b"fmt " || id == b"data" {
            body.extend_from_slice(id);
            body.extend_from_slice(&((end - pos - 8) as u32).to_le_bytes());
            body.extend_from_slice(&wav[pos + 8..end]);
            if (end - pos - 8) % 2 == 1 {
                body.push(0);
            }
        }
        pos = end + (len % 2);
    }
    let mut out = Vec::with_capacity(body.len() + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend_from_slice(&body);
    out
}

/// One running instance: a single mode, pipeline and data directory.
pub struct SdsService {
    pipeline: Pipeline,
    store: EventStore,
    blind_emotion: bool,
    report_root: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl SdsService {
    /// Opens the data directory and replays existing sessions.
    pub fn open(pipeline: Pipeline, data_dir: &Path, blind_emotion: bool) -> Result<Self, StoreError> {
        let store = EventStore::open(data_dir, pipeline.mode())?;
        let sessions = store
            .replay()?
            .into_iter()
            .map(|(id, s)| (id, Arc::new(SessionSlot::new(s.session, s.questionnaire))))
            .collect();
        Ok(Self { pipeline, store, blind_emotion, report_root: None, sessions: RwLock::new(sessions) })
    }

    /// Restricts `/report` to data directories below `root`.
    pub fn with_report_root(mut self, root: Option<PathBuf>) -> Self {
        self.report_root = root;
        self
    }

    pub fn mode(&self) -> SystemMode {
        self.pipeline.mode()
    }

    pub fn blind_emotion(&self) -> bool {
        self.blind_emotion
    }

    pub fn store(&self) -> &EventStore {
        &self.store
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ServiceError> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).get(id).cloned().ok_or(ServiceError::NotFound)
    }

    pub fn create_session(&self) -> Result<CreatedSession, ServiceError> {
        let id = uuid::Uuid::new_v4().to_string();
        let session = DialogueSession::new(id.clone(), self.mode());
        self.store.create_session(&session)?;
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.clone(), Arc::new(SessionSlot::new(session, None)));
        tracing::info!(session = %id, mode = %self.mode(), "session created");
        Ok(CreatedSession { session_id: id })
    }

    /// Number of completed turns, or `None` for an unknown session.
    pub fn turn_count(&self, id: &str) -> Option<usize> {
        self.slot(id).ok().map(|s| s.lock().session.turns().len())
    }

    /// Runs one turn. Blocks for the whole pipeline; call from a blocking
    /// context.
    pub fn post_turn(&self, id: &str, request: TurnRequest) -> Result<TurnResponsePayload, ServiceError> {
        let slot = self.slot(id)?;
        if slot.in_flight.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
            return Err(ServiceError::Busy);
        }
        let _guard = InFlight(&slot.in_flight);
        let input = request.into_input()?;

        // The pipeline works on a copy; the slot only changes after the turn
        // is on disk.
        let mut working = slot.lock().session.clone();
        let result = self.pipeline.handle_turn(&mut working, input);
        let trace = match &result {
            Ok(out) => &out.trace,
            Err(e) => &e.trace,
        };
        if let Err(e) = self.store.append_trace(trace) {
            tracing::warn!(error = %e, "trace append failed");
        }
        let out = result.map_err(|e| {
            let stage = e.stage.map(|s| s.to_string()).unwrap_or_else(|| "input".into());
            match e.kind {
                TurnErrorKind::EmptyInput => ServiceError::BadRequest("input is empty".into()),
                TurnErrorKind::NoSpeech => ServiceError::Unprocessable("no speech recognized".into()),
                TurnErrorKind::ModeMismatch { .. } | TurnErrorKind::Session(_) => ServiceError::Internal(e.to_string()),
                _ => ServiceError::Stage { message: format!("turn failed at stage {stage}"), stage },
            }
        })?;

        let mut turn = out.turn;
        self.store.persist_turn(id, &mut turn, &out.audio.audio)?;
        let (turn_index, system_text, emotion) = (turn.index, turn.system_text.clone(), turn.emotion);
        slot.lock().session.push_turn(turn).map_err(|e| ServiceError::Internal(e.to_string()))?;

        let audio = if self.blind_emotion { strip_wav_metadata(&out.audio.audio) } else { out.audio.audio };
        Ok(TurnResponsePayload {
            turn_index,
            system_text,
            audio_b64: B64.encode(audio),
            emotion: (!self.blind_emotion).then_some(emotion),
        })
    }

    pub fn transcript(&self, id: &str) -> Result<TranscriptPayload, ServiceError> {
        let slot = self.slot(id)?;
        let state = slot.lock();
        Ok(TranscriptPayload {
            session_id: id.to_string(),
            turns: state
                .session
                .turns()
                .iter()
                .map(|t| TranscriptTurn {
                    turn_index: t.index,
                    input_kind: t.input_kind,
                    user_text: t.user_text.clone(),
                    system_text: t.system_text.clone(),
                    emotion: (!self.blind_emotion).then_some(t.emotion),
                })
                .collect(),
            questionnaire_submitted: state.questionnaire.is_some(),
        })
    }

    /// Stores a questionnaire. A repeat submission replaces the earlier one
    /// and is marked as such in the log.
    pub fn submit_questionnaire(&self, id: &str, items: LikertItems) -> Result<QuestionnaireAck, ServiceError> {
        let slot = self.slot(id)?;
        let mut state = slot.lock();
        if state.session.turns().is_empty() {
            return Err(ServiceError::Unprocessable("questionnaire requires at least one completed turn".into()));
        }
        let response = QuestionnaireResponse { session_id: id.to_string(), items };
        let replaced = state.questionnaire.is_some();
        self.store.persist_questionnaire(&response, replaced)?;
        if replaced {
            tracing::info!(session = %id, "questionnaire resubmitted; previous response superseded");
        }
        state.questionnaire = Some(response);
        Ok(QuestionnaireAck { ok: true, replaced_previous: replaced })
    }

    fn report_dir(&self, raw: &str) -> Result<PathBuf, ServiceError> {
        let dir = Path::new(raw)
            .canonicalize()
            .map_err(|_| ServiceError::BadRequest(format!("{raw} is not a data directory")))?;
        if let Some(root) = &self.report_root {
            let root = root.canonicalize().unwrap_or_else(|_| root.clone());
            if !dir.starts_with(&root) {
                return Err(ServiceError::BadRequest(format!("{raw} is outside the report root")));
            }
        }
        if !is_data_dir(&dir) {
            return Err(ServiceError::BadRequest(format!("{raw} is not a data directory")));
        }
        Ok(dir)
    }

    /// Compares two data directories from their persisted, unredacted logs.
    pub fn report(&self, a: &str, b: &str) -> Result<Report, ServiceError> {
        let (ra, sa) = load_study(&self.report_dir(a)?)?;
        let (rb, sb) = load_study(&self.report_dir(b)?)?;
        compare_systems(&ra, &rb, &sa, &sb).map_err(|e| ServiceError::Unprocessable(e.to_string()))
    }
}

impl std::fmt::Debug for SdsService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdsService").field("mode", &self.mode()).field("blind_emotion", &self.blind_emotion).finish()
    }
}

/// Rejects ids that could never name a session before touching any state.
pub fn check_session_id(id: &str) -> Result<(), ServiceError> {
    validate_session_id(id).map_err(|_| ServiceError::NotFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use emonews_core::audio::{encode_wav, parse_wav};

    #[test]
    fn stripping_drops_transcript_chunk() {
        let wav = encode_wav(&[1, -2, 3], 16000, Some("secret words"));
        let stripped = strip_wav_metadata(&wav);
        assert!(!stripped.windows(4).any(|w| w == b"tscr"));
        let parsed = parse_wav(&stripped).unwrap();
        assert_eq!(parsed.samples, [1, -2, 3]);
        assert_eq!(parsed.transcript, None);
        assert_eq!(strip_wav_metadata(b"nope"), b"nope");
    }

    #[test]
    fn request_needs_exactly_one_input() {
        assert!(TurnRequest::default().into_input().is_err());
        let both = TurnRequest { text: Some("a".into()), audio_b64: Some("AA==".into()) };
        assert!(both.into_input().is_err());
        let bad = TurnRequest { text: None, audio_b64: Some("!!".into()) };
        assert!(matches!(bad.into_input(), Err(ServiceError::BadRequest(_))));
        assert!(matches!(TurnRequest::audio(&[1, 2]).into_input(), Ok(TurnInput::Audio(v)) if v == [1, 2]));
    }
}
