//! Cascade orchestration of one dialogue turn:
//! speech recognition, retrieval, prompting, generation, sentiment (emotional
//! mode only) and synthesis.

mod prompt;
mod session;
mod style;

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use prompt::{build_llm_prompt, min_prompt_budget, EXCERPT_CHARS, SYSTEM_INSTRUCTION, TITLE_MARKER};
pub use session::{count_system_turns, DialogueSession, InputKind, SystemMode, Turn};
pub use style::{build_tts_style_prompt, StyleError, StylePrompt, StyleTable};

use crate::backends::{BackendError, BackendSet, SynthesisResult, Transcript};
use crate::index::{Index, IndexError};
use crate::sentiment::{EmotionTag, Lexicon, SentimentAnalyzer, SentimentError};

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Asr,
    Retrieve,
    Prompt,
    Generate,
    Classify,
    Tts,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Asr => "asr",
            Stage::Retrieve => "retrieve",
            Stage::Prompt => "prompt",
            Stage::Generate => "generate",
            Stage::Classify => "classify",
            Stage::Tts => "tts",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the stage trace log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub session_id: String,
    pub turn_index: usize,
    pub stage: Stage,
    pub duration_ms: u64,
    pub ok: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("session invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, thiserror::Error)]
pub enum TurnErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("no speech recognized")]
    NoSpeech,
    #[error("session mode {session} does not match pipeline mode {pipeline}")]
    ModeMismatch { session: SystemMode, pipeline: SystemMode },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] IndexError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Session(#[from] PipelineError),
}

/// A turn that was aborted; the session is unchanged.
#[derive(Debug, thiserror::Error)]
#[error("turn failed{}: {kind}", stage.map(|s| format!(" at stage {s}")).unwrap_or_default())]
pub struct TurnError {
    /// `None` when the turn was rejected before any stage ran.
    pub stage: Option<Stage>,
    pub kind: TurnErrorKind,
    pub trace: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TurnInput {
    Text(String),
    /// Mono PCM 16-bit WAV.
    Audio(Vec<u8>),
}

#[derive(Debug, Clone)]
pub struct TurnOutput {
    pub turn: Turn,
    pub audio: SynthesisResult,
    pub trace: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub retrieval_k: usize,
    pub prompt_budget_chars: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { retrieval_k: 1, prompt_budget_chars: 4000 }
    }
}

/// Runs turns for sessions of a single mode. Shareable across threads;
/// callers serialize turns within one session.
#[derive(Clone)]
pub struct Pipeline {
    mode: SystemMode,
    config: PipelineConfig,
    index: Arc<Index<f32>>,
    backends: BackendSet,
    analyzer: SentimentAnalyzer,
    styles: StyleTable,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline").field("mode", &self.mode).field("config", &self.config).finish_non_exhaustive()
    }
}

struct Tracer<'a> {
    session_id: &'a str,
    turn_index: usize,
    records: Vec<StageRecord>,
}

impl Tracer<'_> {
    fn run<R, E>(&mut self, stage: Stage, f: impl FnOnce() -> Result<R, E>) -> Result<R, (Stage, E)> {
        let start = Instant::now();
        let out = f();
        let record = StageRecord {
            session_id: self.session_id.to_string(),
            turn_index: self.turn_index,
            stage,
            duration_ms: start.elapsed().as_millis() as u64,
            ok: out.is_ok(),
        };
        tracing::info!(
            session_id = %record.session_id,
            turn_index = record.turn_index,
            stage = stage.as_str(),
            duration_ms = record.duration_ms,
            ok = record.ok,
            "stage"
        );
        self.records.push(record);
        out.map_err(|e| (stage, e))
    }

    fn stages(&self) -> Vec<Stage> {
        self.records.iter().map(|r| r.stage).collect()
    }
}

impl Pipeline {
    pub fn new(
        mode: SystemMode,
        config: PipelineConfig,
        index: Arc<Index<f32>>,
        backends: BackendSet,
        lexicon: Arc<Lexicon>,
        styles: StyleTable,
    ) -> Result<Self, PipelineError> {
        if config.retrieval_k == 0 {
            return Err(PipelineError::Config("retrieval_k must be at least 1".into()));
        }
        if config.prompt_budget_chars <= min_prompt_budget() {
            return Err(PipelineError::Config(format!(
                "prompt_budget_chars must exceed {} (instruction template length)",
                min_prompt_budget()
            )));
        }
        if index.is_empty() {
            return Err(IndexError::EmptyIndex.into());
        }
        index.ensure_embedder(backends.embedder.as_ref())?;
        let analyzer = SentimentAnalyzer::new(lexicon, backends.sentiment.clone());
        Ok(Self { mode, config, index, backends, analyzer, styles })
    }

    pub fn mode(&self) -> SystemMode {
        self.mode
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn styles(&self) -> &StyleTable {
        &self.styles
    }

    pub fn index(&self) -> &Index<f32> {
        &self.index
    }

    /// Runs one turn and appends it to `session`. On error nothing is appended.
    pub fn handle_turn(&self, session: &mut DialogueSession, input: TurnInput) -> Result<TurnOutput, TurnError> {
        let reject = |kind: TurnErrorKind| TurnError { stage: None, kind, trace: Vec::new() };
        if session.mode() != self.mode {
            return Err(reject(TurnErrorKind::ModeMismatch { session: session.mode(), pipeline: self.mode }));
        }
        match &input {
            TurnInput::Text(t) if t.trim().is_empty() => return Err(reject(TurnErrorKind::EmptyInput)),
            TurnInput::Audio(a) if a.is_empty() => return Err(reject(TurnErrorKind::EmptyInput)),
            _ => {}
        }

        let started_at = now_rfc3339();
        let mut tracer = Tracer { session_id: session.id(), turn_index: session.next_turn_index(), records: Vec::new() };
        match self.run_stages(session, input, &mut tracer) {
            Ok((mut turn, audio)) => {
                turn.started_at = started_at;
                turn.ended_at = now_rfc3339();
                turn.stages = tracer.stages();
                let trace = std::mem::take(&mut tracer.records);
                session
                    .push_turn(turn.clone())
                    .map_err(|e| TurnError { stage: None, kind: e.into(), trace: trace.clone() })?;
                Ok(TurnOutput { turn, audio, trace })
            }
            Err((stage, kind)) => {
                tracing::warn!(session_id = session.id(), stage = stage.as_str(), error = %kind, "turn aborted");
                Err(TurnError { stage: Some(stage), kind, trace: tracer.records })
            }
        }
    }

    fn run_stages(
        &self,
        session: &DialogueSession,
        input: TurnInput,
        tracer: &mut Tracer<'_>,
    ) -> Result<(Turn, SynthesisResult), (Stage, TurnErrorKind)> {
        let (input_kind, user_text) = match input {
            TurnInput::Text(t) => (InputKind::Text, t.trim().to_string()),
            TurnInput::Audio(wav) => {
                let transcript = tracer.run(Stage::Asr, || match self.backends.asr.transcribe(&wav) {
                    Ok(Transcript::Text(t)) => Ok(t),
                    Ok(Transcript::Empty) => Err(TurnErrorKind::NoSpeech),
                    Err(e) => Err(e.into()),
                })?;
                (InputKind::Audio, transcript)
            }
        };

        let retrieved = tracer.run(Stage::Retrieve, || {
            self.index
                .retrieve(self.backends.embedder.as_ref(), &user_text, self.config.retrieval_k)
                .map_err(TurnErrorKind::from)
        })?;

        let prompt = tracer.run(Stage::Prompt, || {
            Ok::<_, TurnErrorKind>(build_llm_prompt(
                &user_text,
                &retrieved,
                session.turns(),
                self.config.prompt_budget_chars,
            ))
        })?;

        let system_text =
            tracer.run(Stage::Generate, || self.backends.llm.generate(&prompt).map_err(TurnErrorKind::from))?;

        let mut warnings = Vec::new();
        let (emotion, distribution, source) = match self.mode {
            SystemMode::Baseline => (EmotionTag::Neutral, None, None),
            SystemMode::Emotional => {
                let c = tracer.run(Stage::Classify, || self.analyzer.classify(&system_text).map_err(TurnErrorKind::from))?;
                warnings.extend(c.warning);
                (c.tag, Some(c.distribution), Some(c.source))
            }
        };

        let style = build_tts_style_prompt(&system_text, emotion, &self.styles);
        let audio = tracer.run(Stage::Tts, || {
            self.backends.tts.synthesize(&style.style_text, &style.content_text).map_err(TurnErrorKind::from)
        })?;

        let turn = Turn {
            index: session.next_turn_index(),
            input_kind,
            user_text,
            system_text,
            emotion,
            emotion_distribution: distribution,
            classification_source: source,
            retrieved,
            prompt,
            style_text: style.style_text,
            stages: Vec::new(),
            warnings,
            audio_ref: None,
            started_at: String::new(),
            ended_at: String::new(),
        };
        Ok((turn, audio))
    }
}
