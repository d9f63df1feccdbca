//! The five external model roles: speech recognition, response generation,
//! speech synthesis, text embedding and sentiment classification.
//!
//! Each role is a trait. Every role has an HTTP+JSON client ([`http`]) and a
//! deterministic in-process mock ([`mock`]); [`BackendSet::from_descriptors`]
//! picks one per role from configuration.

pub mod http;
pub mod mock;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::audio::{parse_wav, WavError};
use crate::index::Embedder;
use crate::sentiment::{EmotionDistribution, EmotionTag, Lexicon};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendRole {
    Asr,
    Llm,
    Tts,
    Embed,
    Sentiment,
}

impl BackendRole {
    pub const ALL: [BackendRole; 5] =
        [BackendRole::Asr, BackendRole::Llm, BackendRole::Tts, BackendRole::Embed, BackendRole::Sentiment];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendRole::Asr => "asr",
            BackendRole::Llm => "llm",
            BackendRole::Tts => "tts",
            BackendRole::Embed => "embed",
            BackendRole::Sentiment => "sentiment",
        }
    }

    pub fn path(self) -> &'static str {
        match self {
            BackendRole::Asr => wire::ASR_PATH,
            BackendRole::Llm => wire::GENERATE_PATH,
            BackendRole::Tts => wire::TTS_PATH,
            BackendRole::Embed => wire::EMBED_PATH,
            BackendRole::Sentiment => wire::SENTIMENT_PATH,
        }
    }
}

impl fmt::Display for BackendRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("{role} backend timed out after {attempts} attempt(s)")]
    Timeout { role: BackendRole, attempts: u32 },
    #[error("{role} backend unreachable after {attempts} attempt(s): {message}")]
    Transport { role: BackendRole, attempts: u32, message: String },
    #[error("{role} backend returned HTTP {status}: {body}")]
    Status { role: BackendRole, status: u16, body: String },
    #[error("{role} backend returned a malformed payload: {message}")]
    Malformed { role: BackendRole, message: String },
    #[error("{role} backend returned an empty result")]
    Empty { role: BackendRole },
    #[error("invalid input for {role}: {message}")]
    InvalidInput { role: BackendRole, message: String },
    #[error("embedding dimension mismatch: index expects {expected}, backend declares {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid backend descriptor: {0}")]
    Config(String),
}

impl BackendError {
    pub fn role(&self) -> Option<BackendRole> {
        match self {
            BackendError::Timeout { role, .. }
            | BackendError::Transport { role, .. }
            | BackendError::Status { role, .. }
            | BackendError::Malformed { role, .. }
            | BackendError::Empty { role }
            | BackendError::InvalidInput { role, .. } => Some(*role),
            BackendError::DimMismatch { .. } => Some(BackendRole::Embed),
            BackendError::Config(_) => None,
        }
    }

    pub(crate) fn bad_wav(role: BackendRole, e: WavError) -> Self {
        BackendError::InvalidInput { role, message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Mock,
    #[serde(untagged)]
    Url(String),
}

impl Endpoint {
    pub fn parse(s: &str) -> Endpoint {
        if s.eq_ignore_ascii_case("mock") {
            Endpoint::Mock
        } else {
            Endpoint::Url(s.trim_end_matches('/').to_string())
        }
    }
}

pub const MAX_RETRIES: u32 = 3;

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retry_count() -> u32 {
    1
}

/// Where and how to reach one backend role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub role: BackendRole,
    pub endpoint: Endpoint,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retry_count")]
    pub retry_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bearer_token: Option<String>,
}

impl BackendDescriptor {
    pub fn mock(role: BackendRole) -> Self {
        Self { role, endpoint: Endpoint::Mock, timeout_ms: default_timeout_ms(), retry_count: 0, bearer_token: None }
    }

    pub fn url(role: BackendRole, url: &str) -> Self {
        Self {
            role,
            endpoint: Endpoint::parse(url),
            timeout_ms: default_timeout_ms(),
            retry_count: default_retry_count(),
            bearer_token: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.timeout_ms == 0 {
            return Err(BackendError::Config(format!("{}: timeout must be positive", self.role)));
        }
        if self.retry_count > MAX_RETRIES {
            return Err(BackendError::Config(format!(
                "{}: retry_count {} exceeds {MAX_RETRIES}",
                self.role, self.retry_count
            )));
        }
        if let Endpoint::Url(u) = &self.endpoint {
            if !(u.starts_with("http://") || u.starts_with("https://")) {
                return Err(BackendError::Config(format!("{}: endpoint {u:?} is neither \"mock\" nor an http(s) URL", self.role)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transcript {
    Text(String),
    /// The recognizer heard no speech.
    Empty,
}

impl Transcript {
    pub fn from_text(text: &str) -> Self {
        let t = text.trim();
        if t.is_empty() {
            Transcript::Empty
        } else {
            Transcript::Text(t.to_string())
        }
    }
}

/// Synthesized speech: PCM 16-bit mono WAV bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub audio: Vec<u8>,
    pub sample_rate: u32,
    pub duration_secs: f64,
}

impl SynthesisResult {
    /// Validates a WAV payload and derives its duration.
    pub fn from_wav(audio: Vec<u8>) -> Result<Self, BackendError> {
        let wav = parse_wav(&audio).map_err(|e| BackendError::Malformed { role: BackendRole::Tts, message: e.to_string() })?;
        if wav.channels != 1 {
            return Err(BackendError::Malformed { role: BackendRole::Tts, message: "audio is not mono".into() });
        }
        let duration_secs = wav.duration_secs();
        if duration_secs <= 0.0 {
            return Err(BackendError::Empty { role: BackendRole::Tts });
        }
        Ok(Self { audio, sample_rate: wav.sample_rate, duration_secs })
    }
}

pub trait AsrBackend: Send + Sync {
    /// Transcribes a mono PCM WAV clip. Invalid WAV is rejected before any
    /// network call.
    fn transcribe(&self, wav: &[u8]) -> Result<Transcript, BackendError>;
}

pub trait LlmBackend: Send + Sync {
    fn generate(&self, prompt: &str) -> Result<String, BackendError>;
}

pub trait TtsBackend: Send + Sync {
    fn synthesize(&self, style_text: &str, content_text: &str) -> Result<SynthesisResult, BackendError>;
}

pub trait SentimentBackend: Send + Sync {
    fn classify_remote(&self, text: &str) -> Result<EmotionDistribution<f64>, BackendError>;
}

/// Tolerance on the probability sum of a backend distribution before it is
/// rejected as malformed.
pub const REMOTE_SUM_TOLERANCE: f64 = 1e-3;

/// Validates a backend probability map: all five tags present, values clamped
/// to [0, 1], sum within 1e-3 of 1. Accepted maps are renormalized.
pub fn distribution_from_wire(probabilities: &BTreeMap<String, f64>) -> Result<EmotionDistribution<f64>, BackendError> {
    let malformed = |message: String| BackendError::Malformed { role: BackendRole::Sentiment, message };
    let mut probs = [0.0; 5];
    for (i, tag) in EmotionTag::ALL.iter().enumerate() {
        let p = *probabilities.get(tag.as_str()).ok_or_else(|| malformed(format!("missing {tag:?} key")))?;
        if !p.is_finite() {
            return Err(malformed(format!("non-finite probability for {tag}")));
        }
        probs[i] = p.clamp(0.0, 1.0);
    }
    if let Some(extra) = probabilities.keys().find(|k| k.parse::<EmotionTag>().is_err()) {
        return Err(malformed(format!("unknown key {extra:?}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > REMOTE_SUM_TOLERANCE {
        return Err(malformed(format!("probabilities sum to {sum}")));
    }
    EmotionDistribution::from_weights(probs).map_err(|e| malformed(e.to_string()))
}

/// One implementation per role. `sentiment` is optional: without it the
/// lexicon fallback classifies every turn.
#[derive(Clone)]
pub struct BackendSet {
    pub asr: Arc<dyn AsrBackend>,
    pub llm: Arc<dyn LlmBackend>,
    pub tts: Arc<dyn TtsBackend>,
    pub embedder: Arc<dyn Embedder<f32>>,
    pub sentiment: Option<Arc<dyn SentimentBackend>>,
}

impl fmt::Debug for BackendSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendSet").field("sentiment", &self.sentiment.is_some()).finish_non_exhaustive()
    }
}

/// Options for building clients that the descriptors do not carry.
#[derive(Debug, Clone)]
pub struct BackendOptions {
    pub max_tokens: u32,
    /// Id recorded in indexes built with a remote embedder.
    pub remote_embedder_id: String,
    /// Dimension the remote embedder must declare.
    pub remote_embedder_dim: usize,
    pub style_table: crate::pipeline::StyleTable,
    pub lexicon: Arc<Lexicon>,
}

impl Default for BackendOptions {
    fn default() -> Self {
        Self {
            max_tokens: 256,
            remote_embedder_id: "remote".into(),
            remote_embedder_dim: crate::index::HASH_DIM,
            style_table: crate::pipeline::StyleTable::default(),
            lexicon: Arc::new(Lexicon::builtin()),
        }
    }
}

impl BackendSet {
    /// All-mock set, with the lexicon-backed mock sentiment classifier.
    pub fn mocks() -> Self {
        Self::mocks_with(&BackendOptions::default())
    }

    pub fn mocks_with(opts: &BackendOptions) -> Self {
        Self {
            asr: Arc::new(mock::MockAsr),
            llm: Arc::new(mock::MockLlm),
            tts: Arc::new(mock::MockTts::new(opts.style_table.clone())),
            embedder: Arc::new(mock::MockEmbedder),
            sentiment: Some(Arc::new(mock::MockSentiment::new(opts.lexicon.clone()))),
        }
    }

    /// Builds clients from descriptors. Roles without a descriptor default to
    /// mocks, except sentiment, which defaults to none.
    ///
    /// HTTP clients use a blocking runtime internally; do not call this from
    /// inside an async context.
    pub fn from_descriptors(descriptors: &[BackendDescriptor], opts: &BackendOptions) -> Result<Self, BackendError> {
        let mut set = Self::mocks_with(opts);
        set.sentiment = None;
        let mut seen = std::collections::HashSet::new();
        for d in descriptors {
            d.validate()?;
            if !seen.insert(d.role) {
                return Err(BackendError::Config(format!("duplicate descriptor for {}", d.role)));
            }
            match (&d.endpoint, d.role) {
                (Endpoint::Mock, BackendRole::Sentiment) => {
                    set.sentiment = Some(Arc::new(mock::MockSentiment::new(opts.lexicon.clone())));
                }
                (Endpoint::Mock, _) => {}
                (Endpoint::Url(_), role) => {
                    let t = http::HttpTransport::new(d)?;
                    match role {
                        BackendRole::Asr => set.asr = Arc::new(http::HttpAsr::new(t)),
                        BackendRole::Llm => set.llm = Arc::new(http::HttpLlm::new(t, opts.max_tokens)),
                        BackendRole::Tts => set.tts = Arc::new(http::HttpTts::new(t)),
                        BackendRole::Embed => {
                            set.embedder = Arc::new(http::HttpEmbedder::new(
                                t,
                                opts.remote_embedder_id.clone(),
                                opts.remote_embedder_dim,
                            ))
                        }
                        BackendRole::Sentiment => set.sentiment = Some(Arc::new(http::HttpSentiment::new(t))),
                    }
                }
            }
        }
        Ok(set)
    }
}
