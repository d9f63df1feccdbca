//! Deterministic in-process stand-ins for every backend role.
//!
//! Each mock is a pure function of its input, so full pipeline runs under
//! mocks are reproducible byte for byte.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{
    distribution_from_wire, AsrBackend, BackendError, BackendRole, LlmBackend, SentimentBackend, SynthesisResult,
    Transcript, TtsBackend,
};
use crate::audio::{encode_wav, parse_wav, sine_tone, DEFAULT_SAMPLE_RATE};
use crate::index::{hash_embed, EmbedError, Embedder, EmbeddingVector, HASH_DIM, HASH_EMBEDDER_ID};
use crate::pipeline::{StyleTable, TITLE_MARKER};
use crate::scalar::Scalar;
use crate::sentiment::{EmotionDistribution, EmotionTag, Lexicon};

/// Returns the transcript stored in the clip's `tscr` chunk.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockAsr;

impl AsrBackend for MockAsr {
    fn transcribe(&self, wav: &[u8]) -> Result<Transcript, BackendError> {
        let parsed = parse_wav(wav).map_err(|e| BackendError::bad_wav(BackendRole::Asr, e))?;
        if parsed.channels != 1 {
            return Err(BackendError::InvalidInput { role: BackendRole::Asr, message: "audio must be mono".into() });
        }
        Ok(parsed.transcript.as_deref().map_or(Transcript::Empty, Transcript::from_text))
    }
}

pub const MOCK_SUMMARY: &str = "here is a short summary of the report.";
pub const MOCK_NO_NEWS: &str = "I could not find relevant news.";

/// Quotes the first retrieved title found in the prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockLlm;

/// First title line (`[n] Title: ...`) in a prompt.
pub fn first_prompt_title(prompt: &str) -> Option<&str> {
    prompt.lines().find_map(|line| {
        let rest = line.strip_prefix('[')?;
        let (num, title) = rest.split_once(TITLE_MARKER)?;
        let num = num.strip_suffix(']')?;
        (!num.is_empty() && num.bytes().all(|b| b.is_ascii_digit()) && !title.trim().is_empty()).then(|| title.trim())
    })
}

impl LlmBackend for MockLlm {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::InvalidInput { role: BackendRole::Llm, message: "empty prompt".into() });
        }
        Ok(match first_prompt_title(prompt) {
            Some(title) => format!("According to '{title}': {MOCK_SUMMARY}"),
            None => MOCK_NO_NEWS.to_string(),
        })
    }
}

/// Tone frequency the mock synthesizer uses for each emotion.
pub fn mock_tone_hz(tag: EmotionTag) -> f64 {
    match tag {
        EmotionTag::Neutral => 220.0,
        EmotionTag::Happy => 330.0,
        EmotionTag::Sad => 165.0,
        EmotionTag::Angry => 440.0,
        EmotionTag::Surprised => 550.0,
    }
}

/// Seconds of mock audio per whitespace-separated content word.
pub const MOCK_SECONDS_PER_WORD: f64 = 0.05;

/// Emits a sine tone whose pitch encodes the emotion named by the style
/// prompt and whose length is 0.05 s per content word.
#[derive(Debug, Clone, Default)]
pub struct MockTts {
    styles: StyleTable,
}

impl MockTts {
    pub fn new(styles: StyleTable) -> Self {
        Self { styles }
    }
}

impl TtsBackend for MockTts {
    fn synthesize(&self, style_text: &str, content_text: &str) -> Result<SynthesisResult, BackendError> {
        let words = content_text.split_whitespace().count();
        if words == 0 {
            return Err(BackendError::InvalidInput { role: BackendRole::Tts, message: "empty content".into() });
        }
        let tag = self.styles.emotion_for_style(style_text).ok_or_else(|| BackendError::InvalidInput {
            role: BackendRole::Tts,
            message: format!("unrecognized style prompt {style_text:?}"),
        })?;
        let samples = sine_tone(mock_tone_hz(tag), words as f64 * MOCK_SECONDS_PER_WORD, DEFAULT_SAMPLE_RATE);
        SynthesisResult::from_wav(encode_wav(&samples, DEFAULT_SAMPLE_RATE, None))
    }
}

/// Delegates to [`hash_embed`].
#[derive(Debug, Clone, Copy, Default)]
pub struct MockEmbedder;

impl<T: Scalar> Embedder<T> for MockEmbedder {
    fn id(&self) -> &str {
        HASH_EMBEDDER_ID
    }

    fn dim(&self) -> usize {
        HASH_DIM
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        hash_embed(text)
    }
}

/// Sentiment backend answering with the keyword lexicon.
#[derive(Debug, Clone)]
pub struct MockSentiment {
    lexicon: Arc<Lexicon>,
}

impl MockSentiment {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        Self { lexicon }
    }
}

impl SentimentBackend for MockSentiment {
    fn classify_remote(&self, text: &str) -> Result<EmotionDistribution<f64>, BackendError> {
        self.lexicon
            .classify(text)
            .map_err(|e| BackendError::InvalidInput { role: BackendRole::Sentiment, message: e.to_string() })
    }
}

/// Returns the same wire-format probability map for every input, validated
/// exactly as a remote response would be.
#[derive(Debug, Clone)]
pub struct FixedSentiment {
    probabilities: BTreeMap<String, f64>,
}

impl FixedSentiment {
    pub fn new<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self { probabilities: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }
}

impl SentimentBackend for FixedSentiment {
    fn classify_remote(&self, _text: &str) -> Result<EmotionDistribution<f64>, BackendError> {
        distribution_from_wire(&self.probabilities)
    }
}
