//! Blocking HTTP+JSON clients for remote model servers.
//!
//! Each request gets the descriptor's timeout. Transport failures, timeouts
//! and 5xx responses are retried up to `retry_count` times; malformed
//! payloads and 4xx responses fail immediately.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::*;
use super::{
    distribution_from_wire, AsrBackend, BackendDescriptor, BackendError, BackendRole, Endpoint, LlmBackend,
    SentimentBackend, SynthesisResult, Transcript, TtsBackend,
};
use crate::audio::parse_wav;
use crate::index::{EmbedError, Embedder, EmbeddingVector};
use crate::scalar::Scalar;
use crate::sentiment::EmotionDistribution;

/// Shared request machinery for one backend role.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    role: BackendRole,
    retry_count: u32,
    bearer_token: Option<String>,
}

impl HttpTransport {
    pub fn new(descriptor: &BackendDescriptor) -> Result<Self, BackendError> {
        descriptor.validate()?;
        let Endpoint::Url(base) = &descriptor.endpoint else {
            return Err(BackendError::Config(format!("{}: mock endpoint has no HTTP transport", descriptor.role)));
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(descriptor.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            client,
            url: format!("{base}{}", descriptor.role.path()),
            role: descriptor.role,
            retry_count: descriptor.retry_count,
            bearer_token: descriptor.bearer_token.clone(),
        })
    }

    pub fn role(&self) -> BackendRole {
        self.role
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp, BackendError> {
        let role = self.role;
        let attempts = self.retry_count + 1;
        let mut last_err = None;
        for attempt in 1..=attempts {
            let mut req = self.client.post(&self.url).json(body);
            if let Some(token) = &self.bearer_token {
                req = req.bearer_auth(token);
            }
            let err = match req.send().and_then(|r| {
                let status = r.status();
                r.bytes().map(|b| (status, b))
            }) {
                Ok((status, bytes)) if status.is_success() => {
                    return serde_json::from_slice(&bytes)
                        .map_err(|e| BackendError::Malformed { role, message: e.to_string() });
                }
                Ok((status, bytes)) => {
                    let err = BackendError::Status {
                        role,
                        status: status.as_u16(),
                        body: String::from_utf8_lossy(&bytes).chars().take(200).collect(),
                    };
                    if !status.is_server_error() {
                        return Err(err);
                    }
                    err
                }
                Err(e) if e.is_timeout() => BackendError::Timeout { role, attempts: attempt },
                Err(e) if e.is_decode() || e.is_builder() => {
                    return Err(BackendError::Malformed { role, message: e.to_string() });
                }
                Err(e) => BackendError::Transport { role, attempts: attempt, message: e.to_string() },
            };
            tracing::warn!(role = role.as_str(), attempt, error = %err, "backend request failed");
            last_err = Some(err);
        }
        Err(last_err.expect("at least one attempt"))
    }
}

#[derive(Debug, Clone)]
pub struct HttpAsr {
    transport: HttpTransport,
}

impl HttpAsr {
    pub fn new(transport: HttpTransport) -> Self {
        Self { transport }
    }
}

impl AsrBackend for HttpAsr {
    fn transcribe(&self, wav: &[u8]) -> Result<Transcript, BackendError> {
        let parsed = parse_wav(wav).map_err(|e| BackendError::bad_wav(BackendRole::Asr, e))?;
        if parsed.channels != 1 {
            return Err(BackendError::InvalidInput { role: BackendRole::Asr, message: "audio must be mono".into() });
        }
        let resp: AsrResponse = self
            .transport
            .post_json(&AsrRequest { audio_b64: BASE64.encode(wav), sample_rate: parsed.sample_rate })?;
        Ok(Transcript::from_text(&resp.text))
    }
}

#[derive(Debug, Clone)]
pub struct HttpLlm {
    transport: HttpTransport,
    max_tokens: u32,
}

impl HttpLlm {
    pub fn new(transport: HttpTransport, max_tokens: u32) -> Self {
        Self { transport, max_tokens }
    }
}

impl LlmBackend for HttpLlm {
    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::InvalidInput { role: BackendRole::Llm, message: "empty prompt".into() });
        }
        let resp: GenerateResponse =
            self.transport.post_json(&GenerateRequest { prompt: prompt.to_string(), max_tokens: self.max_tokens })?;
        let text = resp.text.trim();
        if text.is_empty() {
            return Err(BackendError::Empty { role: BackendRole::Llm });
        }
        Ok(text.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct HttpTts {
    transport: HttpTransport,
}

impl HttpTts {
    pub fn new(transport: HttpTransport) -> Self {
        Self { transport }
    }
}

impl TtsBackend for HttpTts {
    fn synthesize(&self, style_text: &str, content_text: &str) -> Result<SynthesisResult, BackendError> {
        if content_text.trim().is_empty() {
            return Err(BackendError::InvalidInput { role: BackendRole::Tts, message: "empty content".into() });
        }
        let resp: TtsResponse =
            self.transport.post_json(&TtsRequest { style: style_text.to_string(), text: content_text.to_string() })?;
        let audio = BASE64
            .decode(resp.audio_b64.as_bytes())
            .map_err(|e| BackendError::Malformed { role: BackendRole::Tts, message: e.to_string() })?;
        let result = SynthesisResult::from_wav(audio)?;
        if result.sample_rate != resp.sample_rate {
            return Err(BackendError::Malformed {
                role: BackendRole::Tts,
                message: format!("sample_rate {} disagrees with WAV header {}", resp.sample_rate, result.sample_rate),
            });
        }
        Ok(result)
    }
}

/// Remote sentence encoder. Vectors are L2-normalized on receipt.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    transport: HttpTransport,
    id: String,
    dim: usize,
}

impl HttpEmbedder {
    /// `dim` is the dimension the index expects; a backend declaring any
    /// other dimension is rejected.
    pub fn new(transport: HttpTransport, id: String, dim: usize) -> Self {
        Self { transport, id, dim }
    }

    pub fn embed_remote<T: Scalar>(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let resp: EmbedResponse = self
            .transport
            .post_json(&EmbedRequest { text: text.to_string() })
            .map_err(|e| EmbedError::Backend(Box::new(e)))?;
        if resp.dim != self.dim {
            return Err(EmbedError::DimMismatch { expected: self.dim, got: resp.dim });
        }
        if resp.vector.len() != resp.dim {
            return Err(EmbedError::Backend(Box::new(BackendError::Malformed {
                role: BackendRole::Embed,
                message: format!("declared dim {} but sent {} values", resp.dim, resp.vector.len()),
            })));
        }
        EmbeddingVector::normalize(resp.vector.into_iter().map(T::from_f64_lossy).collect())
    }
}

impl<T: Scalar> Embedder<T> for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector<T>, EmbedError> {
        self.embed_remote(text)
    }
}

#[derive(Debug, Clone)]
pub struct HttpSentiment {
    transport: HttpTransport,
}

impl HttpSentiment {
    pub fn new(transport: HttpTransport) -> Self {
        Self { transport }
    }
}

impl SentimentBackend for HttpSentiment {
    fn classify_remote(&self, text: &str) -> Result<EmotionDistribution<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::InvalidInput { role: BackendRole::Sentiment, message: "empty text".into() });
        }
        let resp: SentimentResponse = self.transport.post_json(&SentimentRequest { text: text.to_string() })?;
        distribution_from_wire(&resp.probabilities)
    }
}
