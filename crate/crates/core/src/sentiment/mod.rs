//! Emotion tags for system responses.
//!
//! A configured [`SentimentBackend`] is tried first; if it is unreachable or
//! answers with a malformed distribution, the keyword [`Lexicon`] decides and
//! a warning is attached to the result.

mod lexicon;
mod mapping;
mod tag;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use lexicon::{tokenize, Lexicon};
pub use mapping::{Discard, LabelMapping, MappingTarget, GOEMOTIONS_LABELS, GOOD_NEWS_EVERYONE_LABELS};
pub use tag::{EmotionDistribution, EmotionTag};

use crate::backends::SentimentBackend;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SentimentError {
    #[error("cannot classify empty text")]
    EmptyText,
    #[error("unknown emotion tag {0:?}")]
    UnknownTag(String),
    #[error("label {0:?} is not declared in the mapping")]
    UndeclaredLabel(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid sentiment data: {0}")]
    Data(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassificationSource {
    Backend,
    Lexicon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub tag: EmotionTag,
    pub distribution: EmotionDistribution<f64>,
    pub source: ClassificationSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Looks up a source-dataset label.
pub fn map_label(source: &str, mapping: &LabelMapping) -> Result<MappingTarget, SentimentError> {
    mapping.map_label(source)
}

/// Lexicon-only classification.
pub fn classify_lexicon(text: &str, lexicon: &Lexicon) -> Result<EmotionDistribution<f64>, SentimentError> {
    lexicon.classify(text)
}

/// Classifies with `backend` when given, falling back to the lexicon on any
/// backend failure. The returned tag is always the distribution's argmax.
pub fn classify(
    text: &str,
    lexicon: &Lexicon,
    backend: Option<&dyn SentimentBackend>,
) -> Result<Classification, SentimentError> {
    if text.trim().is_empty() {
        return Err(SentimentError::EmptyText);
    }
    let mut warning = None;
    if let Some(backend) = backend {
        match backend.classify_remote(text) {
            Ok(distribution) => {
                return Ok(Classification {
                    tag: distribution.argmax(),
                    distribution,
                    source: ClassificationSource::Backend,
                    warning: None,
                })
            }
            Err(e) => {
                tracing::warn!(error = %e, "sentiment backend failed; using lexicon fallback");
                warning = Some(format!("sentiment backend failed, lexicon fallback used: {e}"));
            }
        }
    }
    let distribution = lexicon.classify(text)?;
    Ok(Classification { tag: distribution.argmax(), distribution, source: ClassificationSource::Lexicon, warning })
}

/// Lexicon plus optional backend, shareable across threads.
#[derive(Clone)]
pub struct SentimentAnalyzer {
    lexicon: Arc<Lexicon>,
    backend: Option<Arc<dyn SentimentBackend>>,
}

impl std::fmt::Debug for SentimentAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SentimentAnalyzer").field("backend", &self.backend.is_some()).finish_non_exhaustive()
    }
}

impl SentimentAnalyzer {
    pub fn new(lexicon: Arc<Lexicon>, backend: Option<Arc<dyn SentimentBackend>>) -> Self {
        Self { lexicon, backend }
    }

    pub fn classify(&self, text: &str) -> Result<Classification, SentimentError> {
        classify(text, &self.lexicon, self.backend.as_deref())
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::mock::FixedSentiment;

    #[test]
    fn no_backend_neutral_text() {
        let c = classify("The committee will meet on Monday.", &Lexicon::builtin(), None).unwrap();
        assert_eq!(c.tag, EmotionTag::Neutral);
        assert_eq!(c.distribution, EmotionDistribution::uniform());
        assert_eq!(c.source, ClassificationSource::Lexicon);
        assert!(c.warning.is_none());
    }

    #[test]
    fn backend_distribution_passes_through() {
        let backend =
            FixedSentiment::new([("neutral", 0.025), ("happy", 0.025), ("sad", 0.9), ("angry", 0.025), ("surprised", 0.025)]);
        let c = classify("anything", &Lexicon::builtin(), Some(&backend)).unwrap();
        assert_eq!(c.tag, EmotionTag::Sad);
        assert_eq!(c.source, ClassificationSource::Backend);
        assert!((c.distribution.get(EmotionTag::Sad) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn malformed_backend_falls_back_to_lexicon() {
        let backend =
            FixedSentiment::new([("neutral", 0.2), ("happy", 0.2), ("sad", 0.2), ("angry", 0.1), ("surprised", 0.1)]);
        let text = "thrilled and delighted by the victory";
        let lex = Lexicon::builtin();
        let c = classify(text, &lex, Some(&backend)).unwrap();
        assert_eq!(c.distribution, classify_lexicon(text, &lex).unwrap());
        assert_eq!(c.tag, EmotionTag::Happy);
        assert_eq!(c.source, ClassificationSource::Lexicon);
        assert!(c.warning.is_some());
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(classify("", &Lexicon::builtin(), None), Err(SentimentError::EmptyText));
    }
}
