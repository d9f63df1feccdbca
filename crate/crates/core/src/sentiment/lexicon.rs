use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{EmotionDistribution, EmotionTag, SentimentError};
use crate::scalar::Scalar;

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

/// Keyword lists for the four non-neutral tags.
///
/// Each keyword belongs to exactly one tag, so scoring does not depend on
/// the order keywords appear in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    words: HashMap<String, EmotionTag>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }

    /// Parses `{emotion: [keywords...]}` for happy, sad, angry and surprised.
    pub fn from_json(json: &str) -> Result<Self, SentimentError> {
        let raw: BTreeMap<EmotionTag, Vec<String>> =
            serde_json::from_str(json).map_err(|e| SentimentError::Data(format!("lexicon: {e}")))?;
        if raw.contains_key(&EmotionTag::Neutral) {
            return Err(SentimentError::Data("lexicon must not list neutral keywords".into()));
        }
        let mut words = HashMap::new();
        for (tag, list) in raw {
            for w in list {
                let w = w.trim().to_lowercase();
                if w.is_empty() {
                    continue;
                }
                if let Some(prev) = words.insert(w.clone(), tag) {
                    if prev != tag {
                        return Err(SentimentError::Data(format!("keyword {w:?} listed under {prev} and {tag}")));
                    }
                }
            }
        }
        Ok(Self { words })
    }

    pub fn load(path: &Path) -> Result<Self, SentimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| SentimentError::Data(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn tag_of(&self, word: &str) -> Option<EmotionTag> {
        self.words.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Keyword hits per tag, in [`EmotionTag::ALL`] order. Neutral is always 0.
    pub fn hit_counts(&self, text: &str) -> [usize; 5] {
        let mut hits = [0usize; 5];
        for token in tokenize(text) {
            if let Some(tag) = self.tag_of(&token) {
                hits[tag.position()] += 1;
            }
        }
        hits
    }

    /// Add-one smoothed keyword frequencies: `(hits + 1) / (total + 5)`.
    pub fn classify<T: Scalar>(&self, text: &str) -> Result<EmotionDistribution<T>, SentimentError> {
        if text.trim().is_empty() {
            return Err(SentimentError::EmptyText);
        }
        let hits = self.hit_counts(text);
        EmotionDistribution::from_weights(hits.map(|h| T::from_count(h + 1)))
    }
}

/// Lowercase word tokens; anything but letters, digits and apostrophes separates words.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
}
