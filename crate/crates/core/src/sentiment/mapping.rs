//! Source-dataset emotion labels mapped onto the five target tags.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmotionTag, SentimentError};

const DEFAULT_MAPPING: &str = include_str!("../../data/label_mapping.json");

/// GoEmotions label inventory (27 emotions plus neutral).
pub const GOEMOTIONS_LABELS: [&str; 28] = [
    "admiration", "amusement", "anger", "annoyance", "approval", "caring", "confusion", "curiosity", "desire",
    "disappointment", "disapproval", "disgust", "embarrassment", "excitement", "fear", "gratitude", "grief", "joy",
    "love", "nervousness", "optimism", "pride", "realization", "relief", "remorse", "sadness", "surprise",
    "neutral",
];

/// GoodNewsEveryone dominant-emotion label inventory.
pub const GOOD_NEWS_EVERYONE_LABELS: [&str; 15] = [
    "anger", "annoyance", "disgust", "fear", "guilt", "joy", "love_including_like",
    "negative_anticipation_including_pessimism", "negative_surprise", "positive_anticipation_including_optimism",
    "positive_surprise", "pride", "sadness", "shame", "trust",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MappingTarget {
    Tag(EmotionTag),
    Discard(Discard),
}

/// Marker serialized as the literal string `"DISCARD"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Discard {
    #[serde(rename = "DISCARD")]
    Discard,
}

impl MappingTarget {
    pub const DISCARD: MappingTarget = MappingTarget::Discard(Discard::Discard);

    pub fn tag(self) -> Option<EmotionTag> {
        match self {
            MappingTarget::Tag(t) => Some(t),
            MappingTarget::Discard(_) => None,
        }
    }
}

/// Lookup table from source label to target tag or DISCARD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMapping {
    entries: BTreeMap<String, MappingTarget>,
}

impl LabelMapping {
    /// The shipped table covering GoEmotions and GoodNewsEveryone labels.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_MAPPING).expect("shipped label mapping parses")
    }

    /// Parses `{source_label: tag | "DISCARD"}`. Duplicate keys are rejected.
    pub fn from_json(json: &str) -> Result<Self, SentimentError> {
        // Parse into a list of pairs first so duplicate keys are visible.
        let pairs: Vec<(String, MappingTarget)> = {
            let raw: serde_json::Value =
                serde_json::from_str(json).map_err(|e| SentimentError::Data(format!("label mapping: {e}")))?;
            let obj = raw.as_object().ok_or_else(|| SentimentError::Data("label mapping must be an object".into()))?;
            obj.iter()
                .map(|(k, v)| {
                    serde_json::from_value(v.clone())
                        .map(|t| (k.clone(), t))
                        .map_err(|_| SentimentError::Data(format!("label {k:?}: invalid target {v}")))
                })
                .collect::<Result<_, _>>()?
        };
        let count = duplicate_key_count(json)?;
        if count != pairs.len() {
            return Err(SentimentError::Data("label mapping contains duplicate labels".into()));
        }
        Ok(Self { entries: pairs.into_iter().collect() })
    }

    pub fn load(path: &Path) -> Result<Self, SentimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| SentimentError::Data(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn map_label(&self, source: &str) -> Result<MappingTarget, SentimentError> {
        self.entries.get(source).copied().ok_or_else(|| SentimentError::UndeclaredLabel(source.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails if any of `labels` is missing from the table.
    pub fn ensure_covers<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Result<(), SentimentError> {
        for l in labels {
            self.map_label(l)?;
        }
        Ok(())
    }
}

/// Counts top-level keys in a JSON object, including repeats that a map would collapse.
fn duplicate_key_count(json: &str) -> Result<usize, SentimentError> {
    struct KeyCounter(usize);

    impl<'de> serde::de::Visitor<'de> for KeyCounter {
        type Value = usize;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a JSON object")
        }

        fn visit_map<A: serde::de::MapAccess<'de>>(mut self, mut map: A) -> Result<usize, A::Error> {
            while map.next_entry::<serde::de::IgnoredAny, serde::de::IgnoredAny>()?.is_some() {
                self.0 += 1;
            }
            Ok(self.0)
        }
    }

    let mut de = serde_json::Deserializer::from_str(json);
    serde::Deserializer::deserialize_map(&mut de, KeyCounter(0)).map_err(|e| SentimentError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_and_table_mappings() {
        let m = LabelMapping::builtin();
        assert_eq!(m.map_label("anger").unwrap(), MappingTarget::Tag(EmotionTag::Angry));
        assert_eq!(m.map_label("surprise").unwrap(), MappingTarget::Tag(EmotionTag::Surprised));
        assert_eq!(m.map_label("joy").unwrap(), MappingTarget::Tag(EmotionTag::Happy));
        assert_eq!(m.map_label("fear").unwrap(), MappingTarget::DISCARD);
        assert_eq!(m.map_label("caring").unwrap().tag(), Some(EmotionTag::Neutral));
    }

    #[test]
    fn undeclared_label_is_an_error() {
        assert!(matches!(LabelMapping::builtin().map_label("ennui"), Err(SentimentError::UndeclaredLabel(_))));
    }

    #[test]
    fn builtin_is_total_over_declared_inventories() {
        let m = LabelMapping::builtin();
        m.ensure_covers(GOEMOTIONS_LABELS).unwrap();
        m.ensure_covers(GOOD_NEWS_EVERYONE_LABELS).unwrap();
        for label in GOEMOTIONS_LABELS.iter().chain(&GOOD_NEWS_EVERYONE_LABELS) {
            match m.map_label(label).unwrap() {
                MappingTarget::Tag(t) => assert!(EmotionTag::ALL.contains(&t)),
                MappingTarget::Discard(_) => {}
            }
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_targets() {
        assert!(LabelMapping::from_json(r#"{"joy": "happy", "joy": "sad"}"#).is_err());
        assert!(LabelMapping::from_json(r#"{"joy": "elated"}"#).is_err());
        assert!(LabelMapping::from_json(r#"["joy"]"#).is_err());
        let m = LabelMapping::from_json(r#"{"joy": "happy", "meh": "DISCARD"}"#).unwrap();
        assert_eq!(m.map_label("meh").unwrap(), MappingTarget::DISCARD);
    }
}
