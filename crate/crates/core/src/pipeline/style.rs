use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sentiment::EmotionTag;

/// Style prompt and unchanged content text for a prompt-conditioned synthesizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylePrompt {
    pub style_text: String,
    pub content_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StyleError {
    #[error("style table is missing {0}")]
    Missing(EmotionTag),
    #[error("style table maps {0} and {1} to the same phrase")]
    NotInjective(EmotionTag, EmotionTag),
    #[error("invalid style table: {0}")]
    Invalid(String),
}

/// Tone adjective per emotion, rendered as "A person speaks in a {adjective} tone."
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<EmotionTag, String>", into = "BTreeMap<EmotionTag, String>")]
pub struct StyleTable {
    adjectives: BTreeMap<EmotionTag, String>,
}

impl Default for StyleTable {
    fn default() -> Self {
        let adjectives = [
            (EmotionTag::Neutral, "calm and even"),
            (EmotionTag::Happy, "cheerful and bright"),
            (EmotionTag::Sad, "sorrowful and low"),
            (EmotionTag::Angry, "harsh and tense"),
            (EmotionTag::Surprised, "astonished and rising"),
        ]
        .into_iter()
        .map(|(t, a)| (t, a.to_string()))
        .collect();
        Self { adjectives }
    }
}

impl TryFrom<BTreeMap<EmotionTag, String>> for StyleTable {
    type Error = StyleError;

    fn try_from(adjectives: BTreeMap<EmotionTag, String>) -> Result<Self, Self::Error> {
        for tag in EmotionTag::ALL {
            match adjectives.get(&tag) {
                Some(a) if !a.trim().is_empty() => {}
                _ => return Err(StyleError::Missing(tag)),
            }
        }
        for (i, a) in EmotionTag::ALL.iter().enumerate() {
            for b in &EmotionTag::ALL[i + 1..] {
                if adjectives[a].trim() == adjectives[b].trim() {
                    return Err(StyleError::NotInjective(*a, *b));
                }
            }
        }
        Ok(Self { adjectives: adjectives.into_iter().map(|(t, a)| (t, a.trim().to_string())).collect() })
    }
}

impl From<StyleTable> for BTreeMap<EmotionTag, String> {
    fn from(t: StyleTable) -> Self {
        t.adjectives
    }
}

impl StyleTable {
    /// Loads `{emotion: adjective}`; all five emotions required.
    pub fn load(path: &Path) -> Result<Self, StyleError> {
        let text = std::fs::read_to_string(path).map_err(|e| StyleError::Invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| StyleError::Invalid(e.to_string()))
    }

    pub fn adjective(&self, tag: EmotionTag) -> &str {
        &self.adjectives[&tag]
    }

    pub fn style_text(&self, tag: EmotionTag) -> String {
        format!("A person speaks in a {} tone.", self.adjective(tag))
    }

    /// Inverse of [`StyleTable::style_text`].
    pub fn emotion_for_style(&self, style_text: &str) -> Option<EmotionTag> {
        EmotionTag::ALL.into_iter().find(|&t| self.style_text(t) == style_text)
    }

    /// Every rendered style sentence.
    pub fn all_style_texts(&self) -> Vec<String> {
        EmotionTag::ALL.iter().map(|&t| self.style_text(t)).collect()
    }
}

pub fn build_tts_style_prompt(text: &str, emotion: EmotionTag, styles: &StyleTable) -> StylePrompt {
    StylePrompt { style_text: styles.style_text(emotion), content_text: text.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_instantiation() {
        let t = StyleTable::default();
        let p = build_tts_style_prompt("Markets rose today.", EmotionTag::Happy, &t);
        assert_eq!(p.style_text, "A person speaks in a cheerful and bright tone.");
        assert_eq!(p.content_text, "Markets rose today.");
        let p = build_tts_style_prompt("  spaced  ", EmotionTag::Neutral, &t);
        assert_eq!(p.style_text, "A person speaks in a calm and even tone.");
        assert_eq!(p.content_text, "  spaced  ");
    }

    #[test]
    fn five_distinct_styles_and_inverse() {
        let t = StyleTable::default();
        let mut all = t.all_style_texts();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 5);
        for tag in EmotionTag::ALL {
            assert_eq!(t.emotion_for_style(&t.style_text(tag)), Some(tag));
        }
        assert_eq!(t.emotion_for_style("A person sings."), None);
    }

    #[test]
    fn override_validation() {
        let ok: StyleTable = serde_json::from_str(
            r#"{"neutral":"flat","happy":"sunny","sad":"gloomy","angry":"fiery","surprised":"startled"}"#,
        )
        .unwrap();
        assert_eq!(ok.style_text(EmotionTag::Sad), "A person speaks in a gloomy tone.");
        assert!(serde_json::from_str::<StyleTable>(r#"{"neutral":"flat"}"#).is_err());
        assert!(serde_json::from_str::<StyleTable>(
            r#"{"neutral":"flat","happy":"flat","sad":"gloomy","angry":"fiery","surprised":"startled"}"#
        )
        .is_err());
    }
}
