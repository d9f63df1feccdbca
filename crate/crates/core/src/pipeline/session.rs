use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Stage};
use crate::index::RetrievalResult;
use crate::sentiment::{ClassificationSource, EmotionDistribution, EmotionTag};

/// Which of the two systems a session runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemMode {
    /// Neutral speech, no sentiment stage.
    Baseline,
    /// Sentiment-conditioned speech.
    Emotional,
}

impl SystemMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemMode::Baseline => "baseline",
            SystemMode::Emotional => "emotional",
        }
    }
}

impl fmt::Display for SystemMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(SystemMode::Baseline),
            "emotional" | "proposed" => Ok(SystemMode::Emotional),
            other => Err(format!("unknown mode {other:?} (expected baseline or emotional)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    #[default]
    Text,
    Audio,
}

/// One completed user/system exchange with full provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub input_kind: InputKind,
    pub user_text: String,
    pub system_text: String,
    pub emotion: EmotionTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion_distribution: Option<EmotionDistribution<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification_source: Option<ClassificationSource>,
    /// Retrieval results injected into `prompt`.
    pub retrieved: Vec<RetrievalResult<f32>>,
    pub prompt: String,
    pub style_text: String,
    /// Stages executed, in order.
    pub stages: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<String>,
    pub started_at: String,
    pub ended_at: String,
}

/// Ordered turns of one conversation. The mode is fixed at creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueSession {
    id: String,
    mode: SystemMode,
    turns: Vec<Turn>,
    created_at: String,
}

impl DialogueSession {
    pub fn new(id: impl Into<String>, mode: SystemMode) -> Self {
        Self::with_created_at(id, mode, super::now_rfc3339())
    }

    pub fn with_created_at(id: impl Into<String>, mode: SystemMode, created_at: String) -> Self {
        Self { id: id.into(), mode, turns: Vec::new(), created_at }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> SystemMode {
        self.mode
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn created_at(&self) -> &str {
        &self.created_at
    }

    pub fn next_turn_index(&self) -> usize {
        self.turns.len()
    }

    /// Appends a completed turn; indices must stay contiguous from 0 and
    /// baseline turns must be neutral.
    pub fn push_turn(&mut self, turn: Turn) -> Result<(), PipelineError> {
        if turn.index != self.turns.len() {
            return Err(PipelineError::Invariant(format!(
                "turn index {} does not follow {}",
                turn.index,
                self.turns.len()
            )));
        }
        if self.mode == SystemMode::Baseline && (turn.emotion != EmotionTag::Neutral || turn.stages.contains(&Stage::Classify)) {
            return Err(PipelineError::Invariant("baseline turn must be neutral and unclassified".into()));
        }
        self.turns.push(turn);
        Ok(())
    }
}

/// Completed exchanges in the session; aborted turns are never stored.
pub fn count_system_turns(session: &DialogueSession) -> usize {
    session.turns.len()
}
