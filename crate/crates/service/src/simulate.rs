//! Scripted dialogues run straight through a pipeline.
//!
//! Script format:
//!
//! ```json
//! {"dialogues": [{"id": "d1", "turns": ["typed text", {"speech": "spoken text"}]}]}
//! ```
//!
//! Spoken turns become a short WAV clip whose transcript chunk carries the
//! text, which the mock recognizer returns.

use std::path::Path;

use serde::{Deserialize, Serialize};

use emonews_core::audio::{encode_wav, sine_tone, DEFAULT_SAMPLE_RATE};
use emonews_core::pipeline::{DialogueSession, Pipeline, Stage, SystemMode, Turn, TurnInput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptTurn {
    Text(String),
    Speech { speech: String },
}

impl ScriptTurn {
    pub fn to_input(&self) -> TurnInput {
        match self {
            ScriptTurn::Text(t) => TurnInput::Text(t.clone()),
            ScriptTurn::Speech { speech } => TurnInput::Audio(speech_clip(speech)),
        }
    }
}

/// Deterministic clip for `text`: a 200 Hz tone with the transcript embedded.
pub fn speech_clip(text: &str) -> Vec<u8> {
    encode_wav(&sine_tone(200.0, 0.25, DEFAULT_SAMPLE_RATE), DEFAULT_SAMPLE_RATE, Some(text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedDialogue {
    pub id: String,
    pub turns: Vec<ScriptTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub dialogues: Vec<ScriptedDialogue>,
}

impl Script {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let script: Script = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut seen = std::collections::HashSet::new();
        for d in &script.dialogues {
            crate::store::validate_session_id(&d.id).map_err(|e| e.to_string())?;
            if !seen.insert(d.id.as_str()) {
                return Err(format!("duplicate dialogue id {:?}", d.id));
            }
        }
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnFailure {
    pub script_turn: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub error: String,
}

/// One dialogue's outcome. `audio` holds the WAV bytes of each completed turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub dialogue_id: String,
    pub mode: SystemMode,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<TurnFailure>,
    #[serde(skip)]
    pub audio: Vec<Vec<u8>>,
}

impl DialogueRecord {
    /// Copy with wall-clock fields blanked, for rerun comparisons.
    pub fn without_timestamps(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.turns {
            t.started_at.clear();
            t.ended_at.clear();
        }
        out
    }
}

pub fn run_dialogue(pipeline: &Pipeline, dialogue: &ScriptedDialogue) -> DialogueRecord {
    let mut session = DialogueSession::with_created_at(dialogue.id.clone(), pipeline.mode(), String::new());
    let mut failures = Vec::new();
    let mut audio = Vec::new();
    for (i, t) in dialogue.turns.iter().enumerate() {
        match pipeline.handle_turn(&mut session, t.to_input()) {
            Ok(out) => audio.push(out.audio.audio),
            Err(e) => failures.push(TurnFailure { script_turn: i, stage: e.stage, error: e.to_string() }),
        }
    }
    DialogueRecord {
        dialogue_id: dialogue.id.clone(),
        mode: pipeline.mode(),
        turns: session.turns().to_vec(),
        failures,
        audio,
    }
}

pub fn run_script(pipeline: &Pipeline, script: &Script) -> Vec<DialogueRecord> {
    script.dialogues.iter().map(|d| run_dialogue(pipeline, d)).collect()
}
