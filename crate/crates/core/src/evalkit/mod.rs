//! Questionnaire schema, rank and effect-size statistics, and A/B comparison
//! reports.

mod report;
mod stats;

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use report::{
    boxplot_data, compare_systems, render_table, BoxplotData, BoxplotGroup, BoxplotMetric, ComparisonReport,
    GroupInfo, MetricRow, ALPHA_WARN_BELOW,
};
pub use stats::{
    cohens_d, cronbach_alpha, five_number_summary, mann_whitney_u, mean, quantile, variance, FiveNumberSummary,
    MannWhitneyResult, PMethod, EXACT_MAX_N,
};

use crate::pipeline::SystemMode;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("empty group")]
    EmptyGroup,
    #[error("each group needs at least {min} values")]
    GroupTooSmall { min: usize },
    #[error("need at least two items")]
    TooFewItems,
    #[error("rows have different lengths")]
    Ragged,
    #[error("zero variance")]
    ZeroVariance,
    #[error("non-finite value")]
    NonFinite,
    #[error("expected {expected} items, got {got}")]
    ItemCount { expected: usize, got: usize },
    #[error("likert item {item} = {value} outside 1..=5")]
    OutOfRange { item: &'static str, value: i64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("response for session {0} has no matching session record")]
    UnknownSession(String),
    #[error("duplicate {kind} for session {id}")]
    Duplicate { kind: &'static str, id: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Report metrics, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rag,
    Task1,
    Task2,
    EmotionAppropriateness,
    Engagement,
    NTurn,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::Rag, Metric::Task1, Metric::Task2, Metric::EmotionAppropriateness, Metric::Engagement, Metric::NTurn];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Rag => "rag",
            Metric::Task1 => "task1",
            Metric::Task2 => "task2",
            Metric::EmotionAppropriateness => "emotion_appropriateness",
            Metric::Engagement => "engagement",
            Metric::NTurn => "n_turn",
        }
    }

    /// Row label used in the rendered table.
    pub fn label(self) -> &'static str {
        match self {
            Metric::Rag => "RAG Evaluation",
            Metric::Task1 => "Task Achievement 1",
            Metric::Task2 => "Task achievement 2",
            Metric::EmotionAppropriateness => "Speech Emotion Appropriateness",
            Metric::Engagement => "Engagement",
            Metric::NTurn => "N Turn",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.key() == s).ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// The seven 1–5 ratings of one questionnaire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawItems")]
pub struct LikertItems {
    pub rag: u8,
    pub task1: u8,
    pub task2: u8,
    pub emotion_appropriateness: u8,
    pub engage1: u8,
    pub engage2: u8,
    pub engage3: u8,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItems {
    rag: i64,
    task1: i64,
    task2: i64,
    emotion_appropriateness: i64,
    engage1: i64,
    engage2: i64,
    engage3: i64,
}

impl TryFrom<RawItems> for LikertItems {
    type Error = EvalError;

    fn try_from(r: RawItems) -> Result<Self, Self::Error> {
        let check = |item: &'static str, value: i64| {
            if (1..=5).contains(&value) {
                Ok(value as u8)
            } else {
                Err(EvalError::OutOfRange { item, value })
            }
        };
        Ok(LikertItems {
            rag: check("rag", r.rag)?,
            task1: check("task1", r.task1)?,
            task2: check("task2", r.task2)?,
            emotion_appropriateness: check("emotion_appropriateness", r.emotion_appropriateness)?,
            engage1: check("engage1", r.engage1)?,
            engage2: check("engage2", r.engage2)?,
            engage3: check("engage3", r.engage3)?,
        })
    }
}

impl LikertItems {
    pub const KEYS: [&'static str; 7] =
        ["rag", "task1", "task2", "emotion_appropriateness", "engage1", "engage2", "engage3"];

    /// Items in [`LikertItems::KEYS`] order.
    pub fn from_array(values: [i64; 7]) -> Result<Self, EvalError> {
        let [rag, task1, task2, emotion_appropriateness, engage1, engage2, engage3] = values;
        RawItems { rag, task1, task2, emotion_appropriateness, engage1, engage2, engage3 }.try_into()
    }

    pub fn to_array(&self) -> [u8; 7] {
        [self.rag, self.task1, self.task2, self.emotion_appropriateness, self.engage1, self.engage2, self.engage3]
    }

    pub fn engagement_items(&self) -> [u8; 3] {
        [self.engage1, self.engage2, self.engage3]
    }

    /// The single-item score for `metric`, or the engagement mean. `None` for `n_turn`.
    pub fn score<T: Scalar>(&self, metric: Metric) -> Option<T> {
        let v = match metric {
            Metric::Rag => self.rag,
            Metric::Task1 => self.task1,
            Metric::Task2 => self.task2,
            Metric::EmotionAppropriateness => self.emotion_appropriateness,
            Metric::Engagement => return engagement_score(&self.engagement_items()).ok(),
            Metric::NTurn => return None,
        };
        Some(T::from_count(v as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireResponse {
    pub session_id: String,
    pub items: LikertItems,
}

/// Per-session facts the report needs beyond the questionnaire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<SystemMode>,
    /// Completed exchanges.
    pub n_turn: usize,
}

/// Arithmetic mean of exactly three 1–5 engagement ratings.
pub fn engagement_score<T: Scalar>(items: &[u8]) -> Result<T, EvalError> {
    if items.len() != 3 {
        return Err(EvalError::ItemCount { expected: 3, got: items.len() });
    }
    if let Some(&v) = items.iter().find(|v| !(1..=5).contains(*v)) {
        return Err(EvalError::OutOfRange { item: "engagement", value: v as i64 });
    }
    let sum: usize = items.iter().map(|&v| v as usize).sum();
    Ok(T::from_count(sum) / T::from_count(3))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>, EvalError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| EvalError::Parse { path: display.clone(), line: i + 1, message: e.to_string() })?;
        out.push(value);
    }
    Ok(out)
}

pub fn load_responses(path: &Path) -> Result<Vec<QuestionnaireResponse>, EvalError> {
    read_jsonl(path)
}

pub fn load_session_summaries(path: &Path) -> Result<Vec<SessionSummary>, EvalError> {
    read_jsonl(path)
}
