use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SentimentError;
use crate::scalar::Scalar;

/// The five emotion classes that condition synthesis.
///
/// Declaration order is the argmax tie-break order: ties resolve to the
/// earliest tag, so ambiguity falls back to neutral speech.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionTag {
    #[default]
    Neutral,
    Happy,
    Sad,
    Angry,
    Surprised,
}

impl EmotionTag {
    pub const ALL: [EmotionTag; 5] =
        [EmotionTag::Neutral, EmotionTag::Happy, EmotionTag::Sad, EmotionTag::Angry, EmotionTag::Surprised];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionTag::Neutral => "neutral",
            EmotionTag::Happy => "happy",
            EmotionTag::Sad => "sad",
            EmotionTag::Angry => "angry",
            EmotionTag::Surprised => "surprised",
        }
    }

    pub(crate) fn position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EmotionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionTag {
    type Err = SentimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmotionTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SentimentError::UnknownTag(s.to_string()))
    }
}

const SUM_TOLERANCE: f64 = 1e-6;

/// Probability for each of the five tags; sums to 1 within 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionDistribution<T: Scalar> {
    probs: [T; 5],
}

impl<T: Scalar> EmotionDistribution<T> {
    /// Probabilities in [`EmotionTag::ALL`] order.
    pub fn new(probs: [T; 5]) -> Result<Self, SentimentError> {
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero() || *p > T::one()) {
            return Err(SentimentError::InvalidDistribution("probability outside [0, 1]".into()));
        }
        let sum: f64 = probs.iter().map(|p| p.as_f64()).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SentimentError::InvalidDistribution(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform() -> Self {
        let p = T::one() / T::from_count(5);
        Self { probs: [p; 5] }
    }

    /// Divides non-negative weights by their total.
    pub fn from_weights(weights: [T; 5]) -> Result<Self, SentimentError> {
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(SentimentError::InvalidDistribution("negative or non-finite weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(SentimentError::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self { probs: weights.map(|w| w / total) })
    }

    pub fn get(&self, tag: EmotionTag) -> T {
        self.probs[tag.position()]
    }

    pub fn probabilities(&self) -> [T; 5] {
        self.probs
    }

    /// Highest-probability tag; exact ties go to the earliest tag in [`EmotionTag::ALL`].
    pub fn argmax(&self) -> EmotionTag {
        let mut best = 0;
        for i in 1..5 {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        EmotionTag::ALL[best]
    }

    pub fn to_map(&self) -> BTreeMap<EmotionTag, T> {
        EmotionTag::ALL.iter().map(|&t| (t, self.get(t))).collect()
    }
}

impl<T: Scalar + Serialize> Serialize for EmotionDistribution<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_map().serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for EmotionDistribution<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<EmotionTag, T>::deserialize(deserializer)?;
        let mut probs = [T::zero(); 5];
        for tag in EmotionTag::ALL {
            probs[tag.position()] = *map
                .get(&tag)
                .ok_or_else(|| serde::de::Error::custom(format!("missing probability for {tag}")))?;
        }
        Self::new(probs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_serialize_lowercase() {
        for tag in EmotionTag::ALL {
            assert_eq!(serde_json::to_string(&tag).unwrap(), format!("\"{tag}\""));
            assert_eq!(tag.as_str().parse::<EmotionTag>().unwrap(), tag);
        }
        assert!("joy".parse::<EmotionTag>().is_err());
    }

    #[test]
    fn argmax_tie_break_prefers_earlier_tags() {
        assert_eq!(EmotionDistribution::<f64>::uniform().argmax(), EmotionTag::Neutral);
        let d = EmotionDistribution::new([0.1, 0.2, 0.3, 0.3, 0.1f64]).unwrap();
        assert_eq!(d.argmax(), EmotionTag::Sad);
        let d = EmotionDistribution::new([0.0, 0.0, 0.0, 0.5, 0.5f64]).unwrap();
        assert_eq!(d.argmax(), EmotionTag::Angry);
    }

    #[test]
    fn validation() {
        assert!(EmotionDistribution::new([0.2f64; 5]).is_ok());
        assert!(EmotionDistribution::new([0.2, 0.2, 0.2, 0.2, 0.1f64]).is_err());
        assert!(EmotionDistribution::new([1.2, -0.2, 0.0, 0.0, 0.0f64]).is_err());
        assert!(EmotionDistribution::<f32>::from_weights([0.0; 5]).is_err());
    }

    #[test]
    fn json_shape() {
        let d = EmotionDistribution::new([0.025, 0.025, 0.9, 0.025, 0.025f64]).unwrap();
        let json = serde_json::to_value(d).unwrap();
        assert_eq!(json["sad"], 0.9);
        let back: EmotionDistribution<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, d);
        let missing = serde_json::json!({"neutral": 1.0, "happy": 0.0, "sad": 0.0, "angry": 0.0});
        assert!(serde_json::from_value::<EmotionDistribution<f64>>(missing).is_err());
    }
}
