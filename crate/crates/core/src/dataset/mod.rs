//! Frames, sequences and the semi-supervised corpus built from them.

mod semisup;
mod split;
mod synth;

pub use semisup::{
    assign_labels, build_semisupervised_sequence, build_semisupervised_dataset, class_weight,
    retain_labels, segment_lengths, LabelSegments, SemiSupervisedConfig,
    SemiSupervisedDataset, NEUTRAL_WEIGHT,
};
pub use split::{split_dataset, Split, SplitConfig};
pub use synth::{
    expression_at, expression_template, generate_synthetic_corpus, neutral_landmarks,
    ExpressionParams, SyntheticConfig, SyntheticCorpus,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::repr::{GrayImage, Landmarks68};

/// The seven classes, coded 1..=7 in this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
    Neutral,
}

pub const NUM_CLASSES: usize = 7;

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Surprise,
        Emotion::Neutral,
    ];

    /// The six non-neutral classes a video can be labeled with.
    pub const EXPRESSIONS: [Emotion; 6] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Surprise,
    ];

    /// 1-based class code.
    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    /// 0-based position in a probability vector.
    pub fn index(self) -> usize {
        Emotion::ALL.iter().position(|&e| e == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Emotion::ALL.get(i).copied()
    }

    pub fn from_code(code: u8) -> Result<Emotion> {
        (code as usize)
            .checked_sub(1)
            .and_then(Emotion::from_index)
            .ok_or_else(|| Error::Label(format!("class code {code} outside 1..=7")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
            Emotion::Neutral => "neutral",
        }
    }

    pub fn from_name(s: &str) -> Result<Emotion> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Label(format!("unknown label {s:?}")))
    }
}

/// One frame `I_{z,t}` with its landmarks and (possibly absent) label.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub video_id: String,
    /// 1-based position in its sequence.
    pub t: usize,
    pub image: GrayImage,
    pub landmarks: Landmarks68,
    pub label: Option<Emotion>,
}

impl FrameRecord {
    pub fn key(&self) -> String {
        format!("{}#{}", self.video_id, self.t)
    }
}

/// An ordered clip (or a single still image, as a length-1 sequence).
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSequence {
    pub id: String,
    pub frames: Vec<FrameRecord>,
    /// Clip label; for stills this is the image label and may be neutral.
    pub label: Option<Emotion>,
}

impl VideoSequence {
    pub fn new(id: String, frames: Vec<FrameRecord>, label: Option<Emotion>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Validation(alloc::vec![format!("{id}: no frames")]));
        }
        let mut issues = Vec::new();
        for (k, f) in frames.iter().enumerate() {
            if f.video_id != id {
                issues.push(format!("{}: frame belongs to video {}", f.key(), f.video_id));
            }
            if f.t != k + 1 {
                issues.push(format!("{id}: frame {} found at position {}", f.t, k + 1));
            }
        }
        if frames.len() >= 2 && label == Some(Emotion::Neutral) {
            issues.push(format!("{id}: a video label cannot be neutral"));
        }
        if !issues.is_empty() {
            return Err(Error::Validation(issues));
        }
        Ok(VideoSequence { id, frames, label })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_still(&self) -> bool {
        self.frames.len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_one_based() {
        assert_eq!(Emotion::Anger.code(), 1);
        assert_eq!(Emotion::Neutral.code(), 7);
        assert_eq!(Emotion::from_code(4).unwrap(), Emotion::Happiness);
        assert!(Emotion::from_code(0).is_err());
        assert!(Emotion::from_code(8).is_err());
        assert!(Emotion::from_name("contempt").is_err());
        for e in Emotion::ALL {
            assert_eq!(Emotion::from_name(e.name()).unwrap(), e);
        }
    }
}
